"""``salbench`` command line: eval, stats, infer, train-toy, selfcheck.

Every command writes ``config_echo.json`` into ``--out`` before doing any
work. Passing that file back with ``--config`` reruns the same command
with the same settings; flags given on the command line override the
echoed values.

Exit codes: 0 success, 1 selfcheck failure, 2 input error, 3 validation
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import benchmark, metrics, netpbm, selfcheck, trainer, weights
from . import network as N
from .errors import ConfigError, ContractError, ImageFormatError, IndexFormatError, MissingInputError, NumericalError, ShapeError
from .synthetic import HotSquareTask

EXIT_OK = 0
EXIT_SELFCHECK = 1
EXIT_INPUT = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

COMMANDS = ("eval", "stats", "infer", "train-toy", "selfcheck")
_DEFAULT_NET = N.NetConfig()
_DEFAULT_TRAIN = trainer.TrainConfig()


class ValidationFailure(Exception):
    """The inputs load but fail a dataset-level check (exit 3)."""


@dataclass
class RunConfig:
    command: str = ""
    index: str | None = None
    saliency_dir: str | None = None
    out: str = "."
    seed: int = 0
    # toy network
    channels: list[int] = field(default_factory=lambda: list(_DEFAULT_NET.channels))
    r: int = _DEFAULT_NET.r
    k: int = _DEFAULT_NET.k
    decoder: int = _DEFAULT_NET.decoder
    # trainer and synthetic task
    steps: int = _DEFAULT_TRAIN.steps
    lr: float = _DEFAULT_TRAIN.lr
    batch_size: int = _DEFAULT_TRAIN.batch_size
    size: int = _DEFAULT_TRAIN.task.size
    train_count: int = _DEFAULT_TRAIN.task.train_count
    test_count: int = _DEFAULT_TRAIN.task.test_count
    # infer
    weights: str | None = None
    rgb: str | None = None
    thermal: str | None = None
    id: str | None = None
    # stats
    bins: int = 10
    # selfcheck
    oracle_cases: int = 100
    grad_cases: int = 50
    corrupt_laplace: bool = False

    def net_config(self) -> N.NetConfig:
        return N.NetConfig(tuple(self.channels), self.r, self.k, self.decoder)

    def train_config(self) -> trainer.TrainConfig:
        d = HotSquareTask()
        task = HotSquareTask(
            size=self.size,
            train_count=self.train_count,
            test_count=self.test_count,
            min_side=min(d.min_side, self.size),
            max_side=min(d.max_side, self.size),
        )
        return trainer.TrainConfig(
            steps=self.steps, lr=self.lr, batch_size=self.batch_size, seed=self.seed, task=task, net=self.net_config()
        )

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)


def _channels(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _sub(sub, name: str, parents: list, help: str) -> argparse.ArgumentParser:
    return sub.add_parser(name, parents=parents, help=help, argument_default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    # defaults are suppressed so explicit flags can be told apart from echoed config values
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="config_echo.json of an earlier run to repeat")
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--seed", type=int)

    net = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    net.add_argument("--channels", type=_channels, help="five comma-separated block widths")
    net.add_argument("--r", type=int, help="channel attention reduction ratio")
    net.add_argument("--k", type=int, help="spatial attention kernel size")
    net.add_argument("--decoder", type=int, help="decoder width")

    p = argparse.ArgumentParser(prog="salbench", description=__doc__.split("\n\n")[0], parents=[common])
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    data = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    data.add_argument("--index", help="dataset index CSV")

    e = _sub(sub, "eval", [common, data], "PR curve, max-F, MAE and per-challenge table")
    e.add_argument("--saliency-dir", dest="saliency_dir", help="directory of <id>.pgm saliency maps")

    s = _sub(sub, "stats", [common, data], "tag co-occurrence, object sizes, validation report")
    s.add_argument("--bins", type=int, help="size histogram bin count")

    i = _sub(sub, "infer", [common, net], "saliency map for one RGB/thermal pair")
    i.add_argument("--weights", help="parameter container; seeded initialization when omitted")
    i.add_argument("--rgb", help="RGB image (P6)")
    i.add_argument("--thermal", help="thermal image (P5)")
    i.add_argument("--id", help="output name (default: stem of --rgb)")

    t = _sub(sub, "train-toy", [common, net], "train on the synthetic hot-square corpus")
    t.add_argument("--steps", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--size", type=int, help="synthetic image side")
    t.add_argument("--train-count", dest="train_count", type=int)
    t.add_argument("--test-count", dest="test_count", type=int)

    c = _sub(sub, "selfcheck", [common], "oracle, gradient and metric suites")
    c.add_argument("--oracle-cases", dest="oracle_cases", type=int)
    c.add_argument("--grad-cases", dest="grad_cases", type=int)
    c.add_argument("--corrupt-laplace", dest="corrupt_laplace", action="store_true", help=argparse.SUPPRESS)
    return p


def resolve_config(argv: Sequence[str] | None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    base: dict = {}
    echo = args.pop("config", None)
    if echo is not None:
        path = Path(echo)
        if not path.is_file():
            raise MissingInputError(f"config file {echo!r} not found")
        try:
            base = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {echo!r} is not valid JSON: {exc}") from None
    command = args.pop("command", None) or base.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"no command given; choose one of {', '.join(COMMANDS)}")
    base.update(args)
    base["command"] = command
    return RunConfig.from_dict(base)


# -- commands ---------------------------------------------------------------------------------


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_index(cfg: RunConfig) -> benchmark.DatasetIndex:
    if not cfg.index:
        raise MissingInputError("--index is required")
    return benchmark.load_index(cfg.index)


def cmd_eval(cfg: RunConfig, out: Path) -> int:
    idx = _load_index(cfg)
    if not cfg.saliency_dir:
        raise MissingInputError("--saliency-dir is required")
    if not Path(cfg.saliency_dir).is_dir():
        raise MissingInputError(f"saliency directory {cfg.saliency_dir!r} not found")
    if not idx.split("test"):
        raise ValidationFailure("no test entries")
    report = benchmark.validate_dataset(idx)
    if not report.ok:
        (out / "validation_report.json").write_text(report.to_json(), encoding="utf-8")
        raise ValidationFailure(f"{len(report.errors)} validation error(s); see validation_report.json")
    try:
        entries, accs = benchmark.evaluate_test_split(idx, cfg.saliency_dir)
    except (ContractError, ImageFormatError) as exc:
        raise ValidationFailure(str(exc)) from None
    curve, max_f, mae = metrics.dataset_curve(accs)
    table = benchmark.challenge_table(entries, accs)
    (out / "summary.json").write_text(metrics.summary_json(max_f, mae, len(accs)), encoding="utf-8")
    (out / "pr_curve.csv").write_text(curve.to_csv(), encoding="utf-8")
    (out / "per_challenge.csv").write_text(table.to_csv(), encoding="utf-8")
    if table.absent:
        print("tags absent from the test split: " + ", ".join(t.value for t in table.absent), file=sys.stderr)
    print(f"max_f={max_f:.6f} mean_mae={mae:.6f} images={len(accs)}")
    return EXIT_OK


def cmd_stats(cfg: RunConfig, out: Path) -> int:
    idx = _load_index(cfg)
    report = benchmark.validate_dataset(idx)
    (out / "validation_report.json").write_text(report.to_json(), encoding="utf-8")
    m = benchmark.cooccurrence(idx)
    (out / "cooccurrence.csv").write_text(benchmark.cooccurrence_csv(m), encoding="utf-8")
    if not report.ok:
        raise ValidationFailure(f"{len(report.errors)} validation error(s); see validation_report.json")
    hist = benchmark.size_histogram(idx, cfg.bins)
    (out / "size_histogram.csv").write_text(hist.to_csv(), encoding="utf-8")
    print(f"entries={len(idx)} bso={hist.bso_count} sso={hist.sso_count} warnings={len(report.violations)}")
    return EXIT_OK


def _read_pair(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    if not cfg.rgb or not cfg.thermal:
        raise MissingInputError("--rgb and --thermal are required")
    for p in (cfg.rgb, cfg.thermal):
        if not Path(p).is_file():
            raise MissingInputError(f"image {p!r} not found")
    rgb, t = netpbm.read(cfg.rgb), netpbm.read(cfg.thermal)
    if rgb.ndim != 3:
        raise ImageFormatError(f"{cfg.rgb!r} must be a 3-channel P6 image")
    if t.ndim != 2:
        raise ImageFormatError(f"{cfg.thermal!r} must be a single-channel P5 image")
    if rgb.shape[:2] != t.shape:
        raise ShapeError(f"rgb {rgb.shape[1]}x{rgb.shape[0]} and thermal {t.shape[1]}x{t.shape[0]} differ in size")
    return rgb, t


def infer_map(net: N.AdfNetToy, rgb_u8: np.ndarray, t_u8: np.ndarray) -> np.ndarray:
    """8-bit saliency map for one decoded pair (pixels scaled to [0, 1] by 1/255)."""
    rgb = np.transpose(rgb_u8.astype(np.float64) / 255.0, (2, 0, 1))[None]
    t = (t_u8.astype(np.float64) / 255.0)[None, None]
    return metrics.quantize(N.adfnet_forward(net, rgb, t)[0, 0])


def cmd_infer(cfg: RunConfig, out: Path) -> int:
    rgb, t = _read_pair(cfg)
    net = weights.load(cfg.weights) if cfg.weights else N.adfnet_init(cfg.net_config(), cfg.seed)
    name = cfg.id or Path(cfg.rgb).stem
    sal = infer_map(net, rgb, t)
    netpbm.write(out / f"{name}.pgm", sal)
    print(f"wrote {out / (name + '.pgm')}")
    return EXIT_OK


def cmd_train_toy(cfg: RunConfig, out: Path) -> int:
    tc = cfg.train_config()
    log_every = max(1, tc.steps // 10)

    def progress(row: trainer.LogRow) -> None:
        if row.step % log_every == 0:
            print(f"step {row.step:5d} lr {row.lr:.5f} loss {row.value.total:.6f}", file=sys.stderr, flush=True)

    res = trainer.train_toy(tc, progress)
    (out / "loss_log.csv").write_text(res.log_csv(), encoding="utf-8")
    weights.save(res.net, out / "weights.bin")
    (out / "train_summary.json").write_text(json.dumps(res.summary(), indent=2) + "\n", encoding="utf-8")
    (out / "test_pr_curve.csv").write_text(res.curve.to_csv(), encoding="utf-8")
    print(f"loss {res.initial_loss:.6f} -> {res.final_loss:.6f}; test max_f={res.max_f:.6f} mae={res.mean_mae:.6f}")
    return EXIT_OK


def cmd_selfcheck(cfg: RunConfig, out: Path) -> int:
    def progress(r: selfcheck.SuiteResult) -> None:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name:28s} cases={r.cases:5d} max_error={r.max_error:.3e}", file=sys.stderr, flush=True)

    kwargs = dict(oracle_cases=cfg.oracle_cases, grad_cases=cfg.grad_cases, seed=cfg.seed, progress=progress)
    if cfg.corrupt_laplace:
        with selfcheck.corrupted_laplace_kernel():
            report = selfcheck.run(**kwargs)
    else:
        report = selfcheck.run(**kwargs)
    (out / "selfcheck_report.json").write_text(report.to_json(), encoding="utf-8")
    if not report.passed:
        print("failing cases: " + " ".join(report.failing_cases))
        return EXIT_SELFCHECK
    print(f"all {len(report.suites)} suites passed")
    return EXIT_OK


HANDLERS = {"eval": cmd_eval, "stats": cmd_stats, "infer": cmd_infer, "train-toy": cmd_train_toy, "selfcheck": cmd_selfcheck}


def run(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    (out / "config_echo.json").write_text(cfg.to_json(), encoding="utf-8")
    return HANDLERS[cfg.command](cfg, out)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except ValidationFailure as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MissingInputError, IndexFormatError, ImageFormatError, ShapeError, ConfigError, ContractError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
