import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from salbench import benchmark as B
from salbench import metrics, netpbm
from salbench.benchmark import ChallengeTag as Tag
from salbench.errors import IndexFormatError, MissingInputError
from salbench.fixtures import random_tag_sets, write_fixture

HEADER = "id,rgb,thermal,gt,split,tags\n"

# Attribute co-occurrence counts published for the VT5000 dataset, tag order BSO..T.
PUBLISHED = np.array(
    [
        [1746, 371, 590, 446, 211, 159, 96, 3, 99, 244, 66, 138, 206],
        [371, 1176, 388, 286, 113, 224, 62, 88, 65, 177, 45, 78, 151],
        [590, 388, 1134, 292, 112, 114, 49, 13, 70, 148, 76, 70, 123],
        [446, 286, 292, 1096, 66, 80, 54, 38, 46, 193, 57, 62, 160],
        [211, 113, 112, 66, 535, 51, 89, 22, 71, 83, 23, 188, 70],
        [159, 224, 114, 80, 51, 491, 35, 43, 48, 83, 27, 42, 69],
        [96, 62, 49, 54, 89, 35, 326, 21, 18, 73, 20, 177, 65],
        [3, 88, 13, 38, 22, 43, 21, 340, 37, 77, 6, 20, 66],
        [99, 65, 70, 46, 71, 48, 18, 37, 401, 76, 16, 74, 64],
        [244, 177, 148, 193, 83, 83, 73, 77, 76, 858, 32, 90, 629],
        [66, 45, 76, 57, 23, 27, 20, 6, 16, 32, 222, 28, 40],
        [138, 78, 70, 62, 188, 42, 177, 20, 74, 90, 28, 401, 92],
        [206, 151, 123, 160, 70, 69, 65, 66, 64, 629, 40, 92, 702],
    ]
)


def index_of(tag_sets, split="test"):
    entries = tuple(B.Entry(f"e{i}", "r.ppm", "t.pgm", "g.pgm", split, frozenset(t)) for i, t in enumerate(tag_sets))
    return B.DatasetIndex(entries)


def brute_cooccurrence(idx):
    m = np.zeros((13, 13), dtype=np.int64)
    for a, ta in enumerate(B.TAGS):
        for b, tb in enumerate(B.TAGS):
            for e in idx.entries:
                if ta in e.tags and tb in e.tags:
                    m[a, b] += 1
    return m


# -- tags and index I/O -----------------------------------------------------------------------


def test_thirteen_tags_round_trip():
    assert len(B.TAGS) == 13
    for t in B.TAGS:
        assert B.parse_tags(B.emit_tags({t})) == {t}
    assert B.parse_tags(B.emit_tags(B.TAGS)) == frozenset(B.TAGS)


@given(st.sets(st.sampled_from(B.TAGS)))
def test_tag_sets_round_trip(tags):
    assert B.parse_tags(B.emit_tags(tags)) == tags


def test_tag_string_with_two_codes():
    idx = B.parse_index(HEADER + "a,r.ppm,t.pgm,g.pgm,test,BSO;TC\n", check_files=False)
    assert idx.entries[0].tags == {Tag.BSO, Tag.TC}


def test_empty_data_section_is_valid():
    idx = B.parse_index(HEADER, check_files=False)
    assert len(idx) == 0
    assert B.validate_dataset(idx).ok


def test_unknown_tag_names_row():
    with pytest.raises(IndexFormatError, match=r"line 2 \(id 'a'\).*'XYZ'"):
        B.parse_index(HEADER + "a,r,t,g,test,BSO;XYZ\n", check_files=False)


@pytest.mark.parametrize(
    "body, pattern",
    [
        ("a,r,t,g,test\n", "line 2: expected 6 fields"),
        ("a,r,t,g,valid,\n", "split must be train or test"),
        (",r,t,g,test,\n", "line 2: empty id"),
    ],
)
def test_malformed_rows_name_the_line(body, pattern):
    with pytest.raises(IndexFormatError, match=pattern):
        B.parse_index(HEADER + body, check_files=False)


def test_bad_header():
    with pytest.raises(IndexFormatError, match="header"):
        B.parse_index("id,rgb,gt\n", check_files=False)


def test_duplicate_id_in_fixture_is_named(tmp_path):
    write_fixture(tmp_path, count=10, seed=2, saliency=None)
    lines = (tmp_path / "index.csv").read_text().splitlines()
    lines[8] = "s0003" + lines[8][len("s0007") :]  # row 8 is entry s0007
    (tmp_path / "index.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(IndexFormatError, match="duplicate id 's0003'"):
        B.load_index(tmp_path / "index.csv")


def test_missing_index_and_image(tmp_path):
    with pytest.raises(MissingInputError):
        B.load_index(tmp_path / "nope.csv")
    (tmp_path / "index.csv").write_text(HEADER + "a,r.ppm,t.pgm,g.pgm,test,\n")
    with pytest.raises(MissingInputError, match="id 'a'.*rgb"):
        B.load_index(tmp_path / "index.csv")


def test_load_emit_load_round_trip(tmp_path):
    write_fixture(tmp_path, count=12, seed=3)
    a = B.load_index(tmp_path / "index.csv")
    (tmp_path / "copy.csv").write_text(B.emit_index(a))
    b = B.load_index(tmp_path / "copy.csv")
    assert a == b
    assert B.emit_index(a) == (tmp_path / "index.csv").read_text()


# -- validation -------------------------------------------------------------------------------


def test_consistent_fixture_has_no_violations(tmp_path):
    idx = write_fixture(tmp_path, count=8, seed=1)
    assert B.validate_dataset(idx).violations == ()


def test_dimension_mismatch(tmp_path):
    idx = write_fixture(tmp_path, count=2, seed=1, size=32, saliency=None)
    netpbm.write(tmp_path / idx.entries[1].gt, np.zeros((16, 16), dtype=np.uint8))
    rep = B.validate_dataset(B.load_index(tmp_path / "index.csv"))
    assert [(v.id, v.kind) for v in rep.violations] == [("s0001", "dims")]
    assert not rep.ok


def test_grey_speckle_is_a_counted_warning(tmp_path):
    idx = write_fixture(tmp_path, count=3, seed=1, saliency=None)
    gt = netpbm.read(tmp_path / idx.entries[0].gt).copy()
    speckle = [(1, 1), (2, 5), (7, 3), (20, 20), (31, 0)]
    for r, c in speckle:
        gt[r, c] = 128
    netpbm.write(tmp_path / idx.entries[0].gt, gt)
    rep = B.validate_dataset(B.load_index(tmp_path / "index.csv"))
    assert rep.ok
    (v,) = rep.violations
    assert (v.kind, v.severity, v.pixel_count) == ("non_binary", "warning", len(speckle))
    assert "non-binary mask" in v.message


def test_undecodable_image_is_reported(tmp_path):
    idx = write_fixture(tmp_path, count=2, seed=1, saliency=None)
    (tmp_path / idx.entries[0].thermal).write_bytes(b"garbage")
    rep = B.validate_dataset(B.load_index(tmp_path / "index.csv"))
    assert [(v.id, v.kind) for v in rep.errors] == [("s0000", "decode")]


def test_validation_order_independent_of_workers(tmp_path):
    idx = write_fixture(tmp_path, count=12, seed=5, saliency=None)
    for e in idx.entries[::3]:
        netpbm.write(tmp_path / e.gt, np.full((32, 32), 7, dtype=np.uint8))
    idx = B.load_index(tmp_path / "index.csv")
    assert B.validate_dataset(idx, workers=1).to_json() == B.validate_dataset(idx, workers=4).to_json()


# -- co-occurrence ----------------------------------------------------------------------------


def test_two_entry_cooccurrence():
    m = B.cooccurrence(index_of([{Tag.BSO}, {Tag.BSO, Tag.CB}]))
    i, j = B.TAG_INDEX[Tag.BSO], B.TAG_INDEX[Tag.CB]
    assert m[i, i] == 2 and m[i, j] == 1 and m[j, i] == 1 and m[j, j] == 1
    assert m.sum() == 5


def test_empty_tag_sets_give_zero_matrix():
    assert not B.cooccurrence(index_of([set(), set()])).any()


@pytest.mark.parametrize("seed", range(5))
def test_cooccurrence_matches_brute_force(seed):
    idx = index_of(random_tag_sets(60, seed))
    m = B.cooccurrence(idx)
    assert np.array_equal(m, brute_cooccurrence(idx))
    assert np.array_equal(m, m.T)
    assert np.array_equal(np.diag(m), [sum(t in e.tags for e in idx.entries) for t in B.TAGS])


def test_published_counts_are_symmetric_and_reproducible():
    assert np.array_equal(PUBLISHED, PUBLISHED.T)
    assert PUBLISHED[0, 0] == 1746 and PUBLISHED[0, 1] == PUBLISHED[1, 0] == 371
    # an index realising the BSO/CB block: 371 entries carry both, the rest one each
    sets = [{Tag.BSO, Tag.CB}] * 371 + [{Tag.BSO}] * (1746 - 371) + [{Tag.CB}] * (1176 - 371)
    m = B.cooccurrence(index_of(sets))
    assert np.array_equal(m[:2, :2], PUBLISHED[:2, :2])


def test_cooccurrence_csv_layout():
    text = B.cooccurrence_csv(B.cooccurrence(index_of([{Tag.T}])))
    lines = text.splitlines()
    assert lines[0] == "tag," + ",".join(t.value for t in B.TAGS)
    assert len(lines) == 14
    assert lines[-1] == "T," + ",".join(["0"] * 12 + ["1"])


# -- object sizes -----------------------------------------------------------------------------


def test_all_positive_mask_is_bso():
    r = B.object_ratio(np.full((8, 8), 255, dtype=np.uint8))
    assert r == 1.0
    h = B.size_histogram_from_ratios([r])
    assert h.bso_count == 1 and h.sso_count == 0 and h.counts[-1] == 1


def test_single_pixel_mask_is_sso():
    gt = np.zeros((64, 64), dtype=np.uint8)
    gt[10, 10] = 255
    r = B.object_ratio(gt)
    assert r == pytest.approx(0.000244, abs=1e-6)
    h = B.size_histogram_from_ratios([r])
    assert h.sso_count == 1 and h.bso_count == 0 and h.counts[0] == 1


def test_hand_placed_squares(tmp_path):
    # 20x20 masks with squares of side 2, 8, 10, 14, 20: ratios .01 .16 .25 .49 1.0
    sides = [2, 8, 10, 14, 20]
    entries = []
    for i, s in enumerate(sides):
        gt = np.zeros((20, 20), dtype=np.uint8)
        gt[:s, :s] = 255
        netpbm.write(tmp_path / f"g{i}.pgm", gt)
        entries.append(B.Entry(f"e{i}", "x", "x", f"g{i}.pgm", "test"))
    h = B.size_histogram(B.DatasetIndex(tuple(entries), tmp_path), bins=4)
    # bins [0,.25) [.25,.5) [.5,.75) [.75,1]
    assert h.counts.tolist() == [2, 2, 0, 1]
    assert h.bso_count == 2  # .49 and 1.0; .25 is not above .26
    assert h.sso_count == 1
    assert np.allclose(h.ratios, [0.01, 0.16, 0.25, 0.49, 1.0])


@given(st.lists(st.floats(0.0, 1.0), max_size=40), st.integers(1, 30))
def test_histogram_counts_sum_to_entries(ratios, bins):
    h = B.size_histogram_from_ratios(ratios, bins)
    assert h.counts.sum() == len(ratios)
    assert len(h.edges) == bins + 1


# -- per-challenge evaluation -----------------------------------------------------------------


def test_perfect_maps_give_unit_max_f(tmp_path):
    idx = write_fixture(tmp_path, count=20, seed=4, saliency="perfect")
    table = B.per_challenge_eval(idx, tmp_path / "saliency")
    assert table.rows
    for row in table.rows:
        # the 1e-8 guard in the F-measure denominator keeps this a hair below 1
        assert row.max_f == pytest.approx(1.0, abs=1e-7)
        assert row.mean_mae == 0.0


def test_absent_tags_are_omitted():
    tags = [{Tag.BSO}, {Tag.BSO, Tag.TC}]
    accs = [metrics.eval_image(np.full((4, 4), 200, np.uint8), np.ones((4, 4), np.uint8))] * 2
    table = B.challenge_table(index_of(tags).entries, accs)
    assert [r.tag for r in table.rows] == [Tag.BSO, Tag.TC]
    assert set(table.absent) == set(B.TAGS) - {Tag.BSO, Tag.TC}
    assert [r.image_count for r in table.rows] == [2, 1]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_per_challenge_matches_filter_oracle(tmp_path, seed):
    idx = write_fixture(tmp_path, count=20, seed=seed, saliency="noisy")
    table = B.per_challenge_eval(idx, tmp_path / "saliency", workers=3)
    by_tag = {r.tag: r for r in table.rows}
    for tag in B.TAGS:
        chosen = [e for e in idx.entries if e.split == "test" and tag in e.tags]
        if not chosen:
            assert tag not in by_tag
            continue
        accs = [
            metrics.eval_image(
                netpbm.read(tmp_path / "saliency" / f"{e.id}.pgm"), metrics.binarize_gt(netpbm.read(tmp_path / e.gt))
            )
            for e in chosen
        ]
        _, max_f, mae = metrics.dataset_curve(accs)
        row = by_tag[tag]
        assert (row.max_f, row.mean_mae, row.image_count) == (max_f, mae, len(chosen))


def test_missing_saliency_map_names_entry(tmp_path):
    idx = write_fixture(tmp_path, count=4, seed=0, saliency="perfect")
    (tmp_path / "saliency" / "s0001.pgm").unlink()
    with pytest.raises(MissingInputError, match="s0001"):
        B.per_challenge_eval(idx, tmp_path / "saliency")


def test_per_challenge_csv_is_worker_independent(tmp_path):
    idx = write_fixture(tmp_path, count=20, seed=6)
    a = B.per_challenge_eval(idx, tmp_path / "saliency", workers=1).to_csv()
    b = B.per_challenge_eval(idx, tmp_path / "saliency", workers=4).to_csv()
    assert a == b
    assert a.splitlines()[0] == "tag,max_f,mean_mae,count"
