"""RGB-thermal salient object detection toolkit: fusion operators, losses and the evaluation protocol."""

__version__ = "0.1.0"
