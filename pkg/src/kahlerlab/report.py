"""Experiment reports with a stable JSON shape."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class ExperimentReport:
    """A check passes when ``margin >= -budget``."""

    experiment: str
    inputs: dict = field(default_factory=dict)
    quantities: dict = field(default_factory=dict)
    budget: float = 0.0
    margin: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.budget)

    def to_dict(self) -> dict:
        return _plain({
            "experiment": self.experiment,
            "inputs": self.inputs,
            "quantities": self.quantities,
            "budget": self.budget,
            "margin": self.margin,
            "pass": self.passed,
        })

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)
