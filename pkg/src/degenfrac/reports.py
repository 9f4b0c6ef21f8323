"""Verification report lines and their deterministic JSON-lines encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

AT_MOST = "<="
AT_LEAST = ">="
BELOW = "<"


def _plain(value):
    """JSON-safe copy: numpy scalars to Python, complex to ``[re, im]``, non-finite to strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [_plain(float(value.real)), _plain(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


@dataclass(frozen=True)
class ReportLine:
    """One check: ``observed`` compared with ``tolerance`` through ``relation``."""

    check: str
    anchor: str
    tolerance: float
    observed: float
    passed: bool
    model: str = "-"
    grid: str = "-"
    seed: int = 0
    criterion: int = 0
    relation: str = AT_MOST
    detail: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, check: str, anchor: str, observed: float, tolerance: float,
                relation: str = AT_MOST, **kwargs) -> "ReportLine":
        observed = float(observed)
        if relation == AT_MOST:
            ok = observed <= tolerance
        elif relation == AT_LEAST:
            ok = observed >= tolerance
        elif relation == BELOW:
            ok = observed < tolerance
        else:
            raise ValueError(f"unknown relation {relation!r}")
        return cls(check, anchor, float(tolerance), observed, bool(ok), relation=relation, **kwargs)

    def to_dict(self) -> dict:
        return _plain({
            "check": self.check,
            "anchor": self.anchor,
            "tolerance": self.tolerance,
            "observed": self.observed,
            "relation": self.relation,
            "pass": self.passed,
            "model": self.model,
            "grid": self.grid,
            "seed": self.seed,
            "criterion": self.criterion,
            "detail": self.detail,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def encode(lines: Iterable[ReportLine]) -> str:
    return "".join(line.to_json() + "\n" for line in lines)


def decode(text: str) -> list[dict]:
    return [json.loads(row) for row in text.splitlines() if row.strip()]


def grid_label(sizes) -> str:
    return "x".join(str(int(s)) for s in sizes) if sizes else "-"
