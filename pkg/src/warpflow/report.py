"""Named residual norms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def linf(r) -> float:
    r = np.asarray(r, dtype=float)
    return float(np.max(np.abs(r))) if r.size else 0.0


def rms(r) -> float:
    r = np.asarray(r, dtype=float)
    return float(np.sqrt(np.mean(r * r))) if r.size else 0.0


@dataclass
class ResidualReport:
    """Map of residual name -> (L∞, RMS-L²) plus an optional time stamp.

    ``fields`` keeps the raw residual arrays for callers that want profiles;
    ``times`` records, for residuals gathered along a trajectory, the snapshot
    times the array is stacked over (equal-sized blocks, one per time).
    """

    t: Optional[float] = None
    norms: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    times: dict = field(default_factory=dict)

    def add(self, name: str, residual, times=None) -> None:
        r = np.asarray(residual, dtype=float)
        if not np.all(np.isfinite(r)):
            self.norms[name] = (float("inf"), float("inf"))
        else:
            self.norms[name] = (linf(r), rms(r))
        self.fields[name] = r
        if times is not None:
            self.times[name] = [float(t) for t in times]

    def per_time(self, name: str) -> list:
        """[(t, L∞, L²)] for a residual recorded with snapshot times."""
        ts = self.times.get(name)
        if not ts:
            return []
        blocks = np.asarray(self.fields[name]).reshape(len(ts), -1)
        return [(t, linf(b), rms(b)) for t, b in zip(ts, blocks)]

    def linf(self, name: str) -> float:
        return self.norms[name][0]

    def l2(self, name: str) -> float:
        return self.norms[name][1]

    def __contains__(self, name) -> bool:
        return name in self.norms

    def names(self) -> list:
        return list(self.norms)

    def merge(self, other: "ResidualReport", prefix: str = "") -> "ResidualReport":
        for k, v in other.norms.items():
            self.norms[prefix + k] = v
            self.fields[prefix + k] = other.fields.get(k)
            if k in other.times:
                self.times[prefix + k] = other.times[k]
        self.extra.update(other.extra)
        return self

    def worst(self) -> float:
        return max((v[0] for v in self.norms.values()), default=0.0)

    def passes(self, tol: float, names=None) -> bool:
        names = self.names() if names is None else names
        return all(self.norms[n][0] < tol for n in names)

    def as_dict(self) -> dict:
        return {k: {"linf": v[0], "l2": v[1]} for k, v in self.norms.items()}
