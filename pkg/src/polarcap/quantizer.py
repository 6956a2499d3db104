"""(b1, b2)-bit polar quantizer: region geometry and the forward map.

Phase is split into 2^b1 uniform cones, magnitude into 2^b2 radial bins
delimited by strictly increasing thresholds (q_0 = 0 and q_{2^b2} = +inf are
implicit).  Both partitions use lower-inclusive half-open intervals; the
measure-zero angle phi = +pi is assigned to the last phase region.
"""

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

__all__ = ["PolarQuantizerConfig", "QuantizerOutput", "quantize", "phase_region_bounds"]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PolarQuantizerConfig:
    b1: int
    b2: int
    thresholds: tuple = field(default=())

    def __post_init__(self):
        if self.b1 < 1:
            raise ValueError("b1 must be >= 1")
        if self.b2 < 0:
            raise ValueError("b2 must be >= 0")
        thr = tuple(float(q) for q in self.thresholds)
        object.__setattr__(self, "thresholds", thr)
        if len(thr) != 2 ** self.b2 - 1:
            raise ValueError(
                f"expected {2 ** self.b2 - 1} thresholds for b2={self.b2}, got {len(thr)}"
            )
        if any(q <= 0.0 for q in thr):
            raise ValueError("thresholds must be strictly positive")
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def n_phase(self) -> int:
        return 2 ** self.b1

    @property
    def n_mag(self) -> int:
        return 2 ** self.b2

    def with_thresholds(self, thresholds) -> "PolarQuantizerConfig":
        return PolarQuantizerConfig(self.b1, self.b2, tuple(thresholds))

    def to_dict(self) -> dict:
        return {"b1": self.b1, "b2": self.b2, "thresholds": list(self.thresholds)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PolarQuantizerConfig":
        return cls(int(d["b1"]), int(d["b2"]), tuple(d.get("thresholds", ())))

    @classmethod
    def from_json(cls, s: str) -> "PolarQuantizerConfig":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class QuantizerOutput:
    y1: int
    y2: int


def quantize(z: complex, cfg: PolarQuantizerConfig) -> QuantizerOutput:
    """Map a complex sample to its (y1, y2) cell."""
    phi = math.atan2(z.imag, z.real)
    y1 = int((phi + math.pi) * cfg.n_phase / TWO_PI)
    if y1 >= cfg.n_phase:  # phi == +pi
        y1 = cfg.n_phase - 1
    y2 = bisect_right(cfg.thresholds, abs(z))
    return QuantizerOutput(y1, y2)


def quantize_arrays(z: np.ndarray, cfg: PolarQuantizerConfig):
    """Vectorized quantize; returns integer arrays (y1, y2)."""
    phi = np.angle(z)
    y1 = np.floor((phi + math.pi) * cfg.n_phase / TWO_PI).astype(np.int64)
    np.clip(y1, 0, cfg.n_phase - 1, out=y1)
    y2 = np.searchsorted(np.asarray(cfg.thresholds), np.abs(z), side="right")
    return y1, y2


def phase_region_bounds(y1: int, b1: int):
    """Half-open phase interval [lo, hi) of region y1, in [-pi, pi]."""
    n = 2 ** b1
    if not 0 <= y1 < n:
        raise ValueError(f"y1 must be in [0, {n}), got {y1}")
    lo = TWO_PI * y1 / n - math.pi
    return lo, lo + TWO_PI / n


def phase_bisector(y1: int, b1: int) -> float:
    lo, hi = phase_region_bounds(y1, b1)
    return 0.5 * (lo + hi)
