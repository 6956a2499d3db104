"""Channel parameters and APSK input distributions.

The capacity-achieving input is a union of L rings of 2^b1 equally spaced
phase points (plus an optional mass at the origin), with every point sitting
on a phase-region bisector after rotation by the LoS gain.
"""

import cmath
import json
import math
from dataclasses import dataclass, field

__all__ = [
    "ChannelParams",
    "ApskInput",
    "MassPoint",
    "ConstellationError",
    "make_constellation",
    "support_points",
]

TWO_PI = 2.0 * math.pi

RING_MERGE_RTOL = 1e-9     # relative, on amplitude sqrt(rho)
RING_PRUNE_BETA = 1e-6


@dataclass(frozen=True)
class ChannelParams:
    g_los: complex
    sigma2: float
    power: float

    def __post_init__(self):
        if abs(self.g_los) <= 0.0:
            raise ValueError("|g_los| must be positive")
        if self.sigma2 <= 0.0:
            raise ValueError("sigma2 must be positive")
        if self.power <= 0.0:
            raise ValueError("power must be positive")

    @property
    def gain2(self) -> float:
        return abs(self.g_los) ** 2

    @property
    def snr(self) -> float:
        return self.gain2 * self.power / self.sigma2

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)

    def to_dict(self) -> dict:
        return {
            "g_los": {"re": self.g_los.real, "im": self.g_los.imag},
            "sigma2": self.sigma2,
            "power": self.power,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelParams":
        g = d["g_los"]
        return cls(complex(g["re"], g["im"]), float(d["sigma2"]), float(d["power"]))

    @classmethod
    def from_snr_db(cls, snr_db: float, power: float = 1.0,
                    g_los: complex = 1.0 + 0.0j) -> "ChannelParams":
        sigma2 = abs(g_los) ** 2 * power / 10.0 ** (snr_db / 10.0)
        return cls(g_los, sigma2, power)


def snr(channel: ChannelParams) -> float:
    return channel.snr


def snr_db(channel: ChannelParams) -> float:
    return channel.snr_db


@dataclass(frozen=True)
class MassPoint:
    amplitude: float
    angle: float
    probability: float


class ConstellationError(ValueError):
    """Structural constraint violation; `violations` lists each one."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ApskInput:
    b1: int
    beta0: float
    rings: tuple = field(default=())  # ((rho, beta), ...)

    def __post_init__(self):
        object.__setattr__(
            self, "rings", tuple((float(r), float(b)) for r, b in self.rings)
        )

    @property
    def n_rings(self) -> int:
        return len(self.rings)

    @property
    def mean_power(self) -> float:
        return math.fsum(r * b for r, b in self.rings)

    def to_dict(self, g_los: complex | None = None) -> dict:
        d = {
            "b1": self.b1,
            "beta0": self.beta0,
            "rings": [{"rho": r, "beta": b} for r, b in self.rings],
        }
        if g_los is not None:
            d["g_los"] = {"re": g_los.real, "im": g_los.imag}
        return d

    def to_json(self, g_los: complex | None = None) -> str:
        return json.dumps(self.to_dict(g_los))

    @classmethod
    def from_dict(cls, d: dict) -> "ApskInput":
        return cls(
            int(d["b1"]),
            float(d.get("beta0", 0.0)),
            tuple((rr["rho"], rr["beta"]) for rr in d["rings"]),
        )

    @classmethod
    def from_json(cls, s: str) -> "ApskInput":
        return cls.from_dict(json.loads(s))


def make_constellation(rings, beta0, b1, channel: ChannelParams,
                       b2: int | None = None) -> ApskInput:
    """Validate and normalize an APSK parameter set.

    Rings with coinciding amplitudes are merged, rings with negligible mass
    are pruned (with the remaining amplitudes rescaled to keep the power
    equality).  Violated invariants raise ConstellationError naming each one.
    """
    if b1 < 1:
        raise ConstellationError(["b1 must be >= 1"])
    beta0 = float(beta0)
    rings = sorted(((float(r), float(b)) for r, b in rings), key=lambda rb: rb[0])

    violations = []
    if beta0 < 0.0 or beta0 >= 1.0:
        violations.append(f"origin mass beta0={beta0} outside [0, 1)")
    for rho, beta in rings:
        if rho <= 0.0:
            violations.append(f"ring amplitude rho={rho} must be positive")
        if beta <= 0.0:
            violations.append(f"ring probability beta={beta} must be positive")
    if violations:
        raise ConstellationError(violations)

    # merge numerically identical amplitudes (probability-weighted)
    merged = []
    for rho, beta in rings:
        if merged and math.sqrt(rho) - math.sqrt(merged[-1][0]) <= \
                RING_MERGE_RTOL * math.sqrt(rho):
            r0, b0 = merged[-1]
            merged[-1] = ((r0 * b0 + rho * beta) / (b0 + beta), b0 + beta)
        else:
            merged.append((rho, beta))

    kept = [(r, b) for r, b in merged if b >= RING_PRUNE_BETA]
    if len(kept) < len(merged) and kept:
        # drop negligible rings, renormalize the remaining ring mass and
        # rescale amplitudes to restore the power equality
        ring_mass = math.fsum(b for r, b in kept)
        scale_b = (1.0 - beta0) / ring_mass
        kept = [(r, b * scale_b) for r, b in kept]
        pw = math.fsum(r * b for r, b in kept)
        kept = [(r * channel.power / pw, b) for r, b in kept]

    total = beta0 + math.fsum(b for r, b in kept)
    if abs(total - 1.0) > 1e-12:
        violations.append(f"probabilities sum to {total}, expected 1")
    pw = math.fsum(r * b for r, b in kept)
    if abs(pw - channel.power) > 1e-10:
        violations.append(
            f"mean power {pw} violates the power equality P={channel.power}"
        )
    if not kept:
        violations.append("at least one ring is required")
    if b2 is not None:
        limit = 2 ** b2 if beta0 == 0.0 else 2 ** b2 - 1
        if len(kept) > limit:
            which = "A" if beta0 == 0.0 else "B"
            violations.append(
                f"{len(kept)} rings exceed the constellation-{which} limit {limit}"
            )
    if violations:
        raise ConstellationError(violations)
    return ApskInput(b1, beta0, tuple(kept))


def support_points(inp: ApskInput, channel: ChannelParams):
    """Enumerate the mass points of the input distribution (X domain)."""
    n = 2 ** inp.b1
    off = -cmath.phase(channel.g_los)
    pts = []
    if inp.beta0 > 0.0:
        pts.append(MassPoint(0.0, 0.0, inp.beta0))
    for rho, beta in inp.rings:
        amp = math.sqrt(rho)
        for k in range(n):
            ang = TWO_PI * (k + 0.5) / n + off
            ang = (ang + math.pi) % TWO_PI - math.pi
            pts.append(MassPoint(amp, ang, beta / n))
    return pts
