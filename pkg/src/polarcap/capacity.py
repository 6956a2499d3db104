"""Mutual information, closed-form capacity, the divergence function, the
Kuhn-Tucker optimality certificate, and the MISO reduction.

Two independent routes compute the same rate: `mutual_information` works
from the mixture output PMF and per-point kernel rows, while
`capacity_formula` uses the closed form (phase bits plus a Marcum-Q
magnitude-entropy term minus the conditional term at the bisector angle).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .model import ApskInput, ChannelParams, make_constellation
from .quantizer import PolarQuantizerConfig
from .specfun import xlogx

__all__ = [
    "OutputPmf",
    "KtcReport",
    "output_pmf",
    "mutual_information",
    "capacity_formula",
    "capacity_from_params",
    "divergence",
    "ktc_certificate",
    "miso_capacity",
    "awgn_unquantized_capacity",
]

TWO_PI = 2.0 * math.pi


def _entropy_bits(p) -> float:
    """Shannon entropy in bits; compensated accumulation of the terms."""
    return -math.fsum(xlogx(v) for v in np.asarray(p, dtype=float).ravel())


def _bisector(b1: int) -> float:
    return math.pi / 2 ** b1


def _scaled(cfg: PolarQuantizerConfig, channel: ChannelParams) -> np.ndarray:
    return kernel.scaled_thresholds(cfg.thresholds, math.sqrt(channel.sigma2))


def _ring_rows(inp: ApskInput, channel: ChannelParams, cfg: PolarQuantizerConfig):
    """Kernel table at the bisector for the origin (if any) and each ring."""
    g = _scaled(cfg, channel)
    th = _bisector(cfg.b1)
    rows = []
    if inp.beta0 > 0.0:
        rows.append((inp.beta0, kernel.w_row(0.0, th, g, cfg.b1)))
    for rho, beta in inp.rings:
        nu = channel.gain2 * rho / channel.sigma2
        rows.append((beta, kernel.w_row(nu, th, g, cfg.b1)))
    return rows


@dataclass(frozen=True)
class OutputPmf:
    table: np.ndarray  # (2^b1, 2^b2)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if (t < -1e-12).any():
            raise ValueError("output PMF has negative entries")
        if abs(t.sum() - 1.0) > 1e-9:
            raise ValueError(f"output PMF sums to {t.sum()}, expected 1")
        object.__setattr__(self, "table", t)

    @property
    def y2_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


def output_pmf(inp: ApskInput, channel: ChannelParams,
               cfg: PolarQuantizerConfig) -> OutputPmf:
    """Joint PMF of (Y1, Y2): kernel rows mixed over all mass points.

    Ring points are exact one-cell rotations of each other, so each ring
    contributes the cyclic average of one reference row.
    """
    if inp.b1 != cfg.b1:
        raise ValueError("input and quantizer disagree on b1")
    n1 = cfg.n_phase
    table = np.zeros((n1, cfg.n_mag))
    for beta, row in _ring_rows(inp, channel, cfg):
        acc = np.zeros_like(table)
        for k in range(n1):
            acc += kernel.shift_row(row, k)
        table += beta * acc / n1
    return OutputPmf(table)


def mutual_information(inp: ApskInput, channel: ChannelParams,
                       cfg: PolarQuantizerConfig) -> float:
    """I(U; Y1, Y2) = H(Y1, Y2) - H(Y1, Y2 | U), in bits."""
    rows = _ring_rows(inp, channel, cfg)
    h_out = _entropy_bits(output_pmf(inp, channel, cfg).table)
    h_cond = math.fsum(beta * _entropy_bits(row) for beta, row in rows)
    return h_out - h_cond


def capacity_from_params(rhos, betas, beta0, thresholds, channel: ChannelParams,
                         b1: int) -> float:
    """Closed-form rate of an APSK input given quantizer thresholds.

    rhos/betas are the ring powers and probabilities, beta0 the origin mass.
    Evaluates b1 minus the magnitude-entropy term (Marcum-Q marginals) plus
    the conditional sum with the kernel taken at the bisector angle.
    """
    sigma = math.sqrt(channel.sigma2)
    g = kernel.scaled_thresholds(thresholds, sigma)
    th = _bisector(b1)
    n2 = g.size - 1

    masses = [(0.0, beta0)] if beta0 > 0.0 else []
    masses += [(float(r), float(b)) for r, b in zip(rhos, betas)]

    v_mix = np.zeros(n2)
    cond = 0.0
    for rho, beta in masses:
        t = channel.gain2 * rho
        v_mix += beta * kernel.v_row(t, sigma, thresholds)
        row = kernel.w_row(t / channel.sigma2, th, g, b1)
        cond += beta * math.fsum(xlogx(w) for w in row.ravel())
    return b1 + _entropy_bits(v_mix) + cond


def capacity_formula(inp: ApskInput, channel: ChannelParams,
                     cfg: PolarQuantizerConfig) -> float:
    """Capacity expression specialized to validated APSK inputs."""
    if inp.b1 != cfg.b1:
        raise ValueError("input and quantizer disagree on b1")
    # reject inputs that do not satisfy the APSK structural constraints
    make_constellation(inp.rings, inp.beta0, inp.b1, channel, b2=cfg.b2)
    rhos = [r for r, _ in inp.rings]
    betas = [b for _, b in inp.rings]
    return capacity_from_params(rhos, betas, inp.beta0, cfg.thresholds, channel, cfg.b1)


def awgn_unquantized_capacity(snr_linear: float) -> float:
    """log2(1 + SNR), the unquantized complex AWGN reference curve."""
    if snr_linear < 0.0:
        raise ValueError("snr must be nonnegative")
    return math.log2(1.0 + snr_linear)


def divergence(alpha: float, theta: float, inp: ApskInput,
               channel: ChannelParams, cfg: PolarQuantizerConfig,
               p_y2: np.ndarray | None = None) -> float:
    """KL-style divergence of the kernel row at input power alpha (channel
    input scale) and angle theta against the y2-marginal induced by inp."""
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    if p_y2 is None:
        p_y2 = output_pmf(inp, channel, cfg).y2_marginal
    nu = channel.gain2 * alpha / channel.sigma2
    row = kernel.w_row(nu, theta, _scaled(cfg, channel), cfg.b1)
    return _divergence_row(row, p_y2)


def _divergence_row(row: np.ndarray, p_y2: np.ndarray) -> float:
    terms = []
    for y1 in range(row.shape[0]):
        for y2 in range(row.shape[1]):
            w = row[y1, y2]
            if w > 0.0:
                terms.append(w * (math.log2(w) - math.log2(p_y2[y2])))
    return math.fsum(terms)


@dataclass(frozen=True)
class KtcReport:
    mu: float
    grid: tuple          # ((alpha_received, lhs), ...)
    min_lhs: float
    equality_gaps: tuple
    verdict: bool
    tol: float
    inconclusive: bool = False
    detail: str = ""
    theta_sweep_min: float = field(default=math.nan)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "grid": [[a, v] for a, v in self.grid],
            "min_lhs": self.min_lhs,
            "equality_gaps": list(self.equality_gaps),
            "verdict": "pass" if self.verdict else "fail",
            "tol": self.tol,
            "inconclusive": self.inconclusive,
            "detail": self.detail,
            "theta_sweep_min": self.theta_sweep_min,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ktc_certificate(inp: ApskInput, channel: ChannelParams,
                    cfg: PolarQuantizerConfig, alpha_max: float | None = None,
                    n_grid: int = 400, tol: float = 1e-4,
                    n_theta: int = 16) -> KtcReport:
    """Check the Lagrangian slack C - b1 + mu*(alpha - P') - d(alpha, theta).

    A valid optimum keeps the slack nonnegative everywhere and zero at every
    mass point.  alpha here is at the received-power scale (U domain).
    """
    gain2 = channel.gain2
    p_prime = gain2 * inp.mean_power
    cap = capacity_formula(inp, channel, cfg)
    p_y2 = output_pmf(inp, channel, cfg).y2_marginal
    bis = _bisector(cfg.b1)

    def d_at(alpha_received, theta=bis):
        return divergence(alpha_received / gain2, theta, inp, channel, cfg, p_y2)

    mass_alphas = [gain2 * rho for rho, _ in inp.rings]
    if inp.beta0 > 0.0:
        mass_alphas = [0.0] + mass_alphas
    d_mass = [d_at(a) for a in mass_alphas]

    inconclusive = False
    detail = ""
    distinct = sorted(set(mass_alphas))
    if len(distinct) >= 2:
        # equality at the mass points: d_i = c0 + mu * (alpha_i - P')
        A = np.column_stack([np.ones(len(mass_alphas)),
                             np.array(mass_alphas) - p_prime])
        sol, *_ = np.linalg.lstsq(A, np.array(d_mass), rcond=None)
        mu = float(sol[1])
        slopes = [
            (d_mass[j] - d_mass[i]) / (mass_alphas[j] - mass_alphas[i])
            for i in range(len(mass_alphas))
            for j in range(i + 1, len(mass_alphas))
            if mass_alphas[j] != mass_alphas[i]
        ]
        if len(slopes) > 1:
            spread = (max(slopes) - min(slopes)) / max(1e-300, abs(mu))
            if spread > 1e-3:
                inconclusive = True
                detail = f"multiplier fits disagree (relative spread {spread:.2e})"
    else:
        # single amplitude: stationarity, mu = d'(alpha) at the mass point
        a0 = distinct[0]
        h = 1e-4 * max(a0, p_prime)
        lo = max(0.0, a0 - h)
        mu = (d_at(a0 + h) - d_at(lo)) / (a0 + h - lo)
    mu = max(0.0, mu)

    if alpha_max is None:
        alpha_max = 8.0 * p_prime
    alphas = np.concatenate((
        [0.0],
        np.geomspace(alpha_max * 1e-6, alpha_max, n_grid - 1),
        mass_alphas,
    ))
    alphas = np.unique(alphas)
    c_slack = cap - cfg.b1
    grid = tuple(
        (float(a), float(c_slack + mu * (a - p_prime) - d_at(a))) for a in alphas
    )
    min_lhs = min(v for _, v in grid)
    gaps = tuple(
        abs(c_slack + mu * (a - p_prime) - d) for a, d in zip(mass_alphas, d_mass)
    )

    # coarse angular safety net inside one phase cell
    theta_min = math.inf
    cell = TWO_PI / cfg.n_phase
    sweep_alphas = np.geomspace(max(alpha_max * 1e-3, 1e-12), alpha_max, 24)
    for th in np.linspace(0.0, cell, n_theta, endpoint=False):
        for a in sweep_alphas:
            v = c_slack + mu * (a - p_prime) - d_at(float(a), float(th))
            theta_min = min(theta_min, v)
    min_lhs = min(min_lhs, theta_min)

    verdict = (not inconclusive) and min_lhs >= -tol and all(gp <= tol for gp in gaps)
    return KtcReport(mu, grid, float(min_lhs), gaps, verdict, tol,
                     inconclusive, detail, float(theta_min))


def miso_capacity(g_vec, sigma2: float, power: float, cfg: PolarQuantizerConfig,
                  solver_opts=None):
    """Corollary-style MISO reduction: maximum-ratio beamforming collapses the
    vector channel to a SISO channel with gain ||g||."""
    from .optimizer import alternating_optimize  # deferred: optimizer imports us

    g = np.asarray(g_vec, dtype=complex).ravel()
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        raise ValueError("g_vec must be nonzero")
    channel = ChannelParams(complex(norm), sigma2, power)
    record = alternating_optimize(channel, cfg.b1, cfg.b2, solver_opts)
    return {
        "capacity": record.capacity,
        "beamformer": g / norm,
        "input": record.input,
        "record": record,
    }
