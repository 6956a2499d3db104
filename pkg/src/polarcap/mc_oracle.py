"""Monte-Carlo verification of the kernel, output PMF, and mutual information.

Direct simulation of the channel Z = g_los * X + N followed by polar
quantization.  Sampling is counter-based: sample indices are partitioned into
fixed-size blocks and block i draws from an independent Philox stream keyed
(seed, i), so the counts are bit-identical for any number of workers.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import ApskInput, ChannelParams, support_points
from .quantizer import PolarQuantizerConfig, quantize_arrays

__all__ = ["SimResult", "empirical_w", "simulate_joint", "plugin_mi"]

BLOCK = 1 << 16


@dataclass(frozen=True)
class SimResult:
    joint_counts: np.ndarray  # (n_symbols, 2^b1, 2^b2) integer table
    n: int
    seed: int

    def __post_init__(self):
        c = np.asarray(self.joint_counts)
        if c.sum() != self.n:
            raise ValueError(f"counts sum to {c.sum()}, expected n={self.n}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["symbol", "y1", "y2", "count"])
            for (s, y1, y2), c in np.ndenumerate(self.joint_counts):
                w.writerow([s, y1, y2, int(c)])


def _noise(gen: np.random.Generator, m: int, sigma2: float) -> np.ndarray:
    re_im = gen.normal(scale=math.sqrt(sigma2 / 2.0), size=(2, m))
    return re_im[0] + 1j * re_im[1]


def _block_ranges(n: int):
    for i in range(0, (n + BLOCK - 1) // BLOCK):
        yield i, min(BLOCK, n - i * BLOCK)


def empirical_w(x: complex, channel: ChannelParams, cfg: PolarQuantizerConfig,
                n: int, seed: int = 0):
    """Empirical cell frequencies of one transmitted point, with per-cell
    standard errors sqrt(p(1-p)/n)."""
    if n < 10 ** 4:
        raise ValueError("n must be at least 10^4")
    counts = np.zeros((cfg.n_phase, cfg.n_mag), dtype=np.int64)
    mean = channel.g_los * complex(x)
    for i, m in _block_ranges(n):
        gen = np.random.Generator(np.random.Philox(key=[seed, i]))
        y1, y2 = quantize_arrays(mean + _noise(gen, m, channel.sigma2), cfg)
        np.add.at(counts, (y1, y2), 1)
    freqs = counts / n
    stderr = np.sqrt(freqs * (1.0 - freqs) / n)
    return freqs, stderr


def _joint_block(i, m, amps, angs, cum_beta, channel, cfg, seed, shape):
    gen = np.random.Generator(np.random.Philox(key=[seed, i]))
    sym = np.searchsorted(cum_beta, gen.random(m), side="right")
    x = amps[sym] * np.exp(1j * angs[sym])
    y1, y2 = quantize_arrays(channel.g_los * x + _noise(gen, m, channel.sigma2), cfg)
    counts = np.zeros(shape, dtype=np.int64)
    np.add.at(counts, (sym, y1, y2), 1)
    return counts


def simulate_joint(inp: ApskInput, channel: ChannelParams,
                   cfg: PolarQuantizerConfig, n: int, seed: int = 0,
                   jobs: int = 1) -> SimResult:
    """Sample n (symbol, Y1, Y2) triples; deterministic for a fixed seed
    regardless of the worker count."""
    pts = support_points(inp, channel)
    amps = np.array([p.amplitude for p in pts])
    angs = np.array([p.angle for p in pts])
    probs = np.array([p.probability for p in pts])
    cum_beta = np.cumsum(probs)
    cum_beta[-1] = 1.0
    shape = (len(pts), cfg.n_phase, cfg.n_mag)

    def work(arg):
        i, m = arg
        return _joint_block(i, m, amps, angs, cum_beta, channel, cfg, seed, shape)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blocks = pool.map(work, _block_ranges(n))
            counts = sum(blocks, np.zeros(shape, dtype=np.int64))
    else:
        counts = np.zeros(shape, dtype=np.int64)
        for arg in _block_ranges(n):
            counts += work(arg)
    return SimResult(counts, n, seed)


def plugin_mi(result: SimResult):
    """Plug-in mutual information I(symbol; Y1, Y2) in bits from the counts.

    Returns (estimate, bias_scale); bias_scale is the usual first-order
    plug-in bias magnitude (#cells)/(2 n ln 2).
    """
    p = result.joint_counts / result.n
    p_sym = p.sum(axis=(1, 2))
    p_out = p.sum(axis=0)

    def h(q):
        q = q[q > 0.0]
        return float(-(q * np.log2(q)).sum())

    h_cond = sum(h(p[s] / p_sym[s]) * p_sym[s]
                 for s in range(p.shape[0]) if p_sym[s] > 0.0)
    mi = float(h(p_out.ravel()) - h_cond)
    bias_scale = p[0].size / (2.0 * result.n * math.log(2.0))
    return mi, bias_scale
