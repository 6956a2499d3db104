"""Joint optimization of the APSK input and the magnitude thresholds.

Alternates two steps until the capacity gain drops below a threshold:
(1) optimize the ring powers/probabilities for fixed thresholds, and
(2) optimize the thresholds for the fixed input; the whole loop is repeated
from several threshold initializations and the best solution wins.

The inner searches are derivative-free (Nelder-Mead / bounded Brent) on
smooth reparameterizations: probability masses through a softmax map and
ring power *shares* through a second softmax, which makes every candidate
feasible by construction (the power equality is eliminated exactly).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize as opt

from .capacity import capacity_from_params, ktc_certificate, KtcReport
from .model import ApskInput, ChannelParams, make_constellation
from .quantizer import PolarQuantizerConfig

__all__ = [
    "SolverOptions",
    "OptimizationRecord",
    "objective_b2_1",
    "optimize_input_given_quantizer",
    "optimize_quantizer_given_input",
    "alternating_optimize",
    "classify_constellation",
    "sweep",
    "find_class_transition",
]

# default threshold multi-start grid, in units of the received envelope scale
Q1_START_FACTORS = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)

_LOGIT_CAP = 13.0  # softmax logits clamp; masses stay within ~[2e-6, 1]


@dataclass(frozen=True)
class SolverOptions:
    epsilon: float = 1e-7          # convergence threshold on capacity gain, bits
    max_outer_iters: int = 60
    q1_starts: tuple | None = None  # absolute thresholds; None -> factor grid
    inner_tol: float = 1e-8
    seed: int = 0
    L_max: int | None = None
    q_max_factor: float = 20.0
    nm_max_iter: int = 300
    skip_ktc: bool = False
    q1_start_factors: tuple | None = None  # overrides the default factor grid

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.q1_starts is not None and len(self.q1_starts) == 0:
            raise ValueError("at least one threshold start is required")


@dataclass(frozen=True)
class OptimizationRecord:
    snr_db: float
    input: ApskInput
    thresholds: tuple
    capacity: float
    constellation_class: str
    ktc: KtcReport | None
    trace: tuple
    iters: int
    q_at_bound: bool = False

    def to_dict(self, channel: ChannelParams | None = None,
                cfg: PolarQuantizerConfig | None = None) -> dict:
        d = {
            "snr_db": self.snr_db,
            "input": self.input.to_dict(channel.g_los if channel else None),
            "thresholds": list(self.thresholds),
            "capacity": self.capacity,
            "constellation_class": self.constellation_class,
            "ktc": self.ktc.to_dict() if self.ktc else None,
            "trace": list(self.trace),
            "iters": self.iters,
            "q_at_bound": self.q_at_bound,
        }
        if channel is not None:
            d["channel"] = channel.to_dict()
        if cfg is not None:
            d["quantizer"] = cfg.to_dict()
        return d


def _envelope_scale(channel: ChannelParams) -> float:
    return math.sqrt(channel.gain2 * channel.power + channel.sigma2)


def _softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass(frozen=True)
class _Structure:
    """One candidate input family: L rings, optionally an origin mass."""
    L: int
    origin: bool

    @property
    def n_params(self) -> int:
        return (self.L + self.origin - 1) + (self.L - 1)

    def decode(self, x, power: float):
        """Map free parameters to (rhos, betas, beta0); always feasible."""
        x = np.clip(np.asarray(x, dtype=float), -_LOGIT_CAP, _LOGIT_CAP)
        n_mass = self.L + (1 if self.origin else 0)
        masses = _softmax(np.concatenate(([0.0], x[: n_mass - 1])))
        if self.origin:
            beta0, betas = masses[0], masses[1:]
        else:
            beta0, betas = 0.0, masses
        shares = _softmax(np.concatenate(([0.0], x[n_mass - 1:])))
        rhos = shares * power / betas
        return rhos, betas, float(beta0)

    def encode(self, rhos, betas, beta0, power: float) -> np.ndarray:
        masses = np.concatenate(([beta0], betas)) if self.origin else np.asarray(betas)
        masses = np.clip(masses, 1e-9, None)
        logit_m = np.log(masses / masses[0])[1:]
        shares = np.clip(np.asarray(rhos) * np.asarray(betas) / power, 1e-12, None)
        logit_s = np.log(shares / shares[0])[1:]
        return np.clip(np.concatenate((logit_m, logit_s)), -_LOGIT_CAP, _LOGIT_CAP)


def _structures(b2: int, L_max: int | None):
    cap_a = 2 ** b2 if L_max is None else min(2 ** b2, L_max)
    cap_b = 2 ** b2 - 1 if L_max is None else min(2 ** b2 - 1, L_max)
    out = [_Structure(L, False) for L in range(1, cap_a + 1)]
    out += [_Structure(L, True) for L in range(1, cap_b + 1)]
    return out


def _complexity(inp: ApskInput) -> tuple:
    return (inp.n_rings + (1 if inp.beta0 > 0.0 else 0), inp.beta0, inp.rings)


def _prefer(cand, best, tol=1e-9):
    """Deterministic winner merge: capacity first, then simpler structure,
    then lexicographic parameters."""
    if best is None:
        return cand
    c_cap, b_cap = cand[0], best[0]
    if c_cap > b_cap + tol:
        return cand
    if c_cap < b_cap - tol:
        return best
    return min((cand, best), key=lambda t: _complexity(t[1]))


def objective_b2_1(rho0: float, beta0: float, q1: float,
                   channel: ChannelParams, b1: int) -> float:
    """Two-amplitude objective for (b1, 1)-bit channels.

    The lower amplitude sqrt(rho0) carries probability beta0; the upper one
    is pinned by the power equality.  beta0 = 0 collapses to plain PSK and
    rho0 = 0 with beta0 > 0 to on-off PSK.
    """
    if not 0.0 <= beta0 < 1.0:
        raise ValueError("beta0 must be in [0, 1)")
    if q1 <= 0.0:
        raise ValueError("q1 must be positive")
    if rho0 < 0.0:
        raise ValueError("rho0 must be nonnegative")
    P = channel.power
    if beta0 == 0.0:
        return capacity_from_params([P], [1.0], 0.0, (q1,), channel, b1)
    rho1 = (P - beta0 * rho0) / (1.0 - beta0)
    if rho1 < 0.0:
        raise ValueError("infeasible: upper ring power is negative")
    if rho0 == 0.0:
        return capacity_from_params([rho1], [1.0 - beta0], beta0, (q1,), channel, b1)
    return capacity_from_params(
        [rho0, rho1], [beta0, 1.0 - beta0], 0.0, (q1,), channel, b1
    )


def _eval_structure(struct: _Structure, x, thresholds, channel, b1) -> float:
    rhos, betas, beta0 = struct.decode(x, channel.power)
    if (betas < 1e-9).any() or (rhos * channel.gain2 / channel.sigma2 > 1e8).any():
        return -math.inf
    return capacity_from_params(rhos, betas, beta0, thresholds, channel, b1)


def _optimize_structure(struct, thresholds, channel, b1, opts,
                        warm_x=None, cold=True):
    """Best parameters of one candidate family for fixed thresholds.

    With `cold=False` and a warm point, only the warm neighborhood is
    searched (used on the later alternating iterations).
    """
    power = channel.power
    if struct.n_params == 0:
        cap = capacity_from_params([power], [1.0], 0.0, thresholds, channel, b1)
        return np.empty(0), cap

    def neg(x):
        return -_eval_structure(struct, x, thresholds, channel, b1)

    if struct.n_params == 1:
        windows = [(-_LOGIT_CAP, _LOGIT_CAP)]
        if warm_x is not None and not cold:
            w = float(np.asarray(warm_x).ravel()[0])
            windows = [(w - 4.0, w + 4.0)]
        best = None
        for lo, hi in windows:
            res = opt.minimize_scalar(
                lambda t: neg([t]), bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-9},
            )
            cand = (np.array([res.x]), -res.fun)
            if best is None or cand[1] > best[1]:
                best = cand
        return best

    if warm_x is not None and not cold:
        inits = [(np.asarray(warm_x, dtype=float), 0.25)]
    else:
        # asymmetric power-share start helps the ring-split regime
        split = np.zeros(struct.n_params)
        split[struct.L + struct.origin - 1:] = 2.0
        inits = [(np.zeros(struct.n_params), 0.75), (split, 0.75)]
        if warm_x is not None:
            inits.append((np.asarray(warm_x, dtype=float), 0.25))
    best = None
    for x0, step in inits:
        simplex = np.vstack([x0] + [x0 + step * e
                                    for e in np.eye(struct.n_params)])
        res = opt.minimize(
            neg, x0, method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-7,
                "fatol": opts.inner_tol * 0.01,
                "maxiter": opts.nm_max_iter,
            },
        )
        cand = (res.x, -res.fun)
        if best is None or cand[1] > best[1]:
            best = cand
    return best


def optimize_input_given_quantizer(cfg: PolarQuantizerConfig,
                                   channel: ChannelParams,
                                   L_max: int | None = None,
                                   opts: SolverOptions | None = None,
                                   warm: ApskInput | None = None,
                                   cold: bool = True):
    """Maximize the rate over candidate input families for fixed thresholds.

    Returns (input, capacity).  Ties within 1e-9 bits resolve toward the
    simpler constellation so classifications stay stable near transitions.
    """
    opts = opts or SolverOptions()
    structs = _structures(cfg.b2, L_max if L_max is not None else opts.L_max)
    if not cold and warm is not None:
        # later alternating iterations refine the structure the cold pass
        # picked instead of re-running every candidate family
        matched = [s for s in structs
                   if warm.n_rings == s.L and (warm.beta0 > 0.0) == s.origin]
        if matched:
            structs = matched
    best = None
    for struct in structs:
        warm_x = None
        if warm is not None and warm.n_rings == struct.L and \
                (warm.beta0 > 0.0) == struct.origin:
            warm_x = struct.encode(
                [r for r, _ in warm.rings], [b for _, b in warm.rings],
                warm.beta0, channel.power,
            )
        x, cap = _optimize_structure(
            struct, cfg.thresholds, channel, cfg.b1, opts, warm_x,
            cold or warm_x is None,
        )
        rhos, betas, beta0 = struct.decode(x, channel.power) if x.size else \
            (np.array([channel.power]), np.array([1.0]), 0.0)
        inp = make_constellation(zip(rhos, betas), beta0, cfg.b1, channel)
        best = _prefer((cap, inp), best)
    return best[1], best[0]


def optimize_quantizer_given_input(inp: ApskInput, channel: ChannelParams,
                                   b2: int, opts: SolverOptions | None = None,
                                   q_init=None, local: bool = False):
    """Maximize the rate over strictly ordered thresholds for a fixed input.

    Returns (thresholds, capacity, at_bound).  For b2 = 1 this is a bounded
    scalar search on q1.
    """
    opts = opts or SolverOptions()
    if b2 == 0:
        cap = capacity_from_params(
            [r for r, _ in inp.rings], [b for _, b in inp.rings],
            inp.beta0, (), channel, inp.b1,
        )
        return (), cap, False
    rhos = [r for r, _ in inp.rings]
    betas = [b for _, b in inp.rings]
    scale = _envelope_scale(channel)
    q_max = opts.q_max_factor * scale

    def cap_at(thr):
        return capacity_from_params(rhos, betas, inp.beta0, thr, channel, inp.b1)

    if b2 == 1:
        # the rate flattens for both tiny and huge q1, which defeats a plain
        # golden-section search; bracket the interior maximum on a log grid
        if local and q_init:
            q0 = min(max(q_init[0], 6e-2 * scale), q_max / 3.0)
            grid = np.geomspace(q0 / 3.0, 3.0 * q0, 12)
        else:
            local = False
            grid = np.geomspace(2e-2 * scale, q_max, 40)
        caps = np.array([cap_at((q,)) for q in grid])
        k = int(np.argmax(caps))
        if local and (k == 0 or k == grid.size - 1):
            grid = np.geomspace(2e-2 * scale, q_max, 40)
            caps = np.array([cap_at((q,)) for q in grid])
            k = int(np.argmax(caps))
        lo = grid[max(0, k - 1)]
        hi = grid[min(grid.size - 1, k + 1)]
        res = opt.minimize_scalar(
            lambda q: -cap_at((q,)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-9 * scale},
        )
        q1, cap1 = float(res.x), -res.fun
        if caps[k] > cap1:
            q1, cap1 = float(grid[k]), float(caps[k])
        return (q1,), cap1, q1 >= 0.99 * q_max

    # b2 >= 2: log-increment parameterization keeps the ordering strict
    n_thr = 2 ** b2 - 1
    if q_init is None or len(q_init) != n_thr:
        q_init = scale * np.linspace(0.5, 2.0, n_thr)
    q_init = np.asarray(q_init, dtype=float)
    t0 = np.log(np.concatenate(([q_init[0]], np.diff(q_init))))

    def neg(t):
        q = np.cumsum(np.exp(np.clip(t, -30.0, 30.0)))
        if q[-1] > q_max:
            return math.inf
        return -cap_at(tuple(q))

    simplex = np.vstack([t0] + [t0 + 0.5 * e for e in np.eye(n_thr)])
    res = opt.minimize(
        neg, t0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-8,
                 "fatol": opts.inner_tol * 0.01, "maxiter": opts.nm_max_iter},
    )
    q = tuple(np.cumsum(np.exp(np.clip(res.x, -30.0, 30.0))))
    return q, -res.fun, q[-1] >= 0.999 * q_max


def classify_constellation(inp: ApskInput, power: float,
                           tol_beta: float = 1e-3,
                           tol_rho: float | None = None) -> str:
    """Name the constellation family after coarse ring merging/pruning."""
    if tol_rho is None:
        tol_rho = 1e-3 * power
    beta0 = inp.beta0
    rings = []
    for rho, beta in sorted(inp.rings):
        if rho < tol_rho:
            beta0 += beta
        elif rings and rho - rings[-1][0] < tol_rho:
            r0, b0 = rings[-1]
            rings[-1] = ((r0 * b0 + rho * beta) / (b0 + beta), b0 + beta)
        else:
            rings.append((rho, beta))
    rings = [(r, b) for r, b in rings if b >= tol_beta]
    L = max(1, len(rings))
    if beta0 < tol_beta:
        return "PSK" if L == 1 else f"APSK_{L}"
    return "ON_OFF_PSK" if L == 1 else f"ON_OFF_APSK_{L}"


def _single_run(channel, b1, b2, opts, thresholds0, warm_input):
    """One alternating optimization from a fixed threshold start."""
    cfg = PolarQuantizerConfig(b1, b2, thresholds0)
    inp = warm_input
    trace = []
    best_cap = -math.inf
    best = None
    at_bound = False
    iters = 0
    for iters in range(1, opts.max_outer_iters + 1):
        inp, cap_in = optimize_input_given_quantizer(
            cfg, channel, None, opts, inp, cold=(iters == 1)
        )
        thr, cap_q, bound = optimize_quantizer_given_input(
            inp, channel, b2, opts, cfg.thresholds, local=(iters > 1)
        )
        step_cap = max(cap_in, cap_q)
        if cap_q >= cap_in - 1e-12:
            cfg = cfg.with_thresholds(thr)
            at_bound = bound
        if step_cap > best_cap:
            best_cap = step_cap
            best = (inp, cfg.thresholds)
        trace.append(best_cap)
        if len(trace) >= 2 and trace[-1] - trace[-2] < opts.epsilon:
            break
    return best[0], best[1], best_cap, tuple(trace), iters, at_bound


def alternating_optimize(channel: ChannelParams, b1: int, b2: int,
                         opts: SolverOptions | None = None,
                         warm_input: ApskInput | None = None,
                         warm_thresholds=None) -> OptimizationRecord:
    """Full joint optimization with threshold multi-start."""
    opts = opts or SolverOptions()
    scale = _envelope_scale(channel)
    n_thr = 2 ** b2 - 1
    starts = []
    if warm_thresholds is not None and len(warm_thresholds) == n_thr:
        starts.append(tuple(warm_thresholds))
    if opts.q1_starts is not None:
        for q in opts.q1_starts:
            starts.append(tuple(q * np.linspace(1.0, 2.0, n_thr)) if n_thr > 1
                          else (q,))
    else:
        for f in (opts.q1_start_factors or Q1_START_FACTORS):
            starts.append(tuple(f * scale * np.linspace(1.0, 2.0, n_thr)))
    if n_thr == 0:
        starts = [()]

    best = None
    for i, thr0 in enumerate(starts):
        run = _single_run(channel, b1, b2, opts,
                          thr0, warm_input if i == 0 else None)
        if best is None:
            best = run
        elif _prefer((run[2], run[0]), (best[2], best[0]))[1] is run[0]:
            best = run

    # polish: a full structure search from the winner's thresholds, so a
    # structure that only becomes profitable after threshold refinement
    # (e.g. a just-emerging origin mass) is not missed
    polish = _single_run(channel, b1, b2, opts, best[1], best[0])
    if _prefer((polish[2], polish[0]), (best[2], best[0]))[1] is polish[0]:
        best = polish

    inp_best, thr_best, cap_best, trace, iters, at_bound = best
    for i in range(1, len(trace)):
        if trace[i] < trace[i - 1] - 1e-9:
            raise RuntimeError(
                f"non-monotone alternating trace at iteration {i}: "
                f"{trace[i - 1]} -> {trace[i]}"
            )
    cfg = PolarQuantizerConfig(b1, b2, thr_best)
    ktc = None
    if not opts.skip_ktc:
        ktc = ktc_certificate(inp_best, channel, cfg)
    return OptimizationRecord(
        snr_db=channel.snr_db,
        input=inp_best,
        thresholds=thr_best,
        capacity=cap_best,
        constellation_class=classify_constellation(inp_best, channel.power),
        ktc=ktc,
        trace=trace,
        iters=iters,
        q_at_bound=at_bound,
    )


def _sweep_point(args):
    snr_db, b1, b2, opts, power, g_los = args
    channel = ChannelParams.from_snr_db(snr_db, power, g_los)
    return alternating_optimize(channel, b1, b2, opts)


def sweep(snr_db_list, b1: int, b2: int, opts: SolverOptions | None = None,
          power: float = 1.0, g_los: complex = 1.0 + 0.0j, jobs: int = 1):
    """Per-SNR optimization records.

    Serial runs warm-start each point from the previous solution on top of
    the cold multi-start grid; parallel runs use cold starts only (results
    are merged deterministically either way).
    """
    snr_db_list = list(snr_db_list)
    if not snr_db_list:
        raise ValueError("snr_db_list must be nonempty")
    opts = opts or SolverOptions()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(
                _sweep_point,
                [(s, b1, b2, opts, power, g_los) for s in snr_db_list],
            ))
    records = []
    prev = None
    for s in snr_db_list:
        channel = ChannelParams.from_snr_db(s, power, g_los)
        rec = alternating_optimize(
            channel, b1, b2, opts,
            warm_input=prev.input if prev else None,
            warm_thresholds=prev.thresholds if prev else None,
        )
        records.append(rec)
        prev = rec
    return records


def find_class_transition(b1: int, b2: int, lo_db: float, hi_db: float,
                          predicate, resolution: float = 0.05,
                          opts: SolverOptions | None = None,
                          power: float = 1.0) -> float:
    """Bisect the SNR at which `predicate(constellation_class)` flips on.

    Requires the predicate to be False at lo_db and True at hi_db.
    """
    opts = replace(opts or SolverOptions(), skip_ktc=True)

    def cls(snr_db):
        channel = ChannelParams.from_snr_db(snr_db, power)
        rec = alternating_optimize(channel, b1, b2, opts)
        return predicate(rec.constellation_class)

    if cls(lo_db):
        raise ValueError(f"predicate already true at {lo_db} dB")
    if not cls(hi_db):
        raise ValueError(f"predicate still false at {hi_db} dB")
    while hi_db - lo_db > resolution:
        mid = 0.5 * (lo_db + hi_db)
        if cls(mid):
            hi_db = mid
        else:
            lo_db = mid
    return 0.5 * (lo_db + hi_db)
