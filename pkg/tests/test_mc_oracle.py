"""Monte-Carlo verification harness: determinism and statistical agreement."""

import math

import numpy as np
import pytest
from scipy import stats

from polarcap import kernel
from polarcap.capacity import mutual_information, output_pmf
from polarcap.mc_oracle import (SimResult, empirical_w, plugin_mi,
                                simulate_joint)
from polarcap.model import ChannelParams, make_constellation
from polarcap.quantizer import PolarQuantizerConfig

CH = ChannelParams.from_snr_db(4.0)
CFG = PolarQuantizerConfig(2, 1, (1.2,))
INP = make_constellation([(0.5, 0.5), (1.5, 0.5)], 0.0, 2, CH)


def cell_z_scores(freqs, expect, n):
    stderr = np.sqrt(np.maximum(freqs * (1 - freqs), expect * (1 - expect)) / n)
    mask = (freqs > 0) | (expect > 1e-12)
    return np.abs(freqs - expect)[mask] / np.maximum(stderr[mask], 1e-300)


class TestEmpiricalW:
    def test_rejects_small_n(self):
        with pytest.raises(ValueError):
            empirical_w(1.0 + 0.0j, CH, CFG, 100)

    def test_frequencies_sum_to_one(self):
        freqs, _ = empirical_w(0.7 + 0.2j, CH, CFG, 10 ** 4, seed=1)
        assert freqs.sum() == 1.0

    def test_origin_is_uniform_over_phase(self):
        cfg = PolarQuantizerConfig(2, 0, ())
        freqs, se = empirical_w(0.0j, CH, cfg, 10 ** 5, seed=2)
        z = cell_z_scores(freqs, np.full((4, 1), 0.25), 10 ** 5)
        assert z.max() < 4.0

    def test_matches_kernel(self):
        n = 10 ** 5
        x = 0.9 * math.e ** 0  # real point
        freqs, _ = empirical_w(complex(x), CH, CFG, n, seed=3)
        nu = CH.gain2 * x * x / CH.sigma2
        g = kernel.scaled_thresholds(CFG.thresholds, math.sqrt(CH.sigma2))
        row = kernel.w_row(nu, 0.0, g, CFG.b1)
        assert cell_z_scores(freqs, row, n).max() < 4.0


class TestSimulateJoint:
    def test_counts_sum_to_n(self):
        r = simulate_joint(INP, CH, CFG, 50000, seed=0)
        assert r.joint_counts.sum() == r.n == 50000

    def test_same_seed_reproducible(self):
        a = simulate_joint(INP, CH, CFG, 70000, seed=9)
        b = simulate_joint(INP, CH, CFG, 70000, seed=9)
        assert np.array_equal(a.joint_counts, b.joint_counts)

    def test_worker_count_invariance(self):
        a = simulate_joint(INP, CH, CFG, 3 * (1 << 16) + 777, seed=5, jobs=1)
        b = simulate_joint(INP, CH, CFG, 3 * (1 << 16) + 777, seed=5, jobs=8)
        assert np.array_equal(a.joint_counts, b.joint_counts)

    def test_symbol_marginals(self):
        n = 200000
        r = simulate_joint(INP, CH, CFG, n, seed=11)
        sym = r.joint_counts.sum(axis=(1, 2)) / n
        expect = np.full(8, 1.0 / 8)  # two rings of four points, beta = 1/2
        assert cell_z_scores(sym, expect, n).max() < 4.0

    def test_y1_marginal_uniform(self):
        n = 200000
        r = simulate_joint(INP, CH, CFG, n, seed=12)
        y1 = r.joint_counts.sum(axis=(0, 2)) / n
        assert cell_z_scores(y1, np.full(4, 0.25), n).max() < 4.0

    def test_csv_export(self, tmp_path):
        r = simulate_joint(INP, CH, CFG, 20000, seed=1)
        path = tmp_path / "counts.csv"
        r.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "symbol,y1,y2,count"
        assert len(lines) == 1 + r.joint_counts.size
        total = sum(int(line.rsplit(",", 1)[1]) for line in lines[1:])
        assert total == 20000

    def test_invariant_enforced(self):
        with pytest.raises(ValueError):
            SimResult(np.zeros((1, 2, 2), dtype=np.int64), 5, 0)

    def test_chi_square_consistency(self):
        # Pearson statistic vs the analytic joint PMF, across seeds
        pmf = output_pmf(INP, CH, CFG).table.ravel()
        n = 40000
        crit = stats.chi2.ppf(0.999, pmf.size - 1)
        ok = 0
        for seed in range(20):
            r = simulate_joint(INP, CH, CFG, n, seed=seed)
            obs = r.joint_counts.sum(axis=0).ravel()
            stat = ((obs - n * pmf) ** 2 / (n * pmf)).sum()
            ok += stat < crit
        assert ok >= 19


class TestPluginMi:
    def test_product_table_is_independent(self):
        counts = np.array([[[200, 200], [200, 200]],
                           [[200, 200], [200, 200]]])
        mi, bias = plugin_mi(SimResult(counts, 1600, 0))
        assert abs(mi) <= 4.0 * bias + 1e-12

    def test_noiseless_proxy(self):
        counts = np.zeros((4, 4, 1), dtype=np.int64)
        for s in range(4):
            counts[s, s, 0] = 1000
        mi, _ = plugin_mi(SimResult(counts, 4000, 0))
        assert mi == pytest.approx(2.0, abs=1e-12)

    def test_close_to_analytic(self):
        r = simulate_joint(INP, CH, CFG, 10 ** 6, seed=21)
        mi, _ = plugin_mi(r)
        assert mi == pytest.approx(mutual_information(INP, CH, CFG),
                                   abs=5e-3)
