"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every criterion prints a PASS/FAIL line as it finishes; the lines are also
collected and repeated in the terminal summary.
"""
import math
import time
from contextlib import contextmanager
from fractions import Fraction
from itertools import product

import numpy as np
from scipy import integrate

from conftest import ACCEPTANCE_LINES
from rmtlab import eigen, experiments, profiles, sampler, semicircle, walks
from rmtlab.entries import GAUSSIAN, RADEMACHER
from rmtlab.experiments import SweepConfig

# per-block tail level used to fix delta for the phase-transition criterion
TAIL_LEVEL = 1 - 1e-3


@contextmanager
def criterion(number, title, budget_s=None):
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"took {elapsed:.1f}s, budget {budget_s}s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        line = f"{status} criterion {number}: {title} ({elapsed:.1f}s)"
        ACCEPTANCE_LINES.append(line)
        print(line)


def timed(fn, *args):
    t = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t


def test_criterion_1_exact_moment_golds():
    with criterion(1, "exact clique/tree moments and gaps"):
        c, tc = timed(walks.moment_report, walks.clique(3), 6, RADEMACHER)
        t, tt = timed(walks.moment_report, walks.truncated_tree(3, 3), 6, RADEMACHER)
        assert c.moment_value == Fraction(31, 9) and c.even_walks == 93
        assert t.moment_value == Fraction(29, 9) and t.even_walks == 87
        assert c.moment_value - t.moment_value == Fraction(2, 9) == Fraction(3 * 2, 3**3)
        assert tc < 5 and tt < 5
        for d in range(2, 7):
            g6, t6 = timed(walks.moment_gap, d, 6, RADEMACHER)
            assert g6 == Fraction(d * (d - 1), d**3) and t6 < 5
            for length in (2, 4):
                g, tg = timed(walks.moment_gap, d, length, RADEMACHER)
                assert g == 0 and tg < 5


def test_criterion_2_semicircle_analytics():
    with criterion(2, "semicircle density, cdf, Catalan moments, tree limit"):
        assert abs(semicircle.density(0.0) - 1 / math.pi) <= 1e-15
        for x in np.linspace(-2, 2, 101):
            ref, _ = integrate.quad(
                lambda s: math.sqrt(max(4 - s * s, 0.0)) / (2 * math.pi), -2, x, epsabs=1e-13
            )
            assert abs(semicircle.cdf(x) - ref) <= 1e-10
        assert [semicircle.moment(k) for k in (2, 4, 6, 8)] == [1, 2, 5, 14]
        assert abs(walks.tree_moment_limit(6, RADEMACHER, (10, 20, 40)) - 5) <= 1e-3


def test_criterion_3_eigensolver():
    with criterion(3, "K5, trace/Frobenius on 100 samples, dense vs Lanczos", budget_s=60):
        k5 = eigen.eig_sym(np.ones((5, 5)) - np.eye(5)).eigenvalues
        assert np.max(np.abs(k5 - np.array([4.0, -1, -1, -1, -1]))) <= 1e-10
        prof = profiles.full_wigner_profile(64)
        for trial in range(100):
            x = sampler.sample_matrix(prof, GAUSSIAN, 2024, trial).values
            lam = eigen.eig_sym(x).eigenvalues
            assert abs(lam.sum() - np.trace(x)) <= 1e-8 * 64 * prof.sigma_star
            fro = np.sum(x * x)
            assert abs(np.sum(lam**2) - fro) <= 1e-6 * fro
        big = profiles.full_wigner_profile(512)
        for trial in range(3):
            x = sampler.sample_matrix(big, GAUSSIAN, 2024, trial).values
            dense = eigen.eig_sym(x).lambda_max
            assert abs(eigen.lanczos_extremes(x).lambda_max - dense) <= 1e-7


def test_criterion_4_shape_sum_bound():
    with criterion(4, "shape-sum bound, exhaustive and exact", budget_s=120):
        cases = [
            (profiles.full_wigner_profile(6), 4),
            (profiles.full_wigner_profile(6), 6),
            (profiles.clique_union_profile(8, 3), 6),
        ]
        for prof, length in cases:
            report = walks.shape_sum_bound_check(prof, length)
            assert report.passed
            assert all(isinstance(s.ratio, Fraction) and s.ratio <= 1 for s in report.shapes)


def test_criterion_5_bulk_convergence():
    with criterion(5, "median KS decreasing in n, < 0.05 at n=2000", budget_s=600):
        for dist in ("gaussian", "rademacher"):
            cfg = SweepConfig(n_list=(250, 500, 1000, 2000), trials=5, dist=dist, master_seed=5)
            res = experiments.run_bulk_convergence(cfg)
            med = [res.summary["median_ks"][n] for n in cfg.n_list]
            print(f"  {dist}: median KS {[round(m, 5) for m in med]}")
            assert all(b < a for a, b in zip(med, med[1:]))
            assert med[-1] < 0.05


def test_criterion_6_moment_convergence():
    with criterion(6, "MC sixth moment within 3 SE of 31/9, second within 5 SE of 1"):
        cfg = SweepConfig(n_list=(5000,), profile="clique", d=3, trials=50, dist="rademacher", master_seed=6)
        second, sixth = experiments.run_moment_convergence(cfg, lengths=(2, 6))
        print(f"  2k=6: mean {sixth.mc_mean:.6f} se {sixth.mc_se:.6f}; 2k=2: mean {second.mc_mean!r} se {second.mc_se:.3g}")
        assert sixth.exact == Fraction(31, 9)
        assert abs(sixth.mc_mean - 31 / 9) <= 3 * sixth.mc_se
        # for Rademacher clique blocks tr X^2 / n is exactly 1, so the standard
        # error vanishes; the comparison then allows floating-point roundoff
        assert abs(second.mc_mean - 1) <= max(5 * second.mc_se, 1e-12)


def test_criterion_7_phase_transition():
    with criterion(7, "clique d=9 flags >= 90%, d=log^2 n flags <= 10% at n=51200", budget_s=900):
        n = 51200
        oracle = experiments.block_tail_oracle(9, "gaussian", level=TAIL_LEVEL, samples=10**6, master_seed=7)
        print(f"  delta = {oracle.delta:.6f} from the {TAIL_LEVEL} per-block quantile of 10^6 blocks")
        small = SweepConfig(n_list=(n,), profile="clique", d=9, trials=20, delta=oracle.delta, master_seed=7)
        large = SweepConfig(n_list=(n,), profile="clique", d_rule="log2", trials=20, delta=oracle.delta, master_seed=7)
        assert experiments.resolve_degree(large, n) >= math.floor(math.log(n) ** 2)
        f_small = experiments.run_presence_experiment(small).summary["outlier_frequency"][n]
        f_large = experiments.run_presence_experiment(large).summary["outlier_frequency"][n]
        print(f"  d=9: {f_small:.2f}; d={experiments.resolve_degree(large, n)}: {f_large:.2f}")
        assert f_small >= 0.9
        assert f_large <= 0.1


def test_criterion_8_rademacher_small_d_bound():
    with criterion(8, "hollow sign blocks: norm <= d at d=3 (all 64), norm/sqrt(d) <= 2 at d=4"):
        r, c = np.triu_indices(4, 1)
        patterns = list(product((-1.0, 1.0), repeat=6))
        assert len(patterns) == 64
        for signs in patterns:
            s = np.zeros((4, 4))
            s[r, c] = signs
            s[c, r] = signs
            assert eigen.eig_sym(s).norm <= 3 + 1e-12
        blocks = sampler.sample_clique_blocks(4, 10**5, RADEMACHER, 8)
        assert eigen.block_norms(blocks).max() <= 2 + 1e-12


def test_criterion_9_determinism(tmp_path):
    from rmtlab import cli

    with criterion(9, "sweep CSV byte-identical at --threads 1 and 8"):
        args = ["sweep", "--n-list", "100,200,400", "--trials", "4", "--seed", "99", "--dist", "rademacher"]
        assert cli.main(args + ["--threads", "1", "--out", str(tmp_path / "t1")]) == 0
        assert cli.main(args + ["--threads", "8", "--out", str(tmp_path / "t8")]) == 0
        clique = ["sweep", "--experiment", "presence", "--profile", "clique", "--d", "9", "--n", "5120", "--trials", "4", "--seed", "99"]
        assert cli.main(clique + ["--threads", "1", "--out", str(tmp_path / "c1")]) == 0
        assert cli.main(clique + ["--threads", "8", "--out", str(tmp_path / "c8")]) == 0
        for a, b in (("t1", "t8"), ("c1", "c8")):
            assert (tmp_path / a / "sweep.csv").read_bytes() == (tmp_path / b / "sweep.csv").read_bytes()
