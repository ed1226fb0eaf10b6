import json
import math
from fractions import Fraction

import numpy as np
import pytest

from rmtlab import eigen, experiments, profiles, sampler
from rmtlab.entries import GAUSSIAN, RADEMACHER
from rmtlab.experiments import SweepConfig


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig(n_list=(8,), trials=0)
    with pytest.raises(ValueError):
        SweepConfig(n_list=(8,), delta=0)
    with pytest.raises(ValueError):
        SweepConfig(n_list=(16, 8))
    with pytest.raises(ValueError):
        SweepConfig(n_list=(8,), profile="clique")
    with pytest.raises(ValueError):
        SweepConfig(n_list=(8,), dist="cauchy")
    with pytest.raises(ValueError):
        SweepConfig(n_list=(8,), profile="band")


def test_degree_rules():
    cfg = SweepConfig(n_list=(51200,), profile="clique", d_rule="log2")
    assert math.floor(math.log(51200) ** 2) == 117
    # 118 does not divide 51200; the next admissible block size is 128
    assert experiments.resolve_degree(cfg, 51200) == 127
    cfg = SweepConfig(n_list=(1000,), profile="clique", d_rule="log:2")
    d = experiments.resolve_degree(cfg, 1000)
    assert d >= math.floor(2 * math.log(1000)) and 1000 % (d + 1) == 0
    cfg = SweepConfig(n_list=(15,), profile="regular", d=3)
    assert experiments.resolve_degree(cfg, 15) == 4
    with pytest.raises(ValueError):
        SweepConfig(n_list=(8,), profile="clique", d_rule="sqrt")


def test_point_seed_is_pure_and_distinct():
    assert experiments.point_seed(1, 8, 0) == experiments.point_seed(1, 8, 0)
    seeds = {experiments.point_seed(1, n, t) for n in (8, 16) for t in range(5)}
    assert len(seeds) == 10


def test_single_row_reproducible(tmp_path):
    cfg = SweepConfig(n_list=(8,), trials=1, master_seed=3)
    a = experiments.run_bulk_convergence(cfg)
    b = experiments.run_bulk_convergence(cfg)
    assert len(a.rows) == 1
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_rows_reproduce_from_seed():
    cfg = SweepConfig(n_list=(20, 40), trials=3, master_seed=5, dist="rademacher")
    res = experiments.run_bulk_convergence(cfg)
    assert len(res.rows) == 6
    for r in res.rows:
        x = sampler.sample_matrix(profiles.full_wigner_profile(r.n), RADEMACHER, r.seed, r.trial)
        assert eigen.eig_sym(x).lambda_max == r.lambda_max


def test_csv_header_and_timing(tmp_path):
    res = experiments.run_bulk_convergence(SweepConfig(n_list=(10,), trials=2))
    res.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == ",".join(experiments.CSV_HEADER)
    assert all(line.endswith(",") for line in lines[1:])
    res.write_csv(tmp_path / "t.csv", include_timing=True)
    assert not (tmp_path / "t.csv").read_text().splitlines()[1].endswith(",")
    res.write_summary(tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["experiment"] == "bulk" and "10" in doc["median_ks"]


def test_threads_do_not_change_rows(tmp_path):
    base = dict(n_list=(30, 60), trials=3, master_seed=2)
    one = experiments.run_bulk_convergence(SweepConfig(**base, threads=1))
    many = experiments.run_bulk_convergence(SweepConfig(**base, threads=4))
    one.write_csv(tmp_path / "1.csv")
    many.write_csv(tmp_path / "4.csv")
    assert (tmp_path / "1.csv").read_bytes() == (tmp_path / "4.csv").read_bytes()


def test_bulk_ks_shrinks():
    res = experiments.run_bulk_convergence(SweepConfig(n_list=(50, 400), trials=3))
    med = res.summary["median_ks"]
    assert med[400] < med[50]


def test_absence_full_wigner_lanczos_agrees_with_dense():
    base = dict(n_list=(300,), trials=2, dist="rademacher", delta=0.1)
    dense = experiments.run_absence_sweep(SweepConfig(**base, method="dense"))
    lanc = experiments.run_absence_sweep(SweepConfig(**base, method="lanczos"))
    for a, b in zip(dense.rows, lanc.rows):
        assert a.lambda_max == pytest.approx(b.lambda_max, abs=1e-7)
    assert lanc.rows[0].ks is None


def test_clique_blocks_agree_with_dense():
    base = dict(n_list=(200,), profile="clique", d=4, trials=2, dist="gaussian")
    blocks = experiments.run_absence_sweep(SweepConfig(**base, method="blocks"))
    dense = experiments.run_absence_sweep(SweepConfig(**base, method="dense"))
    for a, b in zip(blocks.rows, dense.rows):
        assert a.lambda_max == pytest.approx(b.lambda_max, abs=1e-12)
        assert a.lambda_min == pytest.approx(b.lambda_min, abs=1e-12)


def test_presence_flags_and_block_rates():
    cfg = SweepConfig(n_list=(2000,), profile="clique", d=4, trials=3, delta=0.1, epsilon=0.5)
    res = experiments.run_presence_experiment(cfg)
    per = res.summary["per_block"][2000]
    assert per["blocks"] == 3 * 400
    assert per["minus_epsilon_d"] == -2.0
    assert all(r.outlier_flag == (r.norm > 2.1) for r in res.rows)


def test_presence_rademacher_small_d_never_flags():
    cfg = SweepConfig(n_list=(5000,), profile="clique", d=4, trials=3, delta=1e-9, dist="rademacher")
    res = experiments.run_presence_experiment(cfg)
    assert all(r.norm <= 2 + 1e-12 for r in res.rows)
    assert res.summary["outlier_frequency"][5000] == 0


def test_presence_needs_clique():
    with pytest.raises(ValueError):
        experiments.run_presence_experiment(SweepConfig(n_list=(10,)))


def test_block_tail_oracle_small():
    o = experiments.block_tail_oracle(4, "gaussian", level=0.9, samples=2000, batch=300)
    norms = eigen.block_norms(sampler.sample_clique_blocks(4, 2000, GAUSSIAN, experiments.point_seed(0, 2000, experiments.ORACLE_SLOT)))
    assert o.quantile == pytest.approx(np.quantile(norms, 0.9))
    assert o.delta == o.quantile - 2


def test_moment_convergence_table(tmp_path):
    cfg = SweepConfig(n_list=(400,), profile="clique", d=3, trials=8, dist="rademacher")
    table = experiments.run_moment_convergence(cfg, lengths=(2, 6))
    assert [r.length for r in table] == [2, 6]
    assert table[0].mc_mean == pytest.approx(1.0, abs=1e-12)
    assert table[1].exact == Fraction(31, 9) and table[1].catalan == 5
    assert abs(table[1].z_score) < 5
    experiments.write_moment_table(table, tmp_path / "m.csv")
    assert "31/9" in (tmp_path / "m.csv").read_text()
    with pytest.raises(ValueError):
        experiments.run_moment_convergence(cfg, lengths=(10,))


def test_full_wigner_fourth_moment():
    cfg = SweepConfig(n_list=(2000,), trials=3)
    (row,) = experiments.run_moment_convergence(cfg, lengths=(4,))
    assert 1.9 <= row.mc_mean <= 2.1
    assert row.exact is None


def test_regular_and_band_profiles_run():
    for cfg in (
        SweepConfig(n_list=(40,), profile="regular", d=4, trials=1),
        SweepConfig(n_list=(41,), profile="band", w=5, trials=1),
    ):
        res = experiments.run_bulk_convergence(cfg)
        assert len(res.rows) == 1 and 0 <= res.rows[0].ks <= 1


@pytest.mark.slow
def test_absence_full_wigner_4096():
    cfg = SweepConfig(n_list=(4096,), trials=10, dist="rademacher", delta=0.1, method="lanczos")
    res = experiments.run_absence_sweep(cfg)
    assert res.summary["outlier_fraction"][4096] == 0


@pytest.mark.slow
def test_absence_clique_log_squared_4096():
    cfg = SweepConfig(n_list=(4096,), profile="clique", d_rule="log2", trials=10, delta=0.2)
    res = experiments.run_absence_sweep(cfg)
    assert res.summary["outlier_fraction"][4096] <= 0.1


@pytest.mark.slow
def test_bulk_clique_log_squared_4096():
    cfg = SweepConfig(n_list=(1024, 4096), profile="clique", d_rule="log2", trials=3, dist="rademacher")
    res = experiments.run_bulk_convergence(cfg)
    assert res.summary["median_ks"][4096] < 0.08
