"""Monte-Carlo harnesses: bulk convergence to the semicircle, absence and
presence of spectral outliers, and moment convergence.

Every random draw goes through ``sampler``: the matrix for point (n, trial)
uses the derived seed ``point_seed(master_seed, n, trial)``, so rows are
reproducible one by one and independent of scheduling.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import eigen, semicircle, walks
from .entries import EntryDistribution, parse_distribution
from .profiles import (
    VarianceProfile,
    band_profile,
    clique_union_profile,
    full_wigner_profile,
    random_regular_profile,
)
from .sampler import sample_clique_blocks, sample_matrix

CSV_HEADER = (
    "n,d,trial,sigma_star,sigma_sqrtlog,lambda_max,lambda_min,ks,outlier_flag,seed,wall_ms"
).split(",")
PROFILES = ("full", "clique", "band", "regular")
# entries drawn per batch when a clique sample is evaluated block by block
BLOCK_BATCH_ENTRIES = 1 << 22
DENSE_LIMIT = 8192
# trial slots reserved for draws that are not matrix trials
GRAPH_SLOT = 2**32 - 1
ORACLE_SLOT = 2**32 - 2


@dataclass(frozen=True)
class SweepConfig:
    n_list: tuple[int, ...]
    profile: str = "full"
    dist: str = "gaussian"
    d_rule: str = "fixed"
    d: int | None = None
    w: int | None = None
    trials: int = 5
    delta: float = 0.1
    master_seed: int = 0
    epsilon: float | None = None
    threads: int = 1
    method: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.n_list or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError(f"n_list must be nonempty and strictly increasing: {self.n_list}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.method not in ("auto", "dense", "lanczos", "blocks"):
            raise ValueError(f"unknown method {self.method!r}")
        parse_distribution(self.dist)
        _base_degree(self, self.n_list[0])

    @property
    def distribution(self) -> EntryDistribution:
        return parse_distribution(self.dist)


@dataclass
class Row:
    n: int
    d: int | None
    trial: int
    sigma_star: float
    sigma_sqrtlog: float
    lambda_max: float
    lambda_min: float
    ks: float | None
    outlier_flag: bool
    seed: int
    wall_ms: float
    # per-block statistics, presence experiment only
    blocks: int = 0
    block_exceedances: int = 0

    @property
    def norm(self) -> float:
        return max(abs(self.lambda_max), abs(self.lambda_min))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


@dataclass
class SweepResult:
    config: SweepConfig
    experiment: str
    rows: list[Row]
    summary: dict = field(default_factory=dict)

    def write_csv(self, path, include_timing: bool = False) -> None:
        """Wall times vary between runs; they are left blank unless asked for,
        so the file is a pure function of the configuration."""
        if hasattr(path, "write"):
            self._write_rows(path, include_timing)
            return
        with open(path, "w", newline="") as fh:
            self._write_rows(fh, include_timing)

    def _write_rows(self, fh, include_timing: bool) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [
                    _fmt(r.n), _fmt(r.d), _fmt(r.trial), _fmt(r.sigma_star),
                    _fmt(r.sigma_sqrtlog), _fmt(r.lambda_max), _fmt(r.lambda_min),
                    _fmt(r.ks), _fmt(r.outlier_flag), _fmt(r.seed),
                    _fmt(r.wall_ms) if include_timing else "",
                ]
            )

    def write_summary(self, path) -> None:
        doc = {"experiment": self.experiment, "config": asdict(self.config), **self.summary}
        with open(path, "w") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return {"num": obj.numerator, "den": obj.denominator}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def point_seed(master_seed: int, n: int, trial: int) -> int:
    state = np.random.SeedSequence([int(master_seed), int(n), int(trial)]).generate_state(
        1, np.uint64
    )
    return int(state[0])


def _base_degree(config: SweepConfig, n: int) -> int | None:
    if config.profile == "full":
        return None
    if config.profile == "band":
        if config.w is None:
            raise ValueError("band profile needs w")
        return None
    rule = config.d_rule
    if rule == "fixed":
        if config.d is None:
            raise ValueError(f"d_rule 'fixed' needs d for the {config.profile} profile")
        return int(config.d)
    if rule == "log2":
        return int(math.floor(math.log(n) ** 2))
    if rule.startswith("log"):
        c = float(rule.split(":", 1)[1]) if ":" in rule else 1.0
        return int(math.floor(c * math.log(n)))
    raise ValueError(f"unknown d_rule {rule!r}")


def resolve_degree(config: SweepConfig, n: int) -> int | None:
    """Degree used at dimension n. Clique unions need (d+1) | n and regular
    graphs need n*d even, so d is raised to the next admissible value."""
    d = _base_degree(config, n)
    if d is None:
        return None
    d = max(d, 2)
    if config.profile == "clique":
        while n % (d + 1):
            d += 1
            if d + 1 > n:
                raise ValueError(f"no admissible clique degree for n={n}")
    elif config.profile == "regular" and (n * d) % 2:
        d += 1
    return d


def build_profile(config: SweepConfig, n: int) -> VarianceProfile:
    d = resolve_degree(config, n)
    if config.profile == "full":
        return full_wigner_profile(n)
    if config.profile == "clique":
        return clique_union_profile(n, d)
    if config.profile == "band":
        return band_profile(n, config.w)
    return random_regular_profile(n, d, seed=point_seed(config.master_seed, n, GRAPH_SLOT))


def _pick_method(config: SweepConfig, profile: VarianceProfile, need_spectrum: bool) -> str:
    if config.method != "auto":
        return config.method
    if profile.kind == "clique_union":
        return "blocks"
    if need_spectrum or profile.n <= 1024:
        return "dense"
    return "lanczos"


@dataclass
class _Outcome:
    lambda_max: float
    lambda_min: float
    eigenvalues: np.ndarray | None = None
    block_norms: np.ndarray | None = None


def _clique_outcome(profile, dist, seed, trial, need_spectrum, threads) -> _Outcome:
    d, nb = profile.params["d"], profile.num_blocks
    per_block = (d + 1) * d // 2
    step = max(1, BLOCK_BATCH_ENTRIES // per_block)
    norms, spectra = [], []
    lmax, lmin = -math.inf, math.inf
    for start in range(0, nb, step):
        stop = min(nb, start + step)
        vals = eigen.block_spectra(
            sample_clique_blocks(d, nb, dist, seed, trial, start, stop, threads)
        )
        lmax = max(lmax, float(vals[:, 0].max()))
        lmin = min(lmin, float(vals[:, -1].min()))
        norms.append(np.maximum(np.abs(vals[:, 0]), np.abs(vals[:, -1])))
        if need_spectrum:
            spectra.append(vals.ravel())
    eig = np.sort(np.concatenate(spectra))[::-1] if need_spectrum else None
    return _Outcome(lmax, lmin, eig, np.concatenate(norms))


def evaluate_point(
    config: SweepConfig,
    profile: VarianceProfile,
    trial: int,
    need_spectrum: bool,
    flag_on_norm: bool = False,
) -> tuple[Row, np.ndarray | None]:
    dist = config.distribution
    n = profile.n
    seed = point_seed(config.master_seed, n, trial)
    t0 = time.perf_counter()
    method = _pick_method(config, profile, need_spectrum)
    if method == "blocks":
        out = _clique_outcome(profile, dist, seed, trial, need_spectrum, 1)
    else:
        if n > DENSE_LIMIT:
            raise ValueError(f"dense storage is capped at n={DENSE_LIMIT}, got {n}")
        x = sample_matrix(profile, dist, seed, trial)
        if method == "dense":
            spec = eigen.eig_sym(x)
            out = _Outcome(spec.lambda_max, spec.lambda_min, spec.eigenvalues)
        else:
            res = eigen.lanczos_extremes(x)
            out = _Outcome(res.lambda_max, res.lambda_min)
    ks = semicircle.ks_distance(out.eigenvalues) if need_spectrum else None
    threshold = 2.0 + config.delta
    norm = max(abs(out.lambda_max), abs(out.lambda_min))
    flag = (norm if flag_on_norm else out.lambda_max) > threshold
    wall = (time.perf_counter() - t0) * 1e3
    row = Row(
        n=n,
        d=profile.params.get("d"),
        trial=trial,
        sigma_star=profile.sigma_star,
        sigma_sqrtlog=profile.sigma_star * math.sqrt(math.log(n)) if n > 1 else 0.0,
        lambda_max=out.lambda_max,
        lambda_min=out.lambda_min,
        ks=ks,
        outlier_flag=bool(flag),
        seed=seed,
        wall_ms=wall,
    )
    if out.block_norms is not None:
        row.blocks = out.block_norms.size
        row.block_exceedances = int(np.count_nonzero(out.block_norms > threshold))
    return row, out.eigenvalues


def _run(config: SweepConfig, need_spectrum: bool, flag_on_norm: bool = False, keep=None):
    """Evaluate every (n, trial) point; results come back in (n, trial) order
    whatever the thread count."""
    tasks = []
    for n in config.n_list:
        profile = build_profile(config, n)
        tasks.extend((profile, t) for t in range(config.trials))

    def work(task):
        profile, t = task
        row, eig = evaluate_point(config, profile, t, need_spectrum, flag_on_norm)
        return row, (keep(eig) if keep is not None and eig is not None else None)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    return results


def _per_n(rows: list[Row], fn) -> dict:
    out = {}
    for n in sorted({r.n for r in rows}):
        out[n] = fn([r for r in rows if r.n == n])
    return out


def run_bulk_convergence(config: SweepConfig) -> SweepResult:
    results = _run(config, need_spectrum=True)
    rows = [r for r, _ in results]
    medians = _per_n(rows, lambda rs: float(np.median([r.ks for r in rs])))
    seq = [medians[n] for n in config.n_list]
    summary = {
        "median_ks": medians,
        "ks_decreasing": all(b < a for a, b in zip(seq, seq[1:])),
    }
    return SweepResult(config, "bulk", rows, summary)


def run_absence_sweep(config: SweepConfig) -> SweepResult:
    results = _run(config, need_spectrum=config.method == "dense")
    rows = [r for r, _ in results]
    frac = _per_n(rows, lambda rs: sum(r.outlier_flag for r in rs) / len(rs))
    summary = {
        "outlier_fraction": frac,
        "median_lambda_max": _per_n(rows, lambda rs: float(np.median([r.lambda_max for r in rs]))),
        "degree": {n: resolve_degree(config, n) for n in config.n_list},
    }
    return SweepResult(config, "absence", rows, summary)


def run_presence_experiment(config: SweepConfig) -> SweepResult:
    """Block-max experiment on clique unions. A trial is flagged when the
    spectral norm max_i ||block_i|| exceeds 2 + delta."""
    if config.profile != "clique":
        raise ValueError("the presence experiment needs the clique profile")
    results = _run(config, need_spectrum=False, flag_on_norm=True)
    rows = [r for r, _ in results]
    freq = _per_n(rows, lambda rs: sum(r.outlier_flag for r in rs) / len(rs))

    def exceed(rs):
        hits = sum(r.block_exceedances for r in rs)
        total = sum(r.blocks for r in rs)
        rate = hits / total
        d = rs[0].d
        out = {"exceedances": hits, "blocks": total, "rate": rate,
               "log_rate": math.log(rate) if rate > 0 else -math.inf}
        if config.epsilon is not None:
            out["minus_epsilon_d"] = -config.epsilon * d
        return out

    summary = {"outlier_frequency": freq, "per_block": _per_n(rows, exceed)}
    return SweepResult(config, "presence", rows, summary)


@dataclass(frozen=True)
class BlockTailOracle:
    d: int
    dist: str
    level: float
    samples: int
    quantile: float

    @property
    def delta(self) -> float:
        return self.quantile - 2.0


def block_tail_oracle(
    d: int,
    dist: EntryDistribution | str,
    level: float = 1 - 1e-3,
    samples: int = 10**6,
    master_seed: int = 0,
    batch: int = 100_000,
) -> BlockTailOracle:
    """Empirical ``level`` quantile of ||block|| over ``samples`` iid hollow
    (d+1)x(d+1) blocks scaled by 1/sqrt(d); delta = quantile - 2."""
    if isinstance(dist, str):
        dist = parse_distribution(dist)
    # a seed stream of its own, disjoint from every sweep trial
    seed = point_seed(master_seed, samples, ORACLE_SLOT)
    norms = np.empty(samples)
    for start in range(0, samples, batch):
        stop = min(samples, start + batch)
        blocks = sample_clique_blocks(d, samples, dist, seed, 0, start, stop)
        norms[start:stop] = eigen.block_norms(blocks)
    return BlockTailOracle(d, dist.name, level, samples, float(np.quantile(norms, level)))


@dataclass(frozen=True)
class MomentRow:
    n: int
    length: int
    mc_mean: float
    mc_se: float
    exact: Fraction | float | None
    catalan: int
    trials: int

    @property
    def z_score(self) -> float | None:
        if self.exact is None or self.mc_se == 0:
            return None
        return (self.mc_mean - float(self.exact)) / self.mc_se


def run_moment_convergence(config: SweepConfig, lengths=(2, 4, 6)) -> list[MomentRow]:
    """Monte-Carlo (1/n) sum lambda^{2k} against the exact clique local moment
    (clique profiles) and the Catalan number."""
    if any(L % 2 or L > 8 for L in lengths):
        raise ValueError(f"lengths must be even and at most 8, got {lengths}")

    def powers(eig):
        return np.array([np.mean(eig**L) for L in lengths])

    results = _run(config, need_spectrum=True, keep=powers)
    dist = config.distribution
    table = []
    for n in config.n_list:
        vals = np.array([p for r, p in results if r.n == n])
        d = resolve_degree(config, n)
        for i, L in enumerate(lengths):
            col = vals[:, i]
            se = float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else math.nan
            exact = None
            if config.profile == "clique":
                exact = walks.local_moment(walks.clique(d), L, dist)
            table.append(
                MomentRow(n, L, float(col.mean()), se, exact, semicircle.moment(L), col.size)
            )
    return table


def write_moment_table(table: list[MomentRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "length", "mc_mean", "mc_se", "exact", "catalan", "trials"])
        for r in table:
            exact = r.exact
            if isinstance(exact, Fraction):
                exact = f"{exact.numerator}/{exact.denominator}"
            elif exact is not None:
                exact = _fmt(exact)
            writer.writerow(
                [r.n, r.length, _fmt(r.mc_mean), _fmt(r.mc_se), exact or "", r.catalan, r.trials]
            )


EXPERIMENTS = {
    "bulk": run_bulk_convergence,
    "absence": run_absence_sweep,
    "presence": run_presence_experiment,
}
