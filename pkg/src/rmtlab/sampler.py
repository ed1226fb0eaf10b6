"""Realizations X = Sigma o W with a parallelism-independent seeding contract.

Support entries on and above the diagonal are ranked in row-major order
(see ``VarianceProfile.upper_support``). Ranks are grouped into fixed runs of
``CHUNK`` entries; run ``c`` draws from ``derive_stream(seed, trial, c)``.
Any worker split that respects run boundaries reproduces the same matrix, so
the thread count never changes a single bit of output.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entries import EntryDistribution
from .errors import InvalidProfile
from .profiles import VarianceProfile, validate

CHUNK = 1 << 16


def derive_stream(master_seed: int, trial_index: int, entry_index: int) -> np.random.Generator:
    """Counter-based generator keyed by the triple; a pure function of it."""
    seq = np.random.SeedSequence([int(master_seed), int(trial_index), int(entry_index)])
    return np.random.Generator(np.random.Philox(seq))


def draw_ranks(
    dist: EntryDistribution,
    master_seed: int,
    trial_index: int,
    total: int,
    lo: int = 0,
    hi: int | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Draws for entry ranks [lo, hi) out of ``total`` ranked entries."""
    hi = total if hi is None else hi
    if not 0 <= lo <= hi <= total:
        raise ValueError(f"bad rank range [{lo}, {hi}) of {total}")
    first = lo // CHUNK
    last = (hi - 1) // CHUNK if hi > lo else first - 1
    out = np.empty(hi - lo)

    def fill(c: int) -> None:
        start = c * CHUNK
        size = min(CHUNK, total - start)
        vals = dist.sample(derive_stream(master_seed, trial_index, c), size)
        a, b = max(start, lo), min(start + size, hi)
        out[a - lo : b - lo] = vals[a - start : b - start]

    chunks = range(first, last + 1)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, chunks))
    else:
        for c in chunks:
            fill(c)
    return out


@dataclass(frozen=True, eq=False)
class MatrixSample:
    n: int
    values: np.ndarray = field(repr=False)
    profile_ref: dict
    dist_ref: str
    master_seed: int
    trial_index: int


@dataclass(frozen=True, eq=False)
class BlockSample:
    """Diagonal blocks of a block-diagonal sample, shape (num_blocks, m, m)."""

    blocks: np.ndarray = field(repr=False)
    first_block: int
    profile_ref: dict
    dist_ref: str
    master_seed: int
    trial_index: int


def _check(profile: VarianceProfile) -> None:
    report = validate(profile)
    if not report.passed:
        raise InvalidProfile("; ".join(report.failures()))


def sample_matrix(
    profile: VarianceProfile,
    dist: EntryDistribution,
    master_seed: int,
    trial_index: int = 0,
    threads: int = 1,
) -> MatrixSample:
    _check(profile)
    rows, cols, sig = profile.upper_support
    w = draw_ranks(dist, master_seed, trial_index, rows.size, threads=threads)
    x = np.zeros((profile.n, profile.n))
    vals = sig * w
    x[rows, cols] = vals
    x[cols, rows] = vals
    x.setflags(write=False)
    return MatrixSample(
        n=profile.n,
        values=x,
        profile_ref=profile.to_json(),
        dist_ref=dist.name,
        master_seed=int(master_seed),
        trial_index=int(trial_index),
    )


def sample_clique_blocks(
    d: int,
    num_blocks: int,
    dist: EntryDistribution,
    master_seed: int,
    trial_index: int = 0,
    start: int = 0,
    stop: int | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Blocks [start, stop) of a union of ``num_blocks`` hollow (d+1)-cliques
    scaled by 1/sqrt(d), without building the profile."""
    m = d + 1
    stop = num_blocks if stop is None else stop
    per = m * (m - 1) // 2
    w = draw_ranks(
        dist, master_seed, trial_index, num_blocks * per, start * per, stop * per, threads=threads
    )
    r, c = np.triu_indices(m, 1)
    blocks = np.zeros((stop - start, m, m))
    vals = w.reshape(stop - start, per) * (1.0 / np.sqrt(d))
    blocks[:, r, c] = vals
    blocks[:, c, r] = vals
    return blocks


def sample_blocks(
    profile: VarianceProfile,
    dist: EntryDistribution,
    master_seed: int,
    trial_index: int = 0,
    start: int = 0,
    stop: int | None = None,
    threads: int = 1,
) -> BlockSample:
    """Blocks [start, stop) of a clique-union sample, identical to the
    corresponding diagonal blocks of ``sample_matrix`` on the same inputs."""
    if profile.kind != "clique_union":
        raise InvalidProfile(f"block view needs a clique_union profile, got {profile.kind}")
    blocks = sample_clique_blocks(
        profile.params["d"], profile.num_blocks, dist, master_seed, trial_index,
        start, stop, threads,
    )
    return BlockSample(
        blocks=blocks,
        first_block=start,
        profile_ref=profile.to_json(),
        dist_ref=dist.name,
        master_seed=int(master_seed),
        trial_index=int(trial_index),
    )


def write_dense_csv(sample: MatrixSample, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in sample.values:
            writer.writerow([format(v, ".17g") for v in row])


def write_triplets_csv(sample: MatrixSample, path) -> None:
    """Nonzero entries as (i, j, value), both triangles."""
    i, j = np.nonzero(sample.values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        for a, b in zip(i.tolist(), j.tolist()):
            writer.writerow([a, b, format(sample.values[a, b], ".17g")])


def read_matrix_csv(path) -> np.ndarray:
    """Dense CSV or (i, j, value) triplets with a header row."""
    with open(path) as fh:
        head = fh.readline().strip()
    if head.replace(" ", "") == "i,j,value":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = int(data[:, :2].max()) + 1 if data.size else 0
        x = np.zeros((n, n))
        x[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
        return x
    return np.loadtxt(path, delimiter=",", ndmin=2)
