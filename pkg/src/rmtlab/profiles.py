"""Variance profiles: symmetric matrices of entry standard deviations whose
squares are doubly stochastic.

Structured profiles (full, clique union, band, random regular) keep a sparse
representation so that large block-diagonal profiles never need an n x n
dense array; ``entries`` materializes one on request.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    GenerationFailure,
    InvalidBandwidth,
    InvalidDegree,
)

TOLERANCE = 1e-12
KINDS = ("full", "clique_union", "band", "random_regular", "custom")


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    n: int
    kind: str
    sigma_star: float
    includes_diagonal: bool
    matrix: np.ndarray | sp.csr_array = field(repr=False)
    params: dict = field(default_factory=dict)
    # common value of sigma_ij^2 on the support, when there is one
    level: Fraction | None = None

    @cached_property
    def entries(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            dense = self.matrix.toarray()
        else:
            dense = np.array(self.matrix, dtype=float)
        dense.setflags(write=False)
        return dense

    @property
    def block_size(self) -> int | None:
        """Size of the diagonal blocks for clique-union profiles."""
        if self.kind == "clique_union":
            return self.params["d"] + 1
        return None

    @property
    def num_blocks(self) -> int | None:
        m = self.block_size
        return None if m is None else self.n // m

    @cached_property
    def upper_support(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, sigma) of the support on and above the diagonal,
        in row-major order. The position in these arrays is the entry rank
        used by the sampler."""
        if self.kind == "clique_union":
            m = self.block_size
            r, c = np.triu_indices(m, 1)
            offsets = np.repeat(np.arange(self.num_blocks, dtype=np.int64) * m, r.size)
            rows = np.tile(r, self.num_blocks) + offsets
            cols = np.tile(c, self.num_blocks) + offsets
            vals = np.full(rows.size, 1.0 / math.sqrt(self.params["d"]))
        elif self.kind == "full":
            rows, cols = np.triu_indices(self.n, 0)
            vals = np.full(rows.size, 1.0 / math.sqrt(self.n))
        else:
            upper = sp.triu(sp.csr_array(self.matrix), k=0, format="coo")
            order = np.lexsort((upper.col, upper.row))
            rows = upper.row[order].astype(np.int64)
            cols = upper.col[order].astype(np.int64)
            vals = upper.data[order].astype(float)
            keep = vals > 0
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        for arr in (rows, cols, vals):
            arr.setflags(write=False)
        return rows, cols, vals

    def neighbors(self) -> list[np.ndarray]:
        """Support adjacency lists (self-loops included when the diagonal is)."""
        rows, cols, _ = self.upper_support
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in zip(rows.tolist(), cols.tolist()):
            out[i].append(j)
            if i != j:
                out[j].append(i)
        return [np.array(sorted(nb), dtype=np.int64) for nb in out]

    def sigma(self, i: int, j: int) -> float:
        if sp.issparse(self.matrix):
            return float(self.matrix[i, j])
        return float(self.matrix[i, j])

    def sigma_sq_exact(self, i: int, j: int) -> Fraction | float:
        """sigma_ij^2, as an exact fraction when the profile has a common level."""
        s = self.sigma(i, j)
        if s == 0.0:
            return Fraction(0)
        if self.level is not None:
            return self.level
        return s * s

    def to_json(self) -> dict:
        doc = {"n": self.n, "kind": self.kind, "includes_diagonal": self.includes_diagonal}
        for key in ("d", "w", "seed"):
            if key in self.params:
                doc[key] = self.params[key]
        return doc


@dataclass(frozen=True)
class RegularGraph:
    n: int
    d: int
    adjacency: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ValidationReport:
    max_row_deviation: float
    max_col_deviation: float
    asymmetry: float
    min_entry: float
    sigma_star_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        tol = self.tolerance
        return (
            self.max_row_deviation <= tol
            and self.max_col_deviation <= tol
            and self.asymmetry <= tol
            and self.min_entry >= 0.0
            and self.sigma_star_error <= tol
            and math.isfinite(self.max_row_deviation)
        )

    def failures(self) -> list[str]:
        tol = self.tolerance
        out = []
        if not self.max_row_deviation <= tol:
            out.append(f"row sums of squares deviate from 1 by {self.max_row_deviation:.3g}")
        if not self.max_col_deviation <= tol:
            out.append(f"column sums of squares deviate from 1 by {self.max_col_deviation:.3g}")
        if not self.asymmetry <= tol:
            out.append(f"asymmetry {self.asymmetry:.3g}")
        if self.min_entry < 0.0:
            out.append(f"negative entry {self.min_entry:.3g}")
        if not self.sigma_star_error <= tol:
            out.append(f"sigma_star off by {self.sigma_star_error:.3g}")
        return out


def full_wigner_profile(n: int) -> VarianceProfile:
    if n < 1:
        raise DimensionMismatch(f"n must be positive, got {n}")
    value = 1.0 / math.sqrt(n)
    return VarianceProfile(
        n=n,
        kind="full",
        sigma_star=value,
        includes_diagonal=True,
        matrix=np.full((n, n), value),
        level=Fraction(1, n),
    )


def _hollow_blocks(n: int, m: int, value: float) -> sp.csr_array:
    block = np.full((m, m), value)
    np.fill_diagonal(block, 0.0)
    return sp.csr_array(sp.block_diag([block] * (n // m), format="csr"))


def clique_union_profile(n: int, d: int) -> VarianceProfile:
    """Disjoint union of n/(d+1) cliques K_{d+1}, entries 1/sqrt(d), zero diagonal."""
    if d < 2:
        raise InvalidDegree(f"clique degree must be at least 2, got {d}")
    if n < 1 or n % (d + 1):
        raise DimensionMismatch(f"block size {d + 1} does not divide n={n}")
    value = 1.0 / math.sqrt(d)
    return VarianceProfile(
        n=n,
        kind="clique_union",
        sigma_star=value,
        includes_diagonal=False,
        matrix=_hollow_blocks(n, d + 1, value),
        params={"d": d},
        level=Fraction(1, d),
    )


def band_profile(n: int, w: int) -> VarianceProfile:
    """Circular band: sigma_ij = 1/sqrt(2w) when 0 < dist(i, j) <= w (mod n)."""
    if w < 1 or 2 * w > n - 1:
        raise InvalidBandwidth(f"need 1 <= w <= (n-1)/2, got n={n}, w={w}")
    idx = np.arange(n)
    gap = np.abs(idx[:, None] - idx[None, :])
    circ = np.minimum(gap, n - gap)
    value = 1.0 / math.sqrt(2 * w)
    mat = np.where((circ > 0) & (circ <= w), value, 0.0)
    return VarianceProfile(
        n=n,
        kind="band",
        sigma_star=value,
        includes_diagonal=False,
        matrix=sp.csr_array(mat),
        params={"w": w},
        level=Fraction(1, 2 * w),
    )


def _pairing(n: int, d: int, rng: np.random.Generator, max_restarts: int) -> np.ndarray | None:
    points = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(max_restarts):
        pairs = rng.permutation(points).reshape(-1, 2)
        lo = pairs.min(axis=1)
        hi = pairs.max(axis=1)
        if np.any(lo == hi):
            continue
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            continue
        return np.stack([lo, hi], axis=1)
    return None


def _suitable(edges: set, stubs: list[int]) -> bool:
    """Whether some pair of remaining stubs could still be joined."""
    verts = sorted(set(stubs))
    for i, u in enumerate(verts):
        for v in verts[i + 1 :]:
            if (u, v) not in edges:
                return True
    return False


def _sequential(n: int, d: int, rng: np.random.Generator, max_restarts: int) -> np.ndarray | None:
    """Steger-Wormald: join random stub pairs that keep the graph simple."""
    for _ in range(max_restarts):
        edges: set[tuple[int, int]] = set()
        stubs = np.repeat(np.arange(n, dtype=np.int64), d).tolist()
        while stubs:
            order = rng.permutation(len(stubs))
            shuffled = [stubs[i] for i in order]
            leftover = []
            for u, v in zip(shuffled[::2], shuffled[1::2]):
                a, b = (u, v) if u < v else (v, u)
                if a == b or (a, b) in edges:
                    leftover += [u, v]
                else:
                    edges.add((a, b))
            if leftover and not _suitable(edges, leftover):
                break
            stubs = leftover
        else:
            return np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return None


def pairing_acceptance(d: int) -> float:
    """Asymptotic probability that a uniform pairing is simple."""
    return math.exp((1 - d * d) / 4)


def random_regular_graph(
    n: int, d: int, seed: int, max_restarts: int = 1000, method: str = "auto"
) -> RegularGraph:
    """Simple d-regular graph on n vertices.

    ``pairing`` draws uniform pairings until one is simple, which is exactly
    uniform but needs about exp((d^2 - 1)/4) attempts. ``sequential`` is the
    Steger-Wormald procedure (asymptotically uniform for d = o(n^{1/28})).
    ``auto`` uses pairing when fewer than ``max_restarts / 10`` attempts are
    expected and sequential otherwise.
    """
    if (n * d) % 2:
        raise DimensionMismatch(f"n*d must be even, got n={n}, d={d}")
    if not 1 <= d < n:
        raise InvalidDegree(f"need 1 <= d < n, got n={n}, d={d}")
    if method == "auto":
        method = "pairing" if pairing_acceptance(d) * max_restarts >= 10 else "sequential"
    rng = np.random.default_rng(seed)
    if method == "pairing":
        edges = _pairing(n, d, rng, max_restarts)
    elif method == "sequential":
        edges = _sequential(n, d, rng, max_restarts)
    else:
        raise ValueError(f"unknown method {method!r}")
    if edges is None:
        raise GenerationFailure(
            f"no simple {d}-regular graph on {n} vertices after {max_restarts} {method} attempts"
        )
    adj = np.zeros((n, n), dtype=np.uint8)
    adj[edges[:, 0], edges[:, 1]] = 1
    adj[edges[:, 1], edges[:, 0]] = 1
    return RegularGraph(n=n, d=d, adjacency=adj)


def random_regular_profile(
    n: int, d: int, seed: int, max_restarts: int = 1000, method: str = "auto"
) -> VarianceProfile:
    graph = random_regular_graph(n, d, seed, max_restarts, method)
    value = 1.0 / math.sqrt(d)
    return VarianceProfile(
        n=n,
        kind="random_regular",
        sigma_star=value,
        includes_diagonal=False,
        matrix=sp.csr_array(graph.adjacency * value),
        params={"d": d, "seed": seed},
        level=Fraction(1, d),
    )


def custom_profile(entries, includes_diagonal: bool | None = None) -> VarianceProfile:
    """Wrap an arbitrary matrix. No validation happens here; call validate()."""
    mat = np.array(entries, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"profile must be square, got shape {mat.shape}")
    if includes_diagonal is None:
        includes_diagonal = bool(np.any(np.diag(mat) != 0))
    return VarianceProfile(
        n=mat.shape[0],
        kind="custom",
        sigma_star=float(mat.max()) if mat.size else 0.0,
        includes_diagonal=includes_diagonal,
        matrix=mat,
    )


def validate(profile: VarianceProfile, tolerance: float = TOLERANCE) -> ValidationReport:
    mat = profile.matrix
    if sp.issparse(mat):
        mat = sp.csr_array(mat)
        sq = mat.multiply(mat)
        row = np.asarray(sq.sum(axis=1)).ravel()
        col = np.asarray(sq.sum(axis=0)).ravel()
        diff = mat - mat.T
        asym = float(abs(diff).max()) if diff.nnz else 0.0
        lo = float(min(mat.min(), 0.0)) if mat.nnz else 0.0
        hi = float(mat.max()) if mat.nnz else 0.0
    else:
        mat = np.asarray(mat, dtype=float)
        sq = mat * mat
        row = sq.sum(axis=1)
        col = sq.sum(axis=0)
        asym = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
        lo = float(mat.min()) if mat.size else 0.0
        hi = float(mat.max()) if mat.size else 0.0
    return ValidationReport(
        max_row_deviation=float(np.max(np.abs(row - 1.0))) if row.size else math.inf,
        max_col_deviation=float(np.max(np.abs(col - 1.0))) if col.size else math.inf,
        asymmetry=asym,
        min_entry=lo,
        sigma_star_error=abs(hi - profile.sigma_star),
        tolerance=tolerance,
    )


def profile_from_json(doc: dict) -> VarianceProfile:
    kind = doc["kind"]
    n = int(doc["n"])
    if kind == "full":
        return full_wigner_profile(n)
    if kind == "clique_union":
        return clique_union_profile(n, int(doc["d"]))
    if kind == "band":
        return band_profile(n, int(doc["w"]))
    if kind == "random_regular":
        return random_regular_profile(n, int(doc["d"]), int(doc["seed"]))
    raise ValueError(f"cannot rebuild a {kind!r} profile from JSON alone")


def save_profile(profile: VarianceProfile, json_path, csv_path=None) -> None:
    Path(json_path).write_text(json.dumps(profile.to_json(), indent=2) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in profile.entries:
                writer.writerow([format(x, ".17g") for x in row])


def load_profile_csv(path) -> VarianceProfile:
    return custom_profile(np.loadtxt(path, delimiter=",", ndmin=2))
