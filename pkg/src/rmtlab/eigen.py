"""Symmetric eigensolver: dense Householder + implicit QL, Lanczos with full
reorthogonalization for the extreme eigenvalues, and batched block spectra."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import NoConvergence

MAX_QL_SWEEPS = 50
LANCZOS_TOL = 1e-9
LANCZOS_MAX_ITER = 300


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray = field(repr=False)
    method: str = "dense"
    residual_bound: float | None = None

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def norm(self) -> float:
        if self.eigenvalues.size == 0:
            return 0.0
        return max(abs(self.lambda_max), abs(self.lambda_min))

    def __len__(self) -> int:
        return self.eigenvalues.size

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "eigenvalue"])
            for i, lam in enumerate(self.eigenvalues.tolist()):
                writer.writerow([i, format(lam, ".17g")])


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    mass: np.ndarray
    below: float
    above: float

    @property
    def outside(self) -> float:
        return self.below + self.above

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_left", "bin_right", "mass"])
            for a, b, m in zip(self.edges[:-1], self.edges[1:], self.mass):
                writer.writerow([format(a, ".17g"), format(b, ".17g"), format(m, ".17g")])


def _as_array(matrix) -> np.ndarray:
    values = getattr(matrix, "values", matrix)
    return np.asarray(values, dtype=float)


def _sorted_desc(values: np.ndarray) -> np.ndarray:
    out = values[np.argsort(-values, kind="stable")]
    out.setflags(write=False)
    return out


def eig_sym(matrix) -> Spectrum:
    """All eigenvalues of a symmetric matrix, sorted descending."""
    a = np.array(_as_array(matrix), dtype=np.float64, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return Spectrum(np.empty(0))
    d, e = _kernels.tridiagonalize(a)
    if not _kernels.ql_implicit(d, e, MAX_QL_SWEEPS):
        raise NoConvergence(f"QL iteration exceeded {MAX_QL_SWEEPS} sweeps")
    return Spectrum(_sorted_desc(d), "dense")


def tridiagonal_eigvals(diag, off) -> np.ndarray:
    d = np.array(diag, dtype=np.float64)
    if not _kernels.ql_implicit(d, np.asarray(off, dtype=np.float64), MAX_QL_SWEEPS):
        raise NoConvergence("QL iteration on tridiagonal did not converge")
    return np.sort(d)


@dataclass(frozen=True)
class LanczosResult:
    lambda_max: float
    lambda_min: float
    iterations: int


def lanczos_extremes(
    matrix,
    tol: float = LANCZOS_TOL,
    max_iter: int = LANCZOS_MAX_ITER,
    seed: int = 0,
) -> LanczosResult:
    """Extreme eigenvalues from matrix-vector products only.

    ``matrix`` is anything supporting ``@`` with a vector (dense array,
    scipy sparse matrix, MatrixSample values). Stops once both extreme Ritz
    values move by less than ``tol`` in one step.
    """
    a = getattr(matrix, "values", matrix)
    n = a.shape[0]
    if n == 0:
        return LanczosResult(0.0, 0.0, 0)
    q = np.random.default_rng(seed).standard_normal(n)
    q /= np.linalg.norm(q)
    basis = np.empty((min(max_iter, n) + 1, n))
    basis[0] = q
    alphas: list[float] = []
    betas: list[float] = []
    prev = None
    for k in range(min(max_iter, n)):
        w = a @ basis[k]
        alphas.append(float(basis[k] @ w))
        # two passes of classical Gram-Schmidt against every Lanczos vector
        for _ in range(2):
            w -= basis[: k + 1].T @ (basis[: k + 1] @ w)
        ritz = tridiagonal_eigvals(alphas, betas)
        cur = (ritz[-1], ritz[0])
        beta = float(np.linalg.norm(w))
        scale = max(abs(cur[0]), abs(cur[1]), 1e-300)
        done = (
            k + 1 == n
            or beta <= 1e-13 * scale
            or (prev is not None and abs(cur[0] - prev[0]) < tol and abs(cur[1] - prev[1]) < tol)
        )
        if done:
            return LanczosResult(float(cur[0]), float(cur[1]), k + 1)
        prev = cur
        betas.append(beta)
        basis[k + 1] = w / beta
    raise NoConvergence(f"Lanczos did not converge in {max_iter} iterations")


def spectral_norm(matrix, mode: str = "dense") -> float:
    if mode == "dense":
        return eig_sym(matrix).norm
    if mode == "lanczos":
        res = lanczos_extremes(matrix)
        return max(abs(res.lambda_max), abs(res.lambda_min))
    raise ValueError(f"unknown mode {mode!r}")


def block_spectra(blocks) -> np.ndarray:
    """Eigenvalues of every block of a (B, m, m) stack, each row descending."""
    stack = np.ascontiguousarray(getattr(blocks, "blocks", blocks), dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError(f"expected a (B, m, m) stack, got {stack.shape}")
    vals = _kernels.block_eigvals(stack, MAX_QL_SWEEPS)
    if np.isnan(vals[:, 0]).any():
        raise NoConvergence("QL iteration failed on a block")
    return vals[:, ::-1]


def block_norms(blocks) -> np.ndarray:
    vals = block_spectra(blocks)
    return np.maximum(np.abs(vals[:, 0]), np.abs(vals[:, -1]))


def esd_histogram(spectrum: Spectrum | np.ndarray, bins: int, range: tuple[float, float]) -> Histogram:  # noqa: A002
    """Histogram of the ESD: bin masses sum to the fraction of eigenvalues
    inside ``range``; the rest is reported as ``below``/``above``."""
    a, b = range
    if bins < 1 or not a < b:
        raise ValueError(f"need bins >= 1 and a < b, got {bins}, {range}")
    lam = np.asarray(getattr(spectrum, "eigenvalues", spectrum), dtype=float)
    edges = np.linspace(a, b, bins + 1)
    n = lam.size
    if n == 0:
        return Histogram(edges, np.zeros(bins), 0.0, 0.0)
    counts, _ = np.histogram(lam, bins=edges)
    return Histogram(
        edges,
        counts / n,
        float(np.count_nonzero(lam < a)) / n,
        float(np.count_nonzero(lam > b)) / n,
    )


def verify_residuals(matrix, spectrum: Spectrum, iterations: int = 3) -> Spectrum:
    """Recompute an eigenvector for every eigenvalue by inverse iteration and
    attach max ||X v - lambda v||_2 as ``residual_bound``."""
    x = _as_array(matrix)
    n = x.shape[0]
    scale = max(spectrum.norm, 1e-300)
    rng = np.random.default_rng(1)
    worst = 0.0
    for lam in spectrum.eigenvalues:
        shift = lam + 1e-10 * scale
        lu = scipy.linalg.lu_factor(x - shift * np.eye(n), check_finite=False)
        v = rng.standard_normal(n)
        for _ in range(iterations):
            v = scipy.linalg.lu_solve(lu, v, check_finite=False)
            v /= np.linalg.norm(v)
        worst = max(worst, float(np.linalg.norm(x @ v - lam * v)))
    return Spectrum(spectrum.eigenvalues, spectrum.method, worst)
