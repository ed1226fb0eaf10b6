"""Exact expected spectral moments by closed-walk enumeration.

Two independent routes:

* rooted graphs (clique, truncated regular tree, explicit adjacency): every
  closed walk of length 2k from the root is enumerated and its edge
  multiplicities q(e) recorded, giving
  m((G, o), 2k, xi) = d^{-k} * sum_walks prod_e E xi^{q(e)};
* variance profiles: closed walks in [n]^{2k} are grouped by shape (vertices
  relabelled by first appearance) and each shape is summed over injective
  labellings of the profile's support.

Moments of Gaussian, Rademacher and uniform entries are rational, so both
routes return ``Fraction`` values for them and golden values match exactly.
"""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .entries import EntryDistribution
from .errors import BoundViolated, BudgetExceeded, InvalidProfile, LengthOdd
from .profiles import VarianceProfile, validate

WALK_BUDGET = 10**8
MAX_WALK_LENGTH = 12
MAX_TRACE_N = 12
MAX_TRACE_LENGTH = 8


@dataclass(frozen=True, eq=False)
class RootedGraph:
    kind: str
    params: dict
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    root: int = 0

    @property
    def num_vertices(self) -> int:
        return len(self.neighbors)

    @property
    def degree(self) -> int:
        """Normalization d in m((G, o), 2k, xi): the root degree."""
        return len(self.neighbors[self.root])

    @property
    def label(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}({args})"

    def adjacency(self) -> sp.csr_array:
        rows = [i for i, nb in enumerate(self.neighbors) for _ in nb]
        cols = [j for nb in self.neighbors for j in nb]
        n = self.num_vertices
        return sp.csr_array((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    def distances(self) -> list[int]:
        dist = [-1] * self.num_vertices
        dist[self.root] = 0
        queue = deque([self.root])
        while queue:
            v = queue.popleft()
            for w in self.neighbors[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        return dist


def clique(d: int) -> RootedGraph:
    """Complete graph on d + 1 vertices, no self-loops, rooted at 0."""
    if d < 1:
        raise ValueError(f"clique degree must be positive, got {d}")
    nbrs = tuple(tuple(j for j in range(d + 1) if j != i) for i in range(d + 1))
    return RootedGraph("clique", {"d": d}, nbrs)


def truncated_tree(d: int, depth: int) -> RootedGraph:
    """d-regular tree cut at ``depth``: the root has d children, every other
    internal vertex d - 1."""
    if d < 1 or depth < 0:
        raise ValueError(f"need d >= 1 and depth >= 0, got {d}, {depth}")
    nbrs: list[list[int]] = [[]]
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for v in frontier:
            for _ in range(d if v == 0 else d - 1):
                child = len(nbrs)
                nbrs.append([v])
                nbrs[v].append(child)
                nxt.append(child)
        frontier = nxt
    return RootedGraph("tree", {"d": d, "depth": depth}, tuple(map(tuple, nbrs)))


def explicit(adjacency, root: int = 0) -> RootedGraph:
    """Graph from a symmetric 0/1 matrix; nonzero diagonal entries are loops."""
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
        raise ValueError("adjacency must be a symmetric square matrix")
    nbrs = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in a)
    return RootedGraph("explicit", {"n": a.shape[0]}, nbrs, root)


def canonical_shape(walk) -> tuple[int, ...]:
    """Relabel vertices by order of first appearance."""
    labels: dict[int, int] = {}
    return tuple(labels.setdefault(v, len(labels)) for v in walk)


def _multiplicities(shape, closed: bool = True) -> Counter:
    steps = len(shape) if closed else len(shape) - 1
    out: Counter = Counter()
    for t in range(steps):
        a, b = shape[t], shape[(t + 1) % len(shape)]
        out[(a, b) if a <= b else (b, a)] += 1
    return out


def _moment_product(profile: tuple[int, ...], dist: EntryDistribution):
    value = Fraction(1) if dist.exact else 1.0
    for q in profile:
        value *= dist.moment(q)
    return value


@dataclass(eq=False)
class WalkMomentReport:
    graph: str
    length: int
    degree: int
    total_walks: int
    even_walks: int
    profiles: dict[tuple[int, ...], int]
    shapes: dict[tuple[int, ...], int] = field(repr=False)
    moment_value: Fraction | float | None = None
    dist: str | None = None

    def to_json(self) -> dict:
        doc = {
            "graph": self.graph,
            "length": self.length,
            "total_walks": self.total_walks,
            "even_walks": self.even_walks,
            "moment_value": None,
            "shapes": [
                {"profile": list(p), "count": c} for p, c in sorted(self.profiles.items())
            ],
        }
        v = self.moment_value
        if isinstance(v, Fraction):
            doc["moment_value"] = {"num": v.numerator, "den": v.denominator}
        elif v is not None:
            doc["moment_value"] = float(v)
        if self.dist is not None:
            doc["dist"] = self.dist
        return doc


def closed_walk_count(graph: RootedGraph, length: int) -> float:
    """(A^length)_{oo} by repeated sparse products (floating point)."""
    a = graph.adjacency()
    v = np.zeros(graph.num_vertices)
    v[graph.root] = 1.0
    for _ in range(length):
        v = a @ v
    return float(v[graph.root])


def _check_length(length: int) -> None:
    if length % 2:
        raise LengthOdd(f"walk length must be even, got {length}")
    if length < 0 or length > MAX_WALK_LENGTH:
        raise BudgetExceeded(f"walk length must lie in [0, {MAX_WALK_LENGTH}], got {length}")


def enumerate_walks(graph: RootedGraph, length: int) -> WalkMomentReport:
    """All closed walks of ``length`` steps from the root, grouped by edge
    multiplicity profile and by canonical shape."""
    _check_length(length)
    # every visited prefix extends to a closed walk, so work <= length * count
    estimate = closed_walk_count(graph, length)
    if estimate > WALK_BUDGET:
        raise BudgetExceeded(f"{estimate:.3g} closed walks exceed the budget {WALK_BUDGET:.0e}")

    nbrs = graph.neighbors
    dist = graph.distances()
    edge_id: dict[tuple[int, int], int] = {}
    steps = []
    for v, nb in enumerate(nbrs):
        row = []
        for w in nb:
            key = (v, w) if v <= w else (w, v)
            row.append((w, edge_id.setdefault(key, len(edge_id))))
        steps.append(tuple(row))
    root = graph.root
    mult = [0] * len(edge_id)
    touched: list[int] = []
    walk = [root] * (length + 1)
    profiles: Counter = Counter()
    shapes: Counter = Counter()

    def rec(v: int, t: int) -> None:
        left = length - t
        if left == 0:
            if v == root:
                profiles[tuple(sorted((mult[e] for e in touched), reverse=True))] += 1
                shapes[canonical_shape(walk[:length])] += 1
            return
        for w, e in steps[v]:
            if dist[w] >= left:
                continue
            if mult[e] == 0:
                touched.append(e)
            mult[e] += 1
            walk[t + 1] = w
            rec(w, t + 1)
            mult[e] -= 1
            if mult[e] == 0:
                touched.pop()

    if length == 0:
        profiles[()] = 1
        shapes[(root,)] = 1
    else:
        rec(root, 0)
    total = sum(profiles.values())
    even = sum(c for p, c in profiles.items() if all(q % 2 == 0 for q in p))
    return WalkMomentReport(
        graph=graph.label,
        length=length,
        degree=graph.degree,
        total_walks=total,
        even_walks=even,
        profiles=dict(profiles),
        shapes=dict(shapes),
    )


def moment_report(graph: RootedGraph, length: int, dist: EntryDistribution) -> WalkMomentReport:
    report = enumerate_walks(graph, length)
    total = Fraction(0) if dist.exact else 0.0
    for prof, count in report.profiles.items():
        total += count * _moment_product(prof, dist)
    d = graph.degree
    scale = Fraction(1, d ** (length // 2)) if dist.exact else d ** -(length // 2)
    report.moment_value = total * scale
    report.dist = dist.name
    return report


def local_moment(graph: RootedGraph, length: int, dist: EntryDistribution):
    """m((G, o), 2k, xi), exact when the moments of xi are rational."""
    return moment_report(graph, length, dist).moment_value


def moment_gap(d: int, length: int, dist: EntryDistribution):
    """Clique minus tree local moment at degree d."""
    return local_moment(clique(d), length, dist) - local_moment(
        truncated_tree(d, length // 2), length, dist
    )


def tree_moment_limit(length: int, dist: EntryDistribution, degrees=(10, 20, 40)) -> float:
    """Richardson extrapolation in 1/d of the tree local moment; the degrees
    must double (h, h/2, h/4)."""
    d0, d1, d2 = degrees
    if d1 != 2 * d0 or d2 != 2 * d1:
        raise ValueError(f"degrees must double, got {degrees}")
    m = [float(local_moment(truncated_tree(d, length // 2), length, dist)) for d in degrees]
    r1 = [2 * m[1] - m[0], 2 * m[2] - m[1]]
    return (4 * r1[1] - r1[0]) / 3


def closed_shapes(length: int, loops: bool) -> list[tuple[int, ...]]:
    """Canonical closed shapes of ``length`` steps; ``loops`` allows a step
    from a vertex to itself."""
    out = []
    seq = [0] * length

    def rec(t: int, top: int) -> None:
        if t == length:
            if loops or seq[-1] != 0:
                out.append(tuple(seq))
            return
        for s in range(top + 2):
            if s == seq[t - 1] and not loops:
                continue
            seq[t] = s
            rec(t + 1, max(top, s))

    if length == 0:
        return [()]
    if length == 1:
        return [(0,)] if loops else []
    rec(1, 0)
    return out


@dataclass(frozen=True)
class _ShapePlan:
    shape: tuple[int, ...]
    num_vertices: int
    mult: dict
    # for each label j >= 1: the label it is first reached from, and the
    # edges (other label <= j, multiplicity) that close once j is placed
    anchor: tuple[int, ...]
    closing: tuple[tuple[tuple[int, int], ...], ...]


def _plan(shape: tuple[int, ...]) -> _ShapePlan:
    mult = _multiplicities(shape)
    m = max(shape) + 1
    anchor = [0] * m
    for t in range(1, len(shape)):
        s = shape[t]
        if s not in shape[:t]:
            anchor[s] = shape[t - 1]
    closing = []
    for j in range(m):
        closing.append(tuple((a, q) for (a, b), q in mult.items() if b == j))
    return _ShapePlan(shape, m, dict(mult), tuple(anchor), tuple(closing))


def _labelling_sum(plan: _ShapePlan, profile: VarianceProfile, nbrs, sq, exact: bool):
    """sum over injective labellings phi of prod_e sigma_{phi(e)}^{q(e)}.

    With a common level (exact), every valid labelling contributes
    level^{length/2}, so only labellings are counted."""
    m = plan.num_vertices
    phi = [0] * m
    used = set()
    acc = [0]

    def weight_of(j: int) -> float | None:
        w = 1.0
        for other, q in plan.closing[j]:
            s2 = sq(phi[j], phi[other])
            if s2 == 0.0:
                return None
            w *= s2 ** (q / 2)
        return w

    def rec(j: int, w: float) -> None:
        if j == m:
            acc[0] += 1 if exact else w
            return
        for cand in nbrs[phi[plan.anchor[j]]]:
            cand = int(cand)
            if cand in used:
                continue
            phi[j] = cand
            wj = weight_of(j)
            if wj is None:
                continue
            used.add(cand)
            rec(j + 1, w * wj)
            used.discard(cand)

    for start in range(profile.n):
        phi[0] = start
        w0 = weight_of(0)
        if w0 is None:
            continue
        used.add(start)
        rec(1, w0)
        used.discard(start)
    if exact:
        return acc[0] * profile.level ** (len(plan.shape) // 2)
    return acc[0]


def _profile_tools(profile: VarianceProfile):
    dense = profile.entries
    sq_mat = dense * dense
    nbrs = [np.flatnonzero(row) for row in dense]

    def sq(i: int, j: int) -> float:
        return sq_mat[i, j]

    return nbrs, sq


def expected_trace_moment(profile: VarianceProfile, dist: EntryDistribution, length: int):
    """(1/n) E tr X^length for X = Sigma o W, by exhaustive shape enumeration.

    Feasible for n <= 12 and length <= 8; exact when the profile has a
    common level and the moments of xi are rational.
    """
    if profile.n > MAX_TRACE_N or length > MAX_TRACE_LENGTH or length < 0:
        raise BudgetExceeded(
            f"trace oracle needs n <= {MAX_TRACE_N} and length <= {MAX_TRACE_LENGTH}"
        )
    if length == 0:
        return Fraction(1) if dist.exact else 1.0
    exact = dist.exact and profile.level is not None
    nbrs, sq = _profile_tools(profile)
    total = Fraction(0) if exact else 0.0
    for shape in closed_shapes(length, profile.includes_diagonal):
        mult = _multiplicities(shape)
        qs = tuple(mult.values())
        # centered entries: a single traversal kills the term
        if min(qs, default=2) < 2:
            continue
        coeff = _moment_product(qs, dist)
        if coeff == 0:
            continue
        plan = _plan(shape)
        # odd multiplicities make sigma^q irrational; take the float route
        shape_exact = exact and all(q % 2 == 0 for q in qs)
        s = _labelling_sum(plan, profile, nbrs, sq, shape_exact)
        if exact and not shape_exact:
            total = float(total)
            exact = False
        total += s * coeff
    return total / profile.n


@dataclass(frozen=True)
class ShapeBound:
    shape: tuple[int, ...]
    num_vertices: int
    shape_sum: Fraction | float
    bound: Fraction | float
    ratio: Fraction | float


@dataclass(frozen=True)
class BoundReport:
    length: int
    shapes: tuple[ShapeBound, ...]

    @property
    def worst_ratio(self):
        return max((s.ratio for s in self.shapes), default=0)

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= 1


def shape_sum_bound_check(profile: VarianceProfile, length: int, max_n: int = 10) -> BoundReport:
    """For every even shape s with m vertices, check
    sum_{u of shape s} sigma_u <= n * sigma_*^{length - 2(m - 1)}."""
    report = validate(profile)
    if not report.passed:
        raise InvalidProfile("; ".join(report.failures()))
    if profile.n > max_n or length > MAX_TRACE_LENGTH or length % 2:
        raise BudgetExceeded(f"need n <= {max_n} and even length <= {MAX_TRACE_LENGTH}")
    exact = profile.level is not None
    star_sq = profile.level if exact else profile.sigma_star**2
    nbrs, sq = _profile_tools(profile)
    p = length // 2
    results = []
    for shape in closed_shapes(length, profile.includes_diagonal):
        mult = _multiplicities(shape)
        if any(q % 2 for q in mult.values()):
            continue
        plan = _plan(shape)
        s = _labelling_sum(plan, profile, nbrs, sq, exact)
        m = plan.num_vertices
        bound = profile.n * star_sq ** (p - (m - 1))
        ratio = s / bound
        if ratio > (1 if exact else 1 + 1e-12):
            raise BoundViolated(f"shape {shape}: sum {s} exceeds bound {bound}")
        results.append(ShapeBound(shape, m, s, bound, ratio))
    return BoundReport(length, tuple(results))
