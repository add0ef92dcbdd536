"""Hausdorff distance, epsilon-isometry certification, certified
Gromov-Hausdorff bounds between finite metric spaces, and convergence
evidence for sequences.

GH distance is computed through correspondences (relations covering both
sides): d_GH = (1/2) * min distortion.  Every minimal covering relation is a
function graph f: X -> Y together with assignments for the uncovered part of
Y, which is exactly the shape of the search tree below; exhausting it is
therefore exact.  All values stay rational when the inputs are rational;
float inputs are compared with a 1e-12 tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .coarse import MapRecord, distortion, density_defect
from .errors import ValidationError
from .utils import number_from_json, number_to_json

FLOAT_TOL = 1e-12
DEFAULT_GH_BUDGET = 2_000_000
EXACT_GUARANTEE = 25  # |X| * |Y| up to this size always exhausts the tree


@dataclass(eq=False)
class FiniteMetricSpace:
    """Labelled points with an explicit symmetric distance matrix."""

    point_labels: tuple[str, ...]
    matrix: tuple[tuple[Any, ...], ...]

    def __post_init__(self):
        n = len(self.point_labels)
        if len(self.matrix) != n or any(len(row) != n for row in self.matrix):
            raise ValidationError("distance matrix shape mismatch", n=n)
        for i in range(n):
            if self.matrix[i][i] != 0:
                raise ValidationError("nonzero diagonal", i=i)
            for j in range(i + 1, n):
                if self.matrix[i][j] != self.matrix[j][i]:
                    raise ValidationError("asymmetric matrix", i=i, j=j)
                if self.matrix[i][j] <= 0:
                    raise ValidationError("off-diagonal distances must be positive", i=i, j=j)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if self.matrix[i][j] > self.matrix[i][k] + self.matrix[k][j] + FLOAT_TOL:
                        raise ValidationError("triangle inequality fails", i=i, j=j, k=k)

    @property
    def size(self) -> int:
        return len(self.point_labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.point_labels

    def dist(self, i: int, j: int):
        return self.matrix[i][j]

    def diameter(self):
        n = self.size
        if n <= 1:
            return 0
        return max(self.matrix[i][j] for i in range(n) for j in range(i + 1, n))


def metric_space(labels: Sequence[str], matrix: Sequence[Sequence]) -> FiniteMetricSpace:
    return FiniteMetricSpace(tuple(labels), tuple(tuple(row) for row in matrix))


def space_from_quotient(q) -> FiniteMetricSpace:
    return metric_space(q.labels, q.distance_matrix())


def space_from_mapspace(space) -> FiniteMetricSpace:
    """Snapshot of an enumerated map space under its agreement ultrametric."""
    labels = tuple(f"m{i}" for i in range(space.size))
    return metric_space(labels, space.distance_matrix())


def space_from_boxspace(box, max_points: int = 300) -> FiniteMetricSpace:
    if box.size > max_points:
        raise ValidationError("box space too large to materialize", size=box.size)
    pts = box.points
    matrix = [[box.dist(p, q) for q in pts] for p in pts]
    return metric_space(box.labels(), matrix)


# ---------------------------------------------------------------------------
# Hausdorff distance and epsilon-isometries
# ---------------------------------------------------------------------------

def hausdorff(ambient, subset_a: Iterable[int], subset_b: Iterable[int]):
    """max of the two directed sup-inf distances inside a common ambient space."""
    a, b = list(subset_a), list(subset_b)
    if not a or not b:
        raise ValidationError("hausdorff distance needs nonempty subsets")
    d = ambient.dist
    forward = max(min(d(x, y) for y in b) for x in a)
    backward = max(min(d(y, x) for x in a) for y in b)
    return max(forward, backward)


@dataclass(frozen=True)
class IsometryCertificate:
    passed: bool
    epsilon: Any
    distortion: Any
    density: Any
    witness: tuple | None

    def as_payload(self) -> dict:
        return {
            "passed": self.passed,
            "epsilon": number_to_json(self.epsilon),
            "distortion": number_to_json(self.distortion),
            "density": number_to_json(self.density),
            "witness": list(self.witness) if self.witness else None,
        }


def certify_eps_isometry(f: MapRecord, epsilon) -> IsometryCertificate:
    """dis f <= eps and the image is eps-dense in the codomain."""
    dis = distortion(f)
    dens = density_defect(f.codomain, f.image())
    witness = None
    if dis > epsilon:
        n = f.domain.size
        witness = next(("distortion", i, j) for i in range(n) for j in range(i + 1, n)
                       if abs(f.codomain.dist(f.table[i], f.table[j]) - f.domain.dist(i, j)) == dis)
    elif dens > epsilon:
        witness = ("uncovered",
                   max(range(f.codomain.size),
                       key=lambda y: min(f.codomain.dist(y, v) for v in f.image())))
    return IsometryCertificate(dis <= epsilon and dens <= epsilon, epsilon, dis, dens, witness)


# ---------------------------------------------------------------------------
# Gromov-Hausdorff bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GHResult:
    lower: Any
    upper: Any
    exact: bool
    witness_map: MapRecord | None          # the functional part of the best relation
    witness_pairs: tuple[tuple[int, int], ...]
    nodes: int = 0

    def as_payload(self) -> dict:
        return {
            "lower": number_to_json(self.lower),
            "upper": number_to_json(self.upper),
            "exact": self.exact,
            "witness_map": list(self.witness_map.table) if self.witness_map else None,
            "witness_pairs": [list(p) for p in self.witness_pairs],
        }


def _multiset_bottleneck(x: FiniteMetricSpace, y: FiniteMetricSpace):
    """Max sorted-multiset mismatch of the pairwise distances (equal sizes only).

    Heuristic lower-bound candidate; it can overshoot the true GH distance on
    clustered spaces, so callers clamp it by the computed upper bound.
    """
    if x.size != y.size or x.size < 2:
        return 0
    mx = sorted(x.matrix[i][j] for i in range(x.size) for j in range(i + 1, x.size))
    my = sorted(y.matrix[i][j] for i in range(y.size) for j in range(i + 1, y.size))
    return max(abs(a - b) for a, b in zip(mx, my))


def _relation_distortion(x, y, pairs):
    worst = 0
    for idx, (i1, j1) in enumerate(pairs):
        for i2, j2 in pairs[idx:]:
            gap = abs(x.matrix[i1][i2] - y.matrix[j1][j2])
            if gap > worst:
                worst = gap
    return worst


def _eccentricity_order(space: FiniteMetricSpace) -> list[int]:
    ecc = [max(space.matrix[i]) for i in range(space.size)]
    return sorted(range(space.size), key=lambda i: (-ecc[i], i))


def _search_correspondence(x: FiniteMetricSpace, y: FiniteMetricSpace, budget: int):
    """Branch-and-bound over graph(f) plus assignments for the uncovered part of Y.

    Returns (best distortion, best relation pairs, exhausted flag, nodes).
    """
    n, m = x.size, y.size
    x_order = _eccentricity_order(x)
    y_order = _eccentricity_order(y)

    best = [None, None]  # distortion, pairs
    nodes = 0
    exhausted = True

    # greedy warm start: cheapest y per x in eccentricity order, then cover Y
    f_greedy = {}
    for i in x_order:
        f_greedy[i] = min(range(m), key=lambda v: max(
            (abs(x.matrix[i][j] - y.matrix[v][f_greedy[j]]) for j in f_greedy), default=0))
    pairs = [(i, f_greedy[i]) for i in x_order]
    for v in y_order:
        if v not in f_greedy.values():
            u = min(range(n), key=lambda i: max(
                abs(x.matrix[i][a] - y.matrix[v][b]) for a, b in pairs))
            pairs.append((u, v))
    best[0] = _relation_distortion(x, y, pairs)
    best[1] = tuple(pairs)

    assigned: list[tuple[int, int]] = []

    def extend_cover(pos: int, uncovered: list[int]) -> bool:
        nonlocal nodes, exhausted
        if pos == len(uncovered):
            dis = _relation_distortion(x, y, assigned)
            if best[0] is None or dis < best[0]:
                best[0] = dis
                best[1] = tuple(assigned)
            return True
        v = uncovered[pos]
        for u in range(n):
            nodes += 1
            if nodes > budget:
                exhausted = False
                return False
            worst = 0
            for (i, j) in assigned:
                gap = abs(x.matrix[u][i] - y.matrix[v][j])
                if gap > worst:
                    worst = gap
            if best[0] is not None and worst >= best[0]:
                continue
            assigned.append((u, v))
            ok = extend_cover(pos + 1, uncovered)
            assigned.pop()
            if not ok:
                return False
        return True

    def assign(pos: int) -> bool:
        nonlocal nodes, exhausted
        if pos == n:
            covered = {j for _, j in assigned}
            uncovered = [v for v in y_order if v not in covered]
            return extend_cover(0, uncovered)
        i = x_order[pos]
        for v in range(m):
            nodes += 1
            if nodes > budget:
                exhausted = False
                return False
            worst = 0
            for (i2, j2) in assigned:
                gap = abs(x.matrix[i][i2] - y.matrix[v][j2])
                if gap > worst:
                    worst = gap
            if best[0] is not None and worst >= best[0]:
                continue
            assigned.append((i, v))
            ok = assign(pos + 1)
            assigned.pop()
            if not ok:
                return False
        return True

    assign(0)
    return best[0], best[1], exhausted, nodes


def gh_bounds(x: FiniteMetricSpace, y: FiniteMetricSpace,
              budget: int = DEFAULT_GH_BUDGET) -> GHResult:
    """Certified lower/upper bounds; exact when the correspondence tree is
    exhausted (guaranteed for |X| * |Y| <= 25)."""
    # canonical orientation so the reported value is symmetric under budget cuts
    sig_x = (x.size, tuple(float(v) for row in x.matrix for v in row))
    sig_y = (y.size, tuple(float(v) for row in y.matrix for v in row))
    if sig_y < sig_x:
        flipped = gh_bounds(y, x, budget)
        witness = tuple((i, j) for j, i in flipped.witness_pairs)
        wmap = _functional_part(x, y, witness)
        return GHResult(flipped.lower, flipped.upper, flipped.exact, wmap, witness, flipped.nodes)

    dis, pairs, exhausted, nodes = _search_correspondence(x, y, budget)
    upper = _half(dis)
    lower = _half(abs(x.diameter() - y.diameter()))
    if x.size == y.size:
        lower = max(lower, _half(_multiset_bottleneck(x, y)))
    lower = min(lower, upper)  # the multiset candidate is not always a true bound
    if exhausted:
        lower = upper
    return GHResult(lower, upper, exhausted, _functional_part(x, y, pairs), pairs, nodes)


def _half(v):
    if isinstance(v, Fraction) or isinstance(v, int):
        return Fraction(v) / 2
    return v / 2.0


def _functional_part(x, y, pairs) -> MapRecord | None:
    table = {}
    for i, j in pairs:
        table.setdefault(i, j)
    if len(table) != x.size:
        return None
    return MapRecord(x, y, tuple(table[i] for i in range(x.size)))


# ---------------------------------------------------------------------------
# convergence evidence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceItem:
    index: int
    epsilon: Any
    exact: bool
    witness: MapRecord | None

    def as_payload(self) -> dict:
        return {"index": self.index, "epsilon": number_to_json(self.epsilon),
                "exact": self.exact}


@dataclass(frozen=True)
class ConvergenceEvidence:
    items: tuple[ConvergenceItem, ...]
    nonincreasing: bool

    def as_payload(self) -> dict:
        return {"items": [it.as_payload() for it in self.items],
                "nonincreasing": self.nonincreasing}


def best_isometry_defect(x: FiniteMetricSpace, target: FiniteMetricSpace,
                         budget: int = DEFAULT_GH_BUDGET):
    """min over maps f: x -> target of max(dis f, density defect of f).

    Branch-and-bound on the partial distortion; density is decided at leaves.
    Returns (epsilon, witness table, exhausted flag).
    """
    n, m = x.size, target.size
    order = _eccentricity_order(x)
    best = [None, None]
    nodes = 0
    exhausted = True

    # warm start: greedy assignment
    greedy: dict[int, int] = {}
    for i in order:
        greedy[i] = min(range(m), key=lambda v: max(
            (abs(x.matrix[i][j] - target.matrix[v][greedy[j]]) for j in greedy), default=0))
    table = tuple(greedy[i] for i in range(n))
    f0 = MapRecord(x, target, table)
    best[0] = max(distortion(f0), density_defect(target, set(table)))
    best[1] = table

    assigned: dict[int, int] = {}

    def walk(pos: int) -> bool:
        nonlocal nodes, exhausted
        if pos == n:
            table = tuple(assigned[i] for i in range(n))
            eps = max(_relation_distortion(x, target, [(i, v) for i, v in assigned.items()]),
                      density_defect(target, set(table)))
            if eps < best[0]:
                best[0] = eps
                best[1] = table
            return True
        i = order[pos]
        for v in range(m):
            nodes += 1
            if nodes > budget:
                exhausted = False
                return False
            worst = 0
            for i2, j2 in assigned.items():
                gap = abs(x.matrix[i][i2] - target.matrix[v][j2])
                if gap > worst:
                    worst = gap
            if worst >= best[0]:
                continue
            assigned[i] = v
            ok = walk(pos + 1)
            del assigned[i]
            if not ok:
                return False
        return True

    walk(0)
    return best[0], best[1], exhausted


def convergence_evidence(seq: Sequence[FiniteMetricSpace], target: FiniteMetricSpace,
                         budget: int = DEFAULT_GH_BUDGET) -> ConvergenceEvidence:
    """Per item, the least epsilon certified by some map; plus the trend summary."""
    items = []
    for k, x in enumerate(seq):
        eps, table, exhausted = best_isometry_defect(x, target, budget)
        witness = MapRecord(x, target, table) if table is not None else None
        items.append(ConvergenceItem(k, eps, exhausted, witness))
    eps_values = [float(it.epsilon) for it in items]
    trend = all(b <= a + 1e-9 for a, b in zip(eps_values, eps_values[1:]))
    return ConvergenceEvidence(tuple(items), trend)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def space_to_payload(space: FiniteMetricSpace) -> dict:
    return {
        "format": "space/v1",
        "labels": list(space.point_labels),
        "matrix": [[number_to_json(v) for v in row] for row in space.matrix],
    }


def space_from_payload(payload: dict) -> FiniteMetricSpace:
    if payload.get("format", "space/v1") != "space/v1":
        raise ValidationError("not a metric-space payload", format=payload.get("format"))
    matrix = [[number_from_json(v) for v in row] for row in payload["matrix"]]
    return metric_space([str(s) for s in payload["labels"]], matrix)
