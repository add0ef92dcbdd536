"""Almost-equivariant epsilon-isometries between finite spaces carrying group
actions: defect measurement, extension from a net, and the preimage-Hausdorff
bound, plus seeded instance generators for property-style acceptance runs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any, Sequence

from .coarse import MapRecord, distortion, density_defect
from .errors import ValidationError
from .ghmetric import FiniteMetricSpace, hausdorff, metric_space
from .measures import GroupAction
from .utils import number_to_json


def equivariance_defect(f: MapRecord, domain_action: GroupAction,
                        codomain_action: GroupAction, word: Sequence[str]):
    """sup over domain points of d(g.f(x), f(g.x))."""
    dom_perm = domain_action.word_permutation(word)
    cod_perm = codomain_action.word_permutation(word)
    d = f.codomain.dist
    return max(d(cod_perm[f.table[x]], f.table[dom_perm[x]]) for x in range(f.domain.size))


@dataclass(frozen=True)
class EquivariantMapReport:
    """An epsilon-isometry grade plus per-word equivariance defects."""

    epsilon: Any            # max(distortion, density defect)
    distortion: Any
    density: Any
    xi_per_word: tuple[tuple[str, Any], ...]

    def as_payload(self) -> dict:
        return {
            "epsilon": number_to_json(self.epsilon),
            "distortion": number_to_json(self.distortion),
            "density": number_to_json(self.density),
            "xi_per_word": [[w, number_to_json(x)] for w, x in self.xi_per_word],
        }


def equivariant_report(f: MapRecord, domain_action: GroupAction,
                       codomain_action: GroupAction,
                       words: Sequence[Sequence[str]]) -> EquivariantMapReport:
    dis = distortion(f)
    dens = density_defect(f.codomain, f.image())
    rows = tuple(("".join(w), equivariance_defect(f, domain_action, codomain_action, w))
                 for w in words)
    return EquivariantMapReport(max(dis, dens), dis, dens, rows)


# ---------------------------------------------------------------------------
# extension from a net
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionResult:
    record: MapRecord
    epsilon: Any             # max(net distortion, net image density, net radius)
    net_radius: Any
    extended_distortion: Any
    extended_density: Any
    within_three_eps: bool

    def as_payload(self) -> dict:
        return {
            "epsilon": number_to_json(self.epsilon),
            "net_radius": number_to_json(self.net_radius),
            "extended_distortion": number_to_json(self.extended_distortion),
            "extended_density": number_to_json(self.extended_density),
            "within_three_eps": self.within_three_eps,
            "table": list(self.record.table),
        }


def extend_from_net(space, net_points: Sequence[int], net_values: Sequence[int],
                    codomain, net_radius) -> ExtensionResult:
    """Extend a map defined on a net to the whole space via nearest net point.

    Ties break to the canonical (lowest-index) net point.  With epsilon the
    larger of the net map's isometry defect and the net radius, the extension
    is a 3*epsilon-isometry; the result records whether that held.
    """
    net_points = list(net_points)
    net_values = list(net_values)
    if len(net_points) != len(net_values) or not net_points:
        raise ValidationError("net points and values must align and be nonempty")
    if len(set(net_points)) != len(net_points):
        raise ValidationError("duplicate net points")
    n = space.size
    for x in range(n):
        if min(space.dist(x, p) for p in net_points) > net_radius:
            raise ValidationError("not a net at the stated radius", uncovered=x,
                                  radius=number_to_json(net_radius))

    by_point = dict(zip(net_points, net_values))
    table = []
    for x in range(n):
        if x in by_point:
            table.append(by_point[x])
            continue
        nearest = min(net_points, key=lambda p: (space.dist(x, p), p))
        table.append(by_point[nearest])
    record = MapRecord(space, codomain, tuple(table))

    net_dis = 0
    for a_pos, p in enumerate(net_points):
        for q in net_points[a_pos + 1:]:
            gap = abs(codomain.dist(by_point[p], by_point[q]) - space.dist(p, q))
            if gap > net_dis:
                net_dis = gap
    net_density = density_defect(codomain, set(net_values))
    eps = max(net_dis, net_density, net_radius)
    ext_dis = distortion(record)
    ext_density = density_defect(codomain, set(table))
    ok = ext_dis <= 3 * eps and ext_density <= 3 * eps
    return ExtensionResult(record, eps, net_radius, ext_dis, ext_density, ok)


# ---------------------------------------------------------------------------
# the preimage-Hausdorff bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreimageCheck:
    status: str          # "pass" | "fail" | "vacuous" | "inapplicable"
    measured: Any | None
    bound: Any
    detail: str

    def as_payload(self) -> dict:
        return {
            "status": self.status,
            "measured": None if self.measured is None else number_to_json(self.measured),
            "bound": number_to_json(self.bound),
            "detail": self.detail,
        }


def preimage_hausdorff_check(f: MapRecord, domain_action: GroupAction,
                             codomain_action: GroupAction, word: Sequence[str],
                             subset: Sequence[int], xi) -> PreimageCheck:
    """Compare d_Haus(g.f^-1(A), f^-1(g.A)) in the domain against 2*xi.

    The hypothesis bundle (xi-isometry, equivariance defect <= xi) is checked
    first; when it fails the result is vacuous, not a failure.  Empty
    preimages make the statement inapplicable.
    """
    bound = 2 * xi
    dis = distortion(f)
    dens = density_defect(f.codomain, f.image())
    defect = equivariance_defect(f, domain_action, codomain_action, word)
    if dis > xi or dens > xi or defect > xi:
        return PreimageCheck("vacuous", None, bound,
                             f"hypotheses fail: dis={dis}, density={dens}, defect={defect}")
    subset = sorted(set(subset))
    if not subset:
        return PreimageCheck("inapplicable", None, bound, "empty subset")
    dom_perm = domain_action.word_permutation(word)
    cod_perm = codomain_action.word_permutation(word)
    pre_a = [x for x in range(f.domain.size) if f.table[x] in set(subset)]
    moved_subset = {cod_perm[y] for y in subset}
    pre_moved = [x for x in range(f.domain.size) if f.table[x] in moved_subset]
    if not pre_a or not pre_moved:
        return PreimageCheck("inapplicable", None, bound, "empty preimage")
    left = [dom_perm[x] for x in pre_a]
    measured = hausdorff(f.domain, left, pre_moved)
    status = "pass" if measured <= bound else "fail"
    return PreimageCheck(status, measured, bound, "")


# ---------------------------------------------------------------------------
# seeded instance generators
# ---------------------------------------------------------------------------

def _cycle_space(n: int) -> FiniteMetricSpace:
    matrix = [[min(abs(i - j), n - abs(i - j)) for j in range(n)] for i in range(n)]
    return metric_space([str(i) for i in range(n)], matrix)


def _path_completion_space(rng: random.Random, n: int, scale: int = 5) -> FiniteMetricSpace:
    w = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            w[i][j] = w[j][i] = rng.randint(1, scale)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if w[i][k] + w[k][j] < w[i][j]:
                    w[i][j] = w[i][k] + w[k][j]
    return metric_space([str(i) for i in range(n)], w)


def _rotation_action(space: FiniteMetricSpace) -> GroupAction:
    n = space.size
    fwd = tuple((i + 1) % n for i in range(n))
    back = tuple((i - 1) % n for i in range(n))
    return GroupAction(space, {"r": fwd, "r'": back}, {"r": "r'", "r'": "r"})


def _jittered_bijection(rng: random.Random, n: int) -> tuple[int, ...]:
    """Rotation composed with a few disjoint adjacent swaps; always onto."""
    shift = rng.randrange(n)
    table = [(i + shift) % n for i in range(n)]
    positions = list(range(0, n - 1, 2))
    rng.shuffle(positions)
    for pos in positions[: rng.randint(0, max(1, n // 4))]:
        table[pos], table[pos + 1] = table[pos + 1], table[pos]
    return tuple(table)


def net_extension_instances(seed: int, count: int):
    """Seeded stream of (space, net points, net values, codomain, radius)."""
    rng = random.Random(seed)
    for _ in range(count):
        if rng.random() < 0.5:
            n = rng.choice([6, 8, 10, 12])
            space = _cycle_space(n)
        else:
            n = rng.randint(5, 9)
            space = _path_completion_space(rng, n)
        codomain = space
        size = rng.randint(2, space.size)
        net = sorted(rng.sample(range(space.size), size))
        radius = max(min(space.dist(x, p) for p in net) for x in range(space.size))
        base = _jittered_bijection(rng, space.size)
        values = [base[p] for p in net]
        yield space, net, values, codomain, radius


def preimage_instances(seed: int, count: int):
    """Seeded stream of (map, domain action, codomain action, word, subset, xi).

    Maps are bijections, so every fiber that the bound's argument needs is
    nonempty; xi is the measured max of distortion and equivariance defect.
    """
    rng = random.Random(seed)
    for _ in range(count):
        n = rng.choice([6, 8, 10, 12])
        space = _cycle_space(n)
        action = _rotation_action(space)
        f = MapRecord(space, space, _jittered_bijection(rng, n))
        length = rng.randint(1, 3)
        word = [rng.choice(["r", "r'"]) for _ in range(length)]
        dis = distortion(f)
        defect = equivariance_defect(f, action, action, word)
        xi = max(dis, defect, density_defect(space, f.image()))
        size = rng.randint(1, n)
        subset = sorted(rng.sample(range(n), size))
        yield f, action, action, word, subset, xi
