"""Control data, coarse-map verification and enumeration, map spaces with the
2^(-r) agreement ultrametric, epsilon-nets from restriction fibers, and the
group action on basepointed maps.

A map space collects every table f: domain -> codomain that passes the
(rho_plus, rho_minus, c) checks, optionally basepointed (f(1) = 1) and
injective.  Members are enumerated in lexicographic order over the domain's
canonical enumeration, so member index 0 is the lexicographically least table
and results are independent of scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

from .errors import ValidationError
from .utils import number_from_json, number_to_json

DEFAULT_NODE_BUDGET = 100_000_000


# ---------------------------------------------------------------------------
# control functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlFunction:
    """Nondecreasing function on [0, oo): affine a*t + b, or a piecewise-linear
    sample table with a declared terminal slope.  Values are exact rationals."""

    kind: str  # "affine" | "table"
    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    samples: tuple[tuple[Fraction, Fraction], ...] = ()
    slope: Fraction = Fraction(0)

    def __post_init__(self):
        if self.kind == "affine":
            if self.a <= 0:
                raise ValidationError("affine control needs slope > 0", a=str(self.a))
            if self.b < 0:
                raise ValidationError("control must be nonnegative at 0", b=str(self.b))
        elif self.kind == "table":
            if not self.samples:
                raise ValidationError("table control needs samples")
            ts = [t for t, _ in self.samples]
            vs = [v for _, v in self.samples]
            if ts != sorted(ts) or len(set(ts)) != len(ts):
                raise ValidationError("table abscissae must be strictly increasing")
            if any(v < 0 for v in vs) or any(v2 < v1 for v1, v2 in zip(vs, vs[1:])):
                raise ValidationError("table values must be nonnegative and nondecreasing")
            if self.slope <= 0:
                raise ValidationError("terminal slope must be > 0", slope=str(self.slope))
        else:
            raise ValidationError("unknown control kind", kind=self.kind)

    def __call__(self, t) -> Fraction:
        t = Fraction(t)
        if t < 0:
            raise ValidationError("controls are defined on [0, oo)", t=str(t))
        if self.kind == "affine":
            return self.a * t + self.b
        ts = self.samples
        if t <= ts[0][0]:
            return ts[0][1]
        for (t1, v1), (t2, v2) in zip(ts, ts[1:]):
            if t <= t2:
                return v1 + (v2 - v1) * (t - t1) / (t2 - t1)
        t_last, v_last = ts[-1]
        return v_last + self.slope * (t - t_last)

    def spec(self) -> str:
        if self.kind == "affine":
            return f"affine:{_fmt(self.a)},{_fmt(self.b)}"
        pts = ";".join(f"({_fmt(t)},{_fmt(v)})" for t, v in self.samples)
        return f"table:{pts},{_fmt(self.slope)}"


def _fmt(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return repr(float(x)) if float(x) == x else f"{x.numerator}/{x.denominator}"


def parse_control_function(text: str) -> ControlFunction:
    """Parse 'affine:a,b' or 'table:(t0,v0);(t1,v1);...,slope' (decimal literals)."""
    kind, _, body = text.partition(":")
    if kind == "affine":
        a_text, _, b_text = body.partition(",")
        return ControlFunction("affine", a=Fraction(a_text), b=Fraction(b_text))
    if kind == "table":
        pts_text, _, slope_text = body.rpartition(",")
        samples = []
        for chunk in pts_text.split(";"):
            chunk = chunk.strip()
            if not (chunk.startswith("(") and chunk.endswith(")")):
                raise ValidationError("bad table sample", sample=chunk)
            t_text, _, v_text = chunk[1:-1].partition(",")
            samples.append((Fraction(t_text), Fraction(v_text)))
        return ControlFunction("table", samples=tuple(samples), slope=Fraction(slope_text))
    raise ValidationError("unknown control form", text=text)


@dataclass(frozen=True)
class ControlData:
    """The pair of nondecreasing control functions and the density radius c."""

    rho_plus: ControlFunction
    rho_minus: ControlFunction
    c: Fraction = Fraction(0)

    def __post_init__(self):
        if self.c < 0:
            raise ValidationError("density radius must be nonnegative", c=str(self.c))

    def bounds(self, t) -> tuple[Fraction, Fraction]:
        lo, hi = self.rho_minus(t), self.rho_plus(t)
        if lo > hi:
            raise ValidationError("rho_minus exceeds rho_plus at an evaluation point",
                                  t=str(t), lo=str(lo), hi=str(hi))
        return lo, hi

    def spec(self) -> str:
        return f"{self.rho_plus.spec()}/{self.rho_minus.spec()}/{_fmt(self.c)}"


def affine_controls(a_plus, b_plus, a_minus, b_minus, c=0) -> ControlData:
    return ControlData(
        ControlFunction("affine", a=Fraction(a_plus), b=Fraction(b_plus)),
        ControlFunction("affine", a=Fraction(a_minus), b=Fraction(b_minus)),
        Fraction(c),
    )


def parse_controls(text: str) -> ControlData:
    """Parse the CLI grammar 'PLUS/MINUS/c', e.g. 'affine:2,0/affine:0.5,0/1'."""
    parts = text.split("/")
    if len(parts) != 3:
        raise ValidationError("controls must be rho_plus/rho_minus/c", text=text)
    return ControlData(parse_control_function(parts[0]),
                       parse_control_function(parts[1]),
                       Fraction(parts[2]))


identity_controls = affine_controls(1, 0, 1, 0, 0)


# ---------------------------------------------------------------------------
# tag products (injectivity fix: codomain x cyclic tag group)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TagProduct:
    """Base quotient times a cyclic tag group of size M.

    The point (x, i) has index x*M + i.  Distinct tags over the same base point
    sit at distance 1: d((x,i),(y,j)) = d(x,y) + [i != j].  The projection to
    the base is then 1-Lipschitz, and controls move by at most 1.
    """

    base: Any
    tag_size: int

    def __post_init__(self):
        if self.tag_size < 1:
            raise ValidationError("tag group must be nonempty", tag_size=self.tag_size)

    @property
    def size(self) -> int:
        return self.base.size * self.tag_size

    @property
    def order(self) -> int:
        return self.size

    @property
    def identity_index(self) -> int:
        return self.base.identity_index * self.tag_size

    def split(self, i: int) -> tuple[int, int]:
        return divmod(i, self.tag_size)

    def dist(self, i: int, j: int):
        (x, a), (y, b) = self.split(i), self.split(j)
        d = self.base.dist(x, y)
        return d if a == b else d + 1

    @property
    def dist0(self):
        return _TagDist0(self)

    def mul(self, i: int, j: int) -> int:
        (x, a), (y, b) = self.split(i), self.split(j)
        return self.base.mul(x, y) * self.tag_size + (a + b) % self.tag_size

    def inv(self, i: int) -> int:
        x, a = self.split(i)
        return self.base.inv(x) * self.tag_size + (-a) % self.tag_size

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"{lab}#{t}" for lab in self.base.labels for t in range(self.tag_size))

    def project(self, i: int) -> int:
        return i // self.tag_size


class _TagDist0:
    def __init__(self, product: TagProduct):
        self.product = product

    def __getitem__(self, i: int):
        x, a = self.product.split(i)
        d = self.product.base.dist0[x]
        return d if a == 0 else d + 1

    def __len__(self) -> int:
        return self.product.size


# ---------------------------------------------------------------------------
# map records and verification
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MapRecord:
    """A total map between two finite metric spaces, as a table of indices."""

    domain: Any
    codomain: Any
    table: tuple[int, ...]

    def __post_init__(self):
        if len(self.table) != self.domain.size:
            raise ValidationError("table must be total on the domain",
                                  table=len(self.table), domain=self.domain.size)
        if any(not 0 <= v < self.codomain.size for v in self.table):
            raise ValidationError("table value out of codomain range")
        self.report = None  # last verification outcome, cached

    def __call__(self, i: int) -> int:
        return self.table[i]

    def image(self) -> set[int]:
        return set(self.table)

    def is_injective(self) -> bool:
        return len(set(self.table)) == len(self.table)


@dataclass(frozen=True)
class VerifyReport:
    mode: str
    passed: bool
    embedding: bool
    equivalence: bool | None
    distortion: Any
    density_defect: Any | None
    witness: tuple | None  # first violation: ("lower"|"upper", x1, x2) or ("density", y)

    def as_payload(self) -> dict:
        return {
            "mode": self.mode,
            "passed": self.passed,
            "embedding": self.embedding,
            "equivalence": self.equivalence,
            "distortion": number_to_json(self.distortion),
            "density_defect": None if self.density_defect is None else number_to_json(self.density_defect),
            "witness": list(self.witness) if self.witness else None,
        }


def distortion(f: MapRecord):
    """sup over all pairs of |d_Y(f(x1), f(x2)) - d_X(x1, x2)|."""
    worst = 0
    n = f.domain.size
    for i in range(n):
        fi = f.table[i]
        for j in range(i + 1, n):
            gap = abs(f.codomain.dist(fi, f.table[j]) - f.domain.dist(i, j))
            if gap > worst:
                worst = gap
    return worst


def density_defect(codomain, image: Iterable[int]):
    """sup over codomain points of the distance to the image set."""
    image = list(image)
    if not image:
        raise ValidationError("empty image has no density radius")
    return max(min(codomain.dist(y, v) for v in image) for y in range(codomain.size))


def verify(f: MapRecord, controls: ControlData, mode: str = "embedding") -> VerifyReport:
    """Check the control inequalities over all pairs; 'equivalence' adds c-density.

    Failure is an outcome, not an error; the report carries the first violating
    witness and the achieved distortion.
    """
    if mode not in ("embedding", "equivalence"):
        raise ValidationError("mode must be embedding or equivalence", mode=mode)
    witness = None
    embedding_ok = True
    worst = 0
    n = f.domain.size
    for i in range(n):
        for j in range(i, n):
            t = f.domain.dist(i, j)
            dy = f.codomain.dist(f.table[i], f.table[j])
            lo, hi = controls.bounds(t)
            if embedding_ok and (dy < lo or dy > hi):
                embedding_ok = False
                witness = ("lower" if dy < lo else "upper", i, j)
            gap = abs(dy - t)
            if gap > worst:
                worst = gap
    equivalence_ok = None
    defect = None
    if mode == "equivalence":
        defect = density_defect(f.codomain, f.image())
        equivalence_ok = embedding_ok and defect <= controls.c
        if embedding_ok and defect > controls.c:
            uncovered = next(y for y in range(f.codomain.size)
                             if min(f.codomain.dist(y, v) for v in f.image()) > controls.c)
            witness = ("density", uncovered)
    passed = embedding_ok if mode == "embedding" else bool(equivalence_ok)
    report = VerifyReport(mode, passed, embedding_ok, equivalence_ok, worst, defect, witness)
    f.report = report
    return report


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MapSpace:
    """All qualifying maps between two spaces, in canonical (lexicographic) order."""

    domain: Any
    codomain: Any
    controls: ControlData
    basepointed: bool
    injective_required: bool
    members: tuple[MapRecord, ...]
    complete: bool
    nodes_expanded: int = 0

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"m{i}" for i in range(len(self.members)))

    def dist(self, i: int, j: int) -> float:
        return map_distance(self.members[i], self.members[j])

    def distance(self, i: int, j: int) -> float:
        return map_distance(self.members[i], self.members[j])

    def distance_matrix(self) -> list[list[float]]:
        n = len(self.members)
        mat = [[0.0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                mat[i][j] = mat[j][i] = self.distance(i, j)
        return mat

    def member_index(self, table: Sequence[int]) -> int | None:
        table = tuple(table)
        for i, m in enumerate(self.members):
            if m.table == table:
                return i
        return None


def _integer_bounds(controls: ControlData, max_t: int) -> list[tuple[int, int]]:
    """Per integer distance t: the integer window [ceil(rho_minus), floor(rho_plus)]."""
    out = []
    for t in range(max_t + 1):
        lo, hi = controls.bounds(t)
        out.append((math.ceil(lo), math.floor(hi)))
    return out


def enumerate_map_space(domain, codomain, controls: ControlData, *,
                        basepointed: bool = True, injective_required: bool = False,
                        node_budget: int = DEFAULT_NODE_BUDGET) -> MapSpace:
    """Complete backtracking enumeration of the qualifying maps.

    The domain is consumed in its canonical order (distance-from-identity,
    then carrier key); codomain values are tried in canonical index order, so
    the member list is lexicographic.  A partial assignment is cut only when
    an already-assigned pair violates a control inequality (or a tag collides
    under the injectivity flag), which preserves completeness.  Density (the c
    part) is decided on full tables only.
    """
    n, m = domain.size, codomain.size
    diam = max(domain.dist0[i] for i in range(n))
    bounds = _integer_bounds(controls, diam)
    dmat = [[domain.dist(i, j) for j in range(n)] for i in range(n)]
    cdist = codomain.dist
    c_value = controls.c

    members: list[MapRecord] = []
    table = [0] * n
    used = [False] * m
    nodes = 0
    complete = True

    start = 0
    if basepointed:
        table[0] = codomain.identity_index
        if injective_required:
            used[codomain.identity_index] = True
        start = 1
        if n == 0:
            raise ValidationError("empty domain")

    def backtrack(i: int) -> bool:
        nonlocal nodes, complete
        if i == n:
            f = MapRecord(domain, codomain, tuple(table))
            defect = density_defect(codomain, set(table))
            if defect <= c_value:
                members.append(f)
            return True
        for v in range(m):
            if injective_required and used[v]:
                continue
            nodes += 1
            if nodes > node_budget:
                complete = False
                return False
            ok = True
            for j in range(i):
                lo, hi = bounds[dmat[j][i]]
                if not lo <= cdist(table[j], v) <= hi:
                    ok = False
                    break
            if not ok:
                continue
            table[i] = v
            if injective_required:
                used[v] = True
            if not backtrack(i + 1):
                return False
            if injective_required:
                used[v] = False
        return True

    if n == 0:
        raise ValidationError("empty domain")
    backtrack(start)
    return MapSpace(domain, codomain, controls, basepointed, injective_required,
                    tuple(members), complete, nodes)


def make_injective(f: MapRecord) -> MapRecord:
    """Resolve collisions into a tag product; M is the maximum fiber size.

    Colliding domain points receive distinct tags in canonical domain order;
    the projection of the output back to the base equals f.
    """
    fiber_count: dict[int, int] = {}
    for v in f.table:
        fiber_count[v] = fiber_count.get(v, 0) + 1
    m = max(fiber_count.values())
    product = TagProduct(f.codomain, m)
    seen: dict[int, int] = {}
    out = []
    for v in f.table:
        tag = seen.get(v, 0)
        seen[v] = tag + 1
        out.append(v * m + tag)
    return MapRecord(f.domain, product, tuple(out))


# ---------------------------------------------------------------------------
# the agreement ultrametric and epsilon-nets
# ---------------------------------------------------------------------------

def map_distance(f: MapRecord, g: MapRecord) -> float:
    """2^-(largest radius of full agreement on balls around the identity).

    Equal maps sit at 0; maps disagreeing at the basepoint at 2^0 = 1 (the sup
    over an empty set of radii is taken as 0).  Exact in binary floats.
    """
    if f.domain is not g.domain and f.domain.size != g.domain.size:
        raise ValidationError("map distance needs a common domain")
    if f.codomain is not g.codomain and f.codomain.size != g.codomain.size:
        raise ValidationError("map distance needs a common codomain")
    dist0 = f.domain.dist0
    first = None
    for x, (a, b) in enumerate(zip(f.table, g.table)):
        if a != b:
            first = dist0[x]  # canonical order is nondecreasing in distance
            break
    if first is None:
        return 0.0
    return 2.0 ** (-(first - 1)) if first >= 1 else 1.0


@dataclass(frozen=True)
class NetCertificate:
    radius_exponent: int
    net_member_indices: tuple[int, ...]
    eps: float
    cardinality_bound: int
    net_property_ok: bool
    cardinality_ok: bool

    def as_payload(self) -> dict:
        return {
            "R": self.radius_exponent,
            "net_members": list(self.net_member_indices),
            "eps": self.eps,
            "bound": self.cardinality_bound,
            "net_property_ok": self.net_property_ok,
            "cardinality_ok": self.cardinality_ok,
        }


def eps_net(space: MapSpace, radius_exponent: int) -> NetCertificate:
    """Fiber net: group members by their restriction to B_R(1) and keep the
    canonical-least member of each fiber.

    Certifies (i) every member is within 2^-R of a chosen one and (ii) the net
    has at most |S_G|^R * |S_H|^ceil(rho_plus(R)) points.  Refuses incomplete
    enumerations, whose net claim would be unsound.
    """
    if not space.complete:
        raise ValidationError("net over an incomplete enumeration would be unsound")
    r = radius_exponent
    if r < 0:
        raise ValidationError("net radius exponent must be nonnegative", R=r)
    dist0 = space.domain.dist0
    ball = [x for x in range(space.domain.size) if dist0[x] <= r]
    fibers: dict[tuple, int] = {}
    for idx, member in enumerate(space.members):
        key = tuple(member.table[x] for x in ball)
        fibers.setdefault(key, idx)  # first occurrence = canonical-least
    chosen = tuple(sorted(fibers.values()))
    eps = 2.0 ** (-r)
    net_ok = True
    for idx, member in enumerate(space.members):
        key = tuple(member.table[x] for x in ball)
        if map_distance(member, space.members[fibers[key]]) > eps:
            net_ok = False
            break
    s_g = len(space.domain.parent.generators)
    codomain = space.codomain.base if isinstance(space.codomain, TagProduct) else space.codomain
    s_h = len(codomain.parent.generators)
    bound = s_g ** r * s_h ** math.ceil(space.controls.rho_plus(r))
    return NetCertificate(r, chosen, eps, bound, net_ok, len(chosen) <= bound)


# ---------------------------------------------------------------------------
# group action on basepointed maps
# ---------------------------------------------------------------------------

def act(word: Sequence[str], f: MapRecord) -> MapRecord:
    """[g.f](x) = f(g^-1)^-1 * f(g^-1 x); basepointed by construction."""
    domain, codomain = f.domain, f.codomain
    g = domain.eval_word(word)
    g_inv = domain.inv(g)
    anchor = codomain.inv(f.table[g_inv])
    table = tuple(codomain.mul(anchor, f.table[domain.mul(g_inv, x)])
                  for x in range(domain.size))
    return MapRecord(domain, codomain, table)


@dataclass(frozen=True)
class ActOutcome:
    """The transformed map plus flags: does it verify, and is it an enumerated member?

    A transform that verifies but is not a member (or cannot be decided because
    the enumeration was incomplete) is a member of the closure only.
    """

    record: MapRecord
    verifies: bool
    member_index: int | None
    in_space: bool


def act_in_space(space: MapSpace, word: Sequence[str], member: int) -> ActOutcome:
    moved = act(word, space.members[member])
    report = verify(moved, space.controls, mode="equivalence")
    ok = report.passed
    if space.basepointed:
        ok = ok and moved.table[space.domain.identity_index] == space.codomain.identity_index
    if space.injective_required:
        ok = ok and moved.is_injective()
    idx = space.member_index(moved.table)
    return ActOutcome(moved, ok, idx, idx is not None)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def controls_to_payload(controls: ControlData) -> dict:
    return {"rho_plus": controls.rho_plus.spec(),
            "rho_minus": controls.rho_minus.spec(),
            "c": number_to_json(controls.c)}


def controls_from_payload(payload: dict) -> ControlData:
    return ControlData(parse_control_function(payload["rho_plus"]),
                       parse_control_function(payload["rho_minus"]),
                       Fraction(number_from_json(payload["c"])))


def mapspace_to_payload(space: MapSpace, domain_ref: dict, codomain_ref: dict) -> dict:
    return {
        "format": "mapspace/v1",
        "domain_ref": domain_ref,
        "codomain_ref": codomain_ref,
        "controls": controls_to_payload(space.controls),
        "flags": {
            "basepointed": space.basepointed,
            "injective": space.injective_required,
            "complete": space.complete,
        },
        "members": [list(m.table) for m in space.members],
    }
