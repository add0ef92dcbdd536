"""Marked groups, finite quotients along normal chains, word metrics and balls.

Three chain families are built in:

* ``cyclic:k[:start]``  -- Z/k^start, Z/k^(start+1), ... under the generators +-1
  (or +-s for a custom step set on the infinite side).
* ``sl2:p1,p2,...``     -- SL2(Z/m_n) for m_n = p1*...*pn, under the four
  elementary matrices e12(+-1), e21(+-1).
* ``free:r:SPEC``       -- quotients of the free group F_r by intersected kernels
  of per-level homomorphisms onto symmetric groups, given by permutation images.
  SPEC is levels separated by '|', images per level separated by ',', each image
  written as the one-line form of the permutation (e.g. "102" maps 0->1,1->0,2->2).

Quotient elements are enumerated canonically: breadth-first layers from the
identity, each layer sorted by the carrier's canonical key.  Index 0 is always
the identity, and distance-from-identity is nondecreasing in the index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Sequence

from .errors import BudgetError, ValidationError

DEFAULT_BALL_BUDGET = 1_000_000


# ---------------------------------------------------------------------------
# carriers: concrete element arithmetic with canonical, hashable forms
# ---------------------------------------------------------------------------

class IntegerCarrier:
    """Additive integers."""

    name = "integers"

    def identity(self):
        return 0

    def mul(self, a, b):
        return a + b

    def inv(self, a):
        return -a

    def key(self, a):
        return a

    def encode(self, a):
        return a

    def decode(self, obj):
        return int(obj)

    def label(self, a) -> str:
        return str(a)


class CyclicCarrier:
    """Residues modulo m."""

    name = "cyclic"

    def __init__(self, modulus: int):
        self.modulus = modulus

    def identity(self):
        return 0

    def mul(self, a, b):
        return (a + b) % self.modulus

    def inv(self, a):
        return (-a) % self.modulus

    def key(self, a):
        return a

    def encode(self, a):
        return a

    def decode(self, obj):
        return int(obj) % self.modulus

    def label(self, a) -> str:
        return str(a)


class FreeWordCarrier:
    """Freely reduced words; the letter i is +i, its inverse is -i (1-based)."""

    name = "free"

    def __init__(self, rank: int):
        if not 1 <= rank <= 26:
            raise ValidationError("free rank must be between 1 and 26", rank=rank)
        self.rank = rank

    def identity(self):
        return ()

    def mul(self, a, b):
        out = list(a)
        for s in b:
            if out and out[-1] == -s:
                out.pop()
            else:
                out.append(s)
        return tuple(out)

    def inv(self, a):
        return tuple(-s for s in reversed(a))

    def key(self, a):
        return (len(a), a)

    def encode(self, a) -> str:
        return "".join(chr(ord("a") + s - 1) if s > 0 else chr(ord("A") - s - 1) for s in a)

    def decode(self, obj):
        word = []
        for ch in str(obj):
            if ch.islower():
                word.append(ord(ch) - ord("a") + 1)
            else:
                word.append(-(ord(ch) - ord("A") + 1))
        return tuple(word)

    def label(self, a) -> str:
        return self.encode(a) or "1"


class MatrixCarrier:
    """2x2 determinant-one integer matrices, optionally with entries modulo m."""

    name = "sl2"

    def __init__(self, modulus: int | None = None):
        self.modulus = modulus

    def _reduce(self, m):
        if self.modulus is None:
            return m
        p = self.modulus
        return ((m[0][0] % p, m[0][1] % p), (m[1][0] % p, m[1][1] % p))

    def identity(self):
        return self._reduce(((1, 0), (0, 1)))

    def mul(self, a, b):
        (a11, a12), (a21, a22) = a
        (b11, b12), (b21, b22) = b
        m = ((a11 * b11 + a12 * b21, a11 * b12 + a12 * b22),
             (a21 * b11 + a22 * b21, a21 * b12 + a22 * b22))
        return self._reduce(m)

    def inv(self, a):
        # adjugate; valid because det == 1
        (a11, a12), (a21, a22) = a
        return self._reduce(((a22, -a12), (-a21, a11)))

    def key(self, a):
        return (a[0][0], a[0][1], a[1][0], a[1][1])

    def encode(self, a):
        return [[a[0][0], a[0][1]], [a[1][0], a[1][1]]]

    def decode(self, obj):
        return self._reduce(((int(obj[0][0]), int(obj[0][1])), (int(obj[1][0]), int(obj[1][1]))))

    def label(self, a) -> str:
        return f"{a[0][0]},{a[0][1]};{a[1][0]},{a[1][1]}"


def _perm_inverse(p: tuple[int, ...]) -> tuple[int, ...]:
    out = [0] * len(p)
    for i, v in enumerate(p):
        out[v] = i
    return tuple(out)


class PermTupleCarrier:
    """Tuples of permutations (one per level), composed coordinatewise.

    mul(a, b) applies b first: (a*b)[i] = a[b[i]].
    """

    name = "perm_tuple"

    def __init__(self, sizes: Sequence[int]):
        self.sizes = tuple(sizes)

    def identity(self):
        return tuple(tuple(range(m)) for m in self.sizes)

    def mul(self, a, b):
        return tuple(tuple(pa[i] for i in pb) for pa, pb in zip(a, b))

    def inv(self, a):
        return tuple(_perm_inverse(p) for p in a)

    def key(self, a):
        return a

    def encode(self, a):
        return [list(p) for p in a]

    def decode(self, obj):
        return tuple(tuple(int(v) for v in p) for p in obj)

    def label(self, a) -> str:
        return "|".join("".join(str(v) for v in p) for p in a)


# ---------------------------------------------------------------------------
# marked groups
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class MarkedGroup:
    """A finitely generated group with a fixed symmetric generating set.

    ``generators`` is an ordered tuple of symbols, closed under formal
    inversion via ``inverse_symbol``; ``generator_values`` evaluates each
    symbol in the carrier.
    """

    name: str
    generators: tuple[str, ...]
    inverse_symbol: dict[str, str]
    generator_values: dict[str, Any]
    carrier: Any

    def __post_init__(self):
        ident = self.carrier.identity()
        for s in self.generators:
            t = self.inverse_symbol.get(s)
            if t is None or t not in self.generator_values:
                raise ValidationError("generating set is not symmetric", symbol=s)
            if self.generator_values[s] == ident:
                raise ValidationError("identity listed as a generator", symbol=s)
            if self.carrier.inv(self.generator_values[s]) != self.generator_values[t]:
                raise ValidationError("evaluation does not respect inversion", symbol=s)

    def identity(self):
        return self.carrier.identity()

    def eval_word(self, word: Sequence[str]):
        x = self.carrier.identity()
        for s in word:
            try:
                v = self.generator_values[s]
            except KeyError:
                raise ValidationError("unknown generator symbol", symbol=s) from None
            x = self.carrier.mul(x, v)
        return x

    def invert_word(self, word: Sequence[str]) -> tuple[str, ...]:
        return tuple(self.inverse_symbol[s] for s in reversed(word))

    def ball(self, radius: int, budget: int = DEFAULT_BALL_BUDGET) -> list[tuple[Any, int]]:
        """B_radius(1) with exact word distances, sorted by (distance, canonical key)."""
        if radius < 0:
            raise ValidationError("radius must be nonnegative", radius=radius)
        dist = {self.identity(): 0}
        frontier = [self.identity()]
        for r in range(1, radius + 1):
            new = []
            for x in frontier:
                for s in self.generators:
                    y = self.carrier.mul(x, self.generator_values[s])
                    if y not in dist:
                        dist[y] = r
                        new.append(y)
                        if len(dist) > budget:
                            raise BudgetError("ball budget exceeded", budget=budget, radius=r)
            frontier = new
        return sorted(dist.items(), key=lambda kv: (kv[1], self.carrier.key(kv[0])))


def marked_integers(steps: Sequence[int] = (1,), name: str = "Z") -> MarkedGroup:
    """Z marked with the symmetric step set {+-s : s in steps}."""
    steps = tuple(sorted(set(int(s) for s in steps)))
    if any(s <= 0 for s in steps):
        raise ValidationError("steps must be positive", steps=steps)
    gens, invs, vals = [], {}, {}
    for s in steps:
        gens += [f"+{s}", f"-{s}"]
        invs[f"+{s}"] = f"-{s}"
        invs[f"-{s}"] = f"+{s}"
        vals[f"+{s}"] = s
        vals[f"-{s}"] = -s
    return MarkedGroup(name, tuple(gens), invs, vals, IntegerCarrier())


def marked_free(rank: int, name: str | None = None) -> MarkedGroup:
    """F_rank marked with its letters and their formal inverses (a, A, b, B, ...)."""
    carrier = FreeWordCarrier(rank)
    gens, invs, vals = [], {}, {}
    for i in range(1, rank + 1):
        lo, hi = chr(ord("a") + i - 1), chr(ord("A") + i - 1)
        gens += [lo, hi]
        invs[lo], invs[hi] = hi, lo
        vals[lo], vals[hi] = (i,), (-i,)
    return MarkedGroup(name or f"F{rank}", tuple(gens), invs, vals, carrier)


def marked_sl2(name: str = "SL2(Z)") -> MarkedGroup:
    """SL2(Z) marked with the elementary matrices e12(+-1), e21(+-1)."""
    carrier = MatrixCarrier()
    vals = {
        "e12+": ((1, 1), (0, 1)),
        "e12-": ((1, -1), (0, 1)),
        "e21+": ((1, 0), (1, 1)),
        "e21-": ((1, 0), (-1, 1)),
    }
    invs = {"e12+": "e12-", "e12-": "e12+", "e21+": "e21-", "e21-": "e21+"}
    return MarkedGroup(name, ("e12+", "e12-", "e21+", "e21-"), invs, vals, carrier)


# ---------------------------------------------------------------------------
# finite quotients
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class FiniteQuotient:
    """A finite quotient with its Cayley word metric.

    Elements are stored in canonical order (BFS layer, then carrier key); the
    word metric is left-invariant and evaluated as d(x, y) = dist0[inv(x) * y].
    """

    parent: MarkedGroup
    level: int
    carrier: Any
    elements: tuple
    generator_images: dict[str, int]
    dist0: tuple[int, ...]

    def __post_init__(self):
        self.index = {x: i for i, x in enumerate(self.elements)}
        self._inv = None
        self._dmat = None
        self._neighbors = None

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def size(self) -> int:
        return len(self.elements)

    @property
    def identity_index(self) -> int:
        return 0

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.carrier.label(x) for x in self.elements)

    def mul(self, i: int, j: int) -> int:
        return self.index[self.carrier.mul(self.elements[i], self.elements[j])]

    def inv(self, i: int) -> int:
        if self._inv is None:
            self._inv = tuple(self.index[self.carrier.inv(x)] for x in self.elements)
        return self._inv[i]

    def dist(self, i: int, j: int) -> int:
        return self.dist0[self.mul(self.inv(i), j)]

    def eval_word(self, word: Sequence[str]) -> int:
        i = 0
        for s in word:
            try:
                i = self.mul(i, self.generator_images[s])
            except KeyError:
                raise ValidationError("unknown generator symbol", symbol=s) from None
        return i

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Distinct non-identity generator moves; the simple Cayley graph."""
        if self._neighbors is None:
            images = sorted({g for g in self.generator_images.values() if g != 0})
            self._neighbors = tuple(
                tuple(sorted({self.mul(x, g) for g in images} - {x})) for x in range(self.order)
            )
        return self._neighbors[i]

    def distance_matrix(self) -> list[list[int]]:
        if self._dmat is None:
            n = self.order
            self._dmat = [[self.dist0[self.mul(self.inv(i), j)] for j in range(n)] for i in range(n)]
        return self._dmat

    def to_dot(self) -> str:
        lines = [f'digraph "{self.parent.name}/level{self.level}" {{']
        for i, lab in enumerate(self.labels):
            lines.append(f'  n{i} [label="{lab}"];')
        for s in self.parent.generators:
            g = self.generator_images[s]
            for i in range(self.order):
                lines.append(f'  n{i} -> n{self.mul(i, g)} [label="{s}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _close_under_images(carrier, images: dict[str, Any], declared_order: int | None,
                        budget: int = DEFAULT_BALL_BUDGET):
    """Layered BFS closure from the identity; layers sorted by canonical key."""
    ident = carrier.identity()
    dist = {ident: 0}
    order_of = [ident]
    frontier = [ident]
    r = 0
    while frontier:
        r += 1
        new = set()
        for x in frontier:
            for v in images.values():
                y = carrier.mul(x, v)
                if y not in dist and y not in new:
                    new.add(y)
        if len(dist) + len(new) > budget:
            raise BudgetError("element enumeration budget exceeded", budget=budget)
        frontier = sorted(new, key=carrier.key)
        for y in frontier:
            dist[y] = r
        order_of.extend(frontier)
    if declared_order is not None and len(order_of) != declared_order:
        raise ValidationError(
            "generator images do not generate the declared group",
            declared=declared_order, reached=len(order_of),
            unreached=declared_order - len(order_of),
        )
    dist0 = tuple(dist[x] for x in order_of)
    return tuple(order_of), dist0


def build_quotient(parent: MarkedGroup, level: int, carrier, image_values: dict[str, Any],
                   declared_order: int | None = None, budget: int = DEFAULT_BALL_BUDGET) -> FiniteQuotient:
    elements, dist0 = _close_under_images(carrier, image_values, declared_order, budget)
    index = {x: i for i, x in enumerate(elements)}
    images = {s: index[v] for s, v in image_values.items()}
    q = FiniteQuotient(parent, level, carrier, elements, images, dist0)
    for s, gi in q.generator_images.items():
        if gi != 0 and q.dist0[gi] != 1:
            raise ValidationError("generator image not at distance one", symbol=s)
    return q


def cyclic_quotient(modulus: int, steps: Sequence[int] = (1,), level: int = 1,
                    parent: MarkedGroup | None = None) -> FiniteQuotient:
    """Z/mZ with the images of the marked step set; handy as a standalone space."""
    parent = parent or marked_integers(steps)
    carrier = CyclicCarrier(modulus)
    values = {s: parent.generator_values[s] % modulus for s in parent.generators}
    return build_quotient(parent, level, carrier, values, declared_order=modulus)


# ---------------------------------------------------------------------------
# normal chains
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class NormalChain:
    """Quotients along a decreasing chain, with connecting maps and projections."""

    group: MarkedGroup
    family: str
    quotients: tuple[FiniteQuotient, ...]
    connecting: tuple[tuple[int, ...], ...]  # [i] maps level i+2 indices to level i+1 indices
    projections: tuple[Callable[[Any], Any], ...]  # carrier element -> quotient element value

    @property
    def depth(self) -> int:
        return len(self.quotients)

    def project(self, level: int, element) -> int:
        """Index of the image of a carrier element in the level-th quotient (1-based level)."""
        q = self.quotients[level - 1]
        return q.index[self.projections[level - 1](element)]

    def validate(self) -> None:
        for i, table in enumerate(self.connecting):
            hi, lo = self.quotients[i + 1], self.quotients[i]
            if sorted(set(table)) != list(range(lo.order)):
                raise ValidationError("connecting map not surjective", level=i + 1)
            for s in self.group.generators:
                g_hi, g_lo = hi.generator_images[s], lo.generator_images[s]
                for x in range(hi.order):
                    if table[hi.mul(x, g_hi)] != lo.mul(table[x], g_lo):
                        raise ValidationError("connecting map does not commute", level=i + 1, symbol=s)


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _sl2_order(modulus: int, primes: Sequence[int]) -> int:
    order = 1
    for p in primes:
        order *= p * (p * p - 1)
    return order


def _perm_from_text(text: str):
    perm = tuple(int(ch) for ch in text.strip())
    if sorted(perm) != list(range(len(perm))):
        raise ValidationError("not a permutation in one-line form", text=text)
    return perm


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def build_family(family: str, depth: int, budget: int = DEFAULT_BALL_BUDGET) -> NormalChain:
    """Build a normal chain of the requested depth from a family descriptor."""
    if depth < 1:
        raise ValidationError("depth must be at least 1", depth=depth)
    kind, _, rest = family.partition(":")

    if kind == "cyclic":
        parts = rest.split(":")
        k = int(parts[0])
        start = int(parts[1]) if len(parts) > 1 and parts[1] else 1
        if k < 2:
            raise ValidationError("cyclic tower needs k >= 2", k=k)
        if start < 1:
            raise ValidationError("cyclic tower start must be >= 1", start=start)
        group = marked_integers((1,))
        quotients, projections = [], []
        for n in range(1, depth + 1):
            m = k ** (start + n - 1)
            carrier = CyclicCarrier(m)
            values = {s: group.generator_values[s] % m for s in group.generators}
            quotients.append(build_quotient(group, n, carrier, values, declared_order=m, budget=budget))
            projections.append(lambda x, m=m: x % m)
        connecting = tuple(
            tuple(quotients[i].index[x % quotients[i].carrier.modulus]
                  for x in quotients[i + 1].elements)
            for i in range(depth - 1)
        )
        chain = NormalChain(group, family, tuple(quotients), connecting, tuple(projections))

    elif kind == "sl2":
        primes = _parse_int_list(rest)
        if len(set(primes)) != len(primes) or any(p == 2 or not _is_prime(p) for p in primes):
            raise ValidationError("sl2 family needs distinct odd primes", primes=primes)
        if depth > len(primes):
            raise ValidationError("depth exceeds supplied primes", depth=depth, primes=primes)
        group = marked_sl2()
        quotients, projections = [], []
        for n in range(1, depth + 1):
            m = 1
            for p in primes[:n]:
                m *= p
            carrier = MatrixCarrier(modulus=m)
            values = {s: carrier._reduce(group.generator_values[s]) for s in group.generators}
            declared = _sl2_order(m, primes[:n])
            quotients.append(build_quotient(group, n, carrier, values, declared_order=declared, budget=budget))
            projections.append(lambda x, c=carrier: c._reduce(x))
        connecting = tuple(
            tuple(quotients[i].index[quotients[i].carrier._reduce(x)]
                  for x in quotients[i + 1].elements)
            for i in range(depth - 1)
        )
        chain = NormalChain(group, family, tuple(quotients), connecting, tuple(projections))

    elif kind == "free":
        rank_text, _, spec = rest.partition(":")
        rank = int(rank_text)
        level_specs = [lv for lv in spec.split("|") if lv]
        if depth > len(level_specs):
            raise ValidationError("depth exceeds supplied levels", depth=depth, levels=len(level_specs))
        group = marked_free(rank)
        per_level = []  # list of dicts symbol -> permutation
        sizes = []
        for lv, text in enumerate(level_specs[:depth], start=1):
            perms = [_perm_from_text(p) for p in text.split(",")]
            if len(perms) != rank:
                raise ValidationError("one image per letter required", level=lv, got=len(perms))
            m = len(perms[0])
            if any(len(p) != m for p in perms):
                raise ValidationError("images at one level must share a degree", level=lv)
            images = {}
            for i, p in enumerate(perms):
                lo, hi = chr(ord("a") + i), chr(ord("A") + i)
                images[lo] = p
                images[hi] = _perm_inverse(p)
            # each level must generate the full symmetric group on its points
            single = PermTupleCarrier((m,))
            _close_under_images(single, {s: (p,) for s, p in images.items()},
                                declared_order=_factorial(m), budget=budget)
            per_level.append(images)
            sizes.append(m)
        quotients, projections = [], []
        for n in range(1, depth + 1):
            carrier = PermTupleCarrier(sizes[:n])
            values = {s: tuple(per_level[i][s] for i in range(n)) for s in group.generators}
            quotients.append(build_quotient(group, n, carrier, values, budget=budget))

            def project(word, vals=values, carrier=carrier):
                x = carrier.identity()
                for letter in word:
                    sym = chr(ord("a") + letter - 1) if letter > 0 else chr(ord("A") - letter - 1)
                    x = carrier.mul(x, vals[sym])
                return x

            projections.append(project)
        connecting = tuple(
            tuple(quotients[i].index[x[: i + 1]] for x in quotients[i + 1].elements)
            for i in range(depth - 1)
        )
        chain = NormalChain(group, family, tuple(quotients), connecting, tuple(projections))

    else:
        raise ValidationError("unknown family", family=family)

    chain.validate()
    return chain


# ---------------------------------------------------------------------------
# metric queries
# ---------------------------------------------------------------------------

def word_metric(q: FiniteQuotient, x: int, y: int) -> int:
    """Shortest-word distance between two quotient elements."""
    if not (0 <= x < q.order and 0 <= y < q.order):
        raise ValidationError("element index out of range", x=x, y=y, order=q.order)
    return q.dist(x, y)


def ball_in_group(g: MarkedGroup, r: int, budget: int = DEFAULT_BALL_BUDGET) -> list[tuple[Any, int]]:
    """B_r(1) in the infinite marked group, with exact word distances."""
    return g.ball(r, budget)


class InjectivityRadius(NamedTuple):
    value: int
    saturated: bool  # True means 'at least r_max': no collision in the probed range

    def __str__(self) -> str:
        return f">= {self.value}" if self.saturated else str(self.value)


def injectivity_radius(g: MarkedGroup, q: FiniteQuotient, r_max: int,
                       project: Callable[[Any], Any] | None = None,
                       budget: int = DEFAULT_BALL_BUDGET) -> InjectivityRadius:
    """Largest r <= r_max with the projection injective on B_r(1)."""
    if r_max < 0:
        raise ValidationError("r_max must be nonnegative", r_max=r_max)
    if project is None:
        project = _default_projection(g, q)
    seen: dict[Any, Any] = {}
    ball = g.ball(r_max, budget)
    radius = 0
    for x, d in ball:  # sorted by distance
        image = project(x)
        if image in seen and seen[image] != x:
            return InjectivityRadius(d - 1, False)
        seen[image] = x
        radius = d
    return InjectivityRadius(radius, True)


def _default_projection(g: MarkedGroup, q: FiniteQuotient) -> Callable[[Any], Any]:
    carrier = q.carrier
    if isinstance(carrier, CyclicCarrier):
        return lambda x: x % carrier.modulus
    if isinstance(carrier, MatrixCarrier) and carrier.modulus is not None:
        return lambda x: carrier._reduce(x)
    raise ValidationError("no default projection for this carrier", carrier=type(carrier).__name__)


def chain_injectivity_radii(chain: NormalChain, r_max: int,
                            budget: int = DEFAULT_BALL_BUDGET) -> list[InjectivityRadius]:
    return [
        injectivity_radius(chain.group, q, r_max, project=chain.projections[i], budget=budget)
        for i, q in enumerate(chain.quotients)
    ]


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def chain_to_payload(chain: NormalChain) -> dict:
    return {
        "format": "chain/v1",
        "group": {
            "name": chain.group.name,
            "family": chain.family,
            "generators": list(chain.group.generators),
        },
        "quotients": [
            {
                "level": q.level,
                "order": q.order,
                "elements": [q.carrier.encode(x) for x in q.elements],
                "generator_images": {s: q.generator_images[s] for s in chain.group.generators},
                "identity_index": q.identity_index,
                "distances": list(q.dist0),
            }
            for q in chain.quotients
        ],
        "connecting_maps": [list(t) for t in chain.connecting],
    }


def chain_from_payload(payload: dict, budget: int = DEFAULT_BALL_BUDGET) -> NormalChain:
    """Rebuild from the family descriptor, then check the stored tables match."""
    if payload.get("format") != "chain/v1":
        raise ValidationError("not a chain payload", format=payload.get("format"))
    family = payload["group"]["family"]
    depth = len(payload["quotients"])
    chain = build_family(family, depth, budget=budget)
    for q, stored in zip(chain.quotients, payload["quotients"]):
        if q.order != stored["order"] or list(q.dist0) != list(stored["distances"]):
            raise ValidationError("stored chain disagrees with its family", level=q.level)
        if [q.carrier.encode(x) for x in q.elements] != stored["elements"]:
            raise ValidationError("stored elements disagree with canonical order", level=q.level)
        if {s: i for s, i in stored["generator_images"].items()} != q.generator_images:
            raise ValidationError("stored generator images disagree", level=q.level)
    if [list(t) for t in chain.connecting] != payload["connecting_maps"]:
        raise ValidationError("stored connecting maps disagree")
    return chain
