"""Lifting quotient-level coarse maps to balls of the infinite groups and
extracting a compatible partial map by pigeonhole over agreeing restrictions.

A level map phi_n: G/G_n -> H/H_n lifts to B_r(1_G) -> B_s(1_H) whenever both
projections are injective on the relevant balls (s = ceil(rho_plus(r))); the
lifted value of x is the unique ball element over phi_n(x mod G_n).  The
diagonal construction walks r = 1..R, keeping at each radius the largest set
of surviving levels whose lifts agree on B_r(1_G); ties prefer lower levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

from .coarse import ControlData, MapRecord
from .errors import InfeasibleError, ValidationError
from .groups import DEFAULT_BALL_BUDGET, MarkedGroup, NormalChain
from .utils import number_to_json


@dataclass(eq=False)
class PartialMap:
    """A basepoint-preserving map on B_R(1_G) into a ball of H.

    ``table`` maps carrier elements of G to carrier elements of H;
    ``provenance`` records, per radius, the chain levels whose lifts agree.
    """

    source: MarkedGroup
    target: MarkedGroup
    radius: int
    table: dict[Any, Any]
    provenance: dict[int, tuple[int, ...]]

    def __post_init__(self):
        if self.table.get(self.source.identity()) != self.target.identity():
            raise ValidationError("partial map must preserve the basepoint")

    def value(self, x):
        return self.table[x]

    def restricted(self, r: int, ball) -> dict[Any, Any]:
        inside = {x for x, d in ball if d <= r}
        return {x: v for x, v in self.table.items() if x in inside}


def lift(phi: MapRecord, chain_g: NormalChain, chain_h: NormalChain, level: int,
         r: int, rho_plus, ball_budget: int = DEFAULT_BALL_BUDGET) -> dict[Any, Any]:
    """Lift a level map through the commuting square onto B_r(1_G).

    Preconditions: both quotient projections are injective on the balls in
    play (radius r on the G side, ceil(rho_plus(r)) on the H side) and phi is
    basepointed.  Errors name the failing side and the achieved radius.
    """
    if r < 0:
        raise ValidationError("radius must be nonnegative", r=r)
    q_g = chain_g.quotients[level - 1]
    q_h = chain_h.quotients[level - 1]
    if phi.domain is not q_g or phi.codomain is not q_h:
        if phi.domain.size != q_g.size or phi.codomain.size != q_h.size:
            raise ValidationError("map does not live at the requested level", level=level)
    if phi.table[q_g.identity_index] != q_h.identity_index:
        raise ValidationError("level map must be basepointed", level=level)

    s = math.ceil(rho_plus(r))
    ball_g = chain_g.group.ball(r, ball_budget)
    ball_h = chain_h.group.ball(s, ball_budget)

    proj_g = chain_g.projections[level - 1]
    proj_h = chain_h.projections[level - 1]

    seen: dict[int, Any] = {}
    for x, d in ball_g:
        i = q_g.index[proj_g(x)]
        if i in seen and seen[i] != x:
            raise ValidationError("projection not injective on the source ball",
                                  side="G", level=level, requested=r, achieved=d - 1)
        seen[i] = x

    reverse: dict[int, Any] = {}
    for y, d in ball_h:
        j = q_h.index[proj_h(y)]
        if j in reverse and reverse[j] != y:
            raise ValidationError("projection not injective on the target ball",
                                  side="H", level=level, requested=s, achieved=d - 1)
        reverse[j] = y

    table: dict[Any, Any] = {}
    for x, _ in ball_g:
        j = phi.table[q_g.index[proj_g(x)]]
        if j not in reverse:
            raise ValidationError("image escapes the target ball (rho_plus violated)",
                                  level=level, witness=chain_g.group.carrier.label(x),
                                  target_radius=s)
        table[x] = reverse[j]
    return table


def liftable_radius(chain_g: NormalChain, chain_h: NormalChain, level: int, r_max: int,
                    rho_plus, ball_budget: int = DEFAULT_BALL_BUDGET) -> int:
    """Largest r <= r_max at which the two injectivity preconditions hold."""
    from .groups import injectivity_radius

    inj_g = injectivity_radius(chain_g.group, chain_g.quotients[level - 1], r_max,
                               project=chain_g.projections[level - 1], budget=ball_budget)
    s_max = math.ceil(rho_plus(r_max))
    inj_h = injectivity_radius(chain_h.group, chain_h.quotients[level - 1], s_max,
                               project=chain_h.projections[level - 1], budget=ball_budget)
    r = 0
    for cand in range(1, r_max + 1):
        if cand <= inj_g.value and math.ceil(rho_plus(cand)) <= inj_h.value:
            r = cand
    return r


def diagonal_limit(maps: Sequence[tuple[int, MapRecord]], chain_g: NormalChain,
                   chain_h: NormalChain, controls: ControlData, radius: int,
                   ball_budget: int = DEFAULT_BALL_BUDGET) -> PartialMap:
    """Extract the common lift at the requested radius from per-level maps.

    ``maps`` pairs each chain level (1-based) with its verified level map.  At
    each radius the surviving levels are those from the previous radius that
    still lift, grouped by their lifted table; the largest agreeing class wins
    and ties prefer the class containing the lowest level index.
    """
    if radius < 1:
        raise ValidationError("radius must be at least 1", radius=radius)
    if not maps:
        raise ValidationError("no level maps supplied")
    levels = [lv for lv, _ in maps]
    if len(set(levels)) != len(levels):
        raise ValidationError("duplicate levels supplied", levels=levels)
    by_level = dict(maps)

    rho_plus = controls.rho_plus
    ball_g = chain_g.group.ball(radius, ball_budget)

    surviving = sorted(by_level)
    provenance: dict[int, tuple[int, ...]] = {}
    common: dict[Any, Any] = {}
    for r in range(1, radius + 1):
        inside = [x for x, d in ball_g if d <= r]
        lifted: dict[int, tuple] = {}
        for lv in surviving:
            try:
                full = lift(by_level[lv], chain_g, chain_h, lv, r, rho_plus, ball_budget)
            except ValidationError:
                continue
            lifted[lv] = tuple(sorted(((x, full[x]) for x in inside),
                                      key=lambda kv: chain_g.group.carrier.key(kv[0])))
        if not lifted:
            raise InfeasibleError("no level lifts at this radius", radius=r,
                                  surviving=list(surviving))
        classes: dict[tuple, list[int]] = {}
        for lv in sorted(lifted):
            classes.setdefault(lifted[lv], []).append(lv)
        best = max(classes.values(), key=lambda lvls: (len(lvls), -min(lvls)))
        surviving = best
        provenance[r] = tuple(best)
        common = dict(lifted[best[0]])

    return PartialMap(chain_g.group, chain_h.group, radius, common, provenance)


# ---------------------------------------------------------------------------
# verification of partial maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartialVerifyReport:
    passed: bool
    distortion: Any
    witness: tuple | None
    density_radius: Any  # achieved density of the image inside B_ceil(rho_plus(R))(1_H)

    def as_payload(self) -> dict:
        return {
            "passed": self.passed,
            "distortion": number_to_json(self.distortion),
            "witness": list(self.witness) if self.witness else None,
            "density_radius": number_to_json(self.density_radius),
        }


def verify_partial(pm: PartialMap, controls: ControlData,
                   ball_budget: int = DEFAULT_BALL_BUDGET) -> PartialVerifyReport:
    """Check both control inequalities over all pairs of the table.

    Density is never asserted for partial maps (it is an asymptotic notion);
    the achieved density radius inside the target ball is only recorded.
    """
    src, tgt = pm.source, pm.target
    s = math.ceil(controls.rho_plus(pm.radius))
    dist_g = {x: d for x, d in src.ball(2 * pm.radius, ball_budget)}
    dist_h = {y: d for y, d in tgt.ball(2 * s, ball_budget)}

    def d_g(x1, x2):
        return dist_g[src.carrier.mul(src.carrier.inv(x1), x2)]

    def d_h(y1, y2):
        return dist_h[tgt.carrier.mul(tgt.carrier.inv(y1), y2)]

    items = sorted(pm.table.items(), key=lambda kv: src.carrier.key(kv[0]))
    passed = True
    witness = None
    worst = 0
    for i, (x1, y1) in enumerate(items):
        for x2, y2 in items[i:]:
            t = d_g(x1, x2)
            dy = d_h(y1, y2)
            lo, hi = controls.bounds(t)
            if passed and not lo <= dy <= hi:
                passed = False
                witness = ("lower" if dy < lo else "upper",
                           src.carrier.label(x1), src.carrier.label(x2))
            worst = max(worst, abs(dy - t))
    image = set(pm.table.values())
    ball_h = tgt.ball(s, ball_budget)
    density = max(min(d_h(y, v) for v in image) for y, _ in ball_h)
    return PartialVerifyReport(passed, worst, witness, density)


# ---------------------------------------------------------------------------
# the action on partial maps
# ---------------------------------------------------------------------------

def action_level_radius(r: int, g_length: int, rho_plus) -> int:
    """Index-shift bookkeeping for acting by a word of the given length:
    max(r + |g^-1|, ceil(rho_plus(r + |g^-1|)))."""
    shifted = r + g_length
    return max(shifted, math.ceil(rho_plus(shifted)))


def act_on_partial(word: Sequence[str], pm: PartialMap) -> PartialMap:
    """[g.f](x) = f(g^-1)^-1 f(g^-1 x) wherever defined; radius drops by |g|."""
    g_len = len(word)
    if g_len > pm.radius:
        raise ValidationError("word longer than the partial map radius",
                              word_length=g_len, radius=pm.radius)
    src, tgt = pm.source, pm.target
    g = src.eval_word(word)
    g_inv = src.carrier.inv(g)
    anchor = tgt.carrier.inv(pm.table[g_inv])
    new_radius = pm.radius - g_len
    ball = src.ball(new_radius)
    table = {}
    for x, _ in ball:
        pre = src.carrier.mul(g_inv, x)
        table[x] = tgt.carrier.mul(anchor, pm.table[pre])
    return PartialMap(src, tgt, new_radius, table, dict(pm.provenance))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def partialmap_to_payload(pm: PartialMap) -> dict:
    enc_s, enc_t = pm.source.carrier.encode, pm.target.carrier.encode
    items = sorted(pm.table.items(), key=lambda kv: pm.source.carrier.key(kv[0]))
    return {
        "format": "partialmap/v1",
        "source": pm.source.name,
        "target": pm.target.name,
        "radius": pm.radius,
        "table": [[enc_s(x), enc_t(y)] for x, y in items],
        "provenance": {str(r): list(lvls) for r, lvls in sorted(pm.provenance.items())},
    }


def survival_table_text(pm: PartialMap) -> str:
    lines = ["radius  surviving levels"]
    for r in sorted(pm.provenance):
        lines.append(f"{r:>6}  {','.join(str(lv) for lv in pm.provenance[r])}")
    return "\n".join(lines) + "\n"
