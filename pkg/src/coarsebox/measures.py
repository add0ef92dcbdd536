"""Probability measures on finite point sets: pushforwards, the Prokhorov
metric by exhaustive subset sweep, group translation, invariance defects, and
weak* limit evidence.

The Prokhorov condition uses closed neighborhoods A^eta = {x : d(x, A) <= eta},
which makes the infimum attained on finite spaces.  Exact mode sweeps all
2^|X| subsets (|X| <= 22); larger spaces only get certified bounds, never a
silent approximation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .coarse import MapRecord
from .errors import ValidationError
from .utils import number_from_json, number_to_json

PROKHOROV_EXACT_MAX = 22
PROKHOROV_RESOLUTION = 1e-12


@dataclass(eq=False)
class FiniteMeasure:
    """Nonnegative weights summing to one over a finite metric space."""

    space: Any
    weights: tuple[Any, ...]

    def __post_init__(self):
        if len(self.weights) != self.space.size:
            raise ValidationError("one weight per point required",
                                  weights=len(self.weights), points=self.space.size)
        if any(w < 0 for w in self.weights):
            raise ValidationError("negative weight")
        total = sum(self.weights)
        if isinstance(total, Fraction) or isinstance(total, int):
            if total != 1:
                raise ValidationError("weights must sum to 1", total=str(total))
        elif abs(total - 1.0) > 1e-12:
            raise ValidationError("weights must sum to 1", total=total)

    def mass(self, points: Iterable[int]):
        return sum(self.weights[i] for i in points)

    def same_space(self, other: "FiniteMeasure") -> bool:
        if self.space is other.space:
            return True
        if self.space.size != other.space.size:
            return False
        n = self.space.size
        return all(self.space.dist(i, j) == other.space.dist(i, j)
                   for i in range(n) for j in range(i + 1, n))


def uniform(space) -> FiniteMeasure:
    if space.size == 0:
        raise ValidationError("empty space has no uniform measure")
    w = Fraction(1, space.size)
    return FiniteMeasure(space, (w,) * space.size)


def point_mass(space, point: int) -> FiniteMeasure:
    w = [Fraction(0)] * space.size
    w[point] = Fraction(1)
    return FiniteMeasure(space, tuple(w))


def pushforward(mu: FiniteMeasure, f: MapRecord) -> FiniteMeasure:
    """Mass of each codomain point is the sum over its fiber; total mass exact."""
    if f.domain.size != mu.space.size:
        raise ValidationError("map not total on the measure's space")
    out = [Fraction(0) if isinstance(mu.weights[0], (int, Fraction)) else 0.0] * f.codomain.size
    for i, w in enumerate(mu.weights):
        out[f.table[i]] += w
    return FiniteMeasure(f.codomain, tuple(out))


def total_variation(lam: FiniteMeasure, nu: FiniteMeasure):
    """sup_A |lam(A) - nu(A)| = half the L1 distance of the weight vectors."""
    if not lam.same_space(nu):
        raise ValidationError("measures live on different spaces")
    diff = sum(abs(a - b) for a, b in zip(lam.weights, nu.weights))
    return diff / 2 if isinstance(diff, Fraction) else diff / 2.0


# ---------------------------------------------------------------------------
# the Prokhorov metric
# ---------------------------------------------------------------------------

def _subset_tables(weights: Sequence[float], n: int) -> np.ndarray:
    """value[mask] = sum of weights over the bits of mask (separable DP)."""
    table = np.zeros(1 << n)
    for b in range(n):
        half = 1 << b
        view = table.reshape(-1, 2 * half)
        view[:, half:] = view[:, :half] + weights[b]
    return table


def _neighborhood_masks(dist_rows: list[list[float]], eta: float, n: int) -> np.ndarray:
    """mask of A^eta for every subset A, via OR-composition over the bits."""
    point_mask = np.zeros(n, dtype=np.int64)
    for i in range(n):
        m = 0
        for j in range(n):
            if dist_rows[i][j] <= eta:
                m |= 1 << j
        point_mask[i] = m
    table = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        half = 1 << b
        view = table.reshape(-1, 2 * half)
        view[:, half:] = view[:, :half] | point_mask[b]
    return table


def _max_deficit(lam_t: np.ndarray, nu_t: np.ndarray, hoods: np.ndarray) -> float:
    """max over subsets A of max(lam(A) - nu(A^eta), nu(A) - lam(A^eta))."""
    a = lam_t - nu_t[hoods]
    b = nu_t - lam_t[hoods]
    return float(max(a.max(), b.max()))


def prokhorov(lam: FiniteMeasure, nu: FiniteMeasure, *,
              exact_max: int = PROKHOROV_EXACT_MAX,
              resolution: float = PROKHOROV_RESOLUTION) -> float:
    """inf of eta with lam(A) <= nu(A^eta) + eta and symmetrically, over all A.

    Binary search against the exhaustive subset condition with closed
    neighborhoods; the returned value is feasible and within ``resolution`` of
    the infimum.  Raises for spaces above the exact budget.
    """
    if not lam.same_space(nu):
        raise ValidationError("measures live on different spaces")
    n = lam.space.size
    if n > exact_max:
        raise ValidationError("space too large for the exact subset sweep",
                              size=n, exact_max=exact_max)
    if tuple(lam.weights) == tuple(nu.weights):
        return 0.0
    w_l = [float(w) for w in lam.weights]
    w_n = [float(w) for w in nu.weights]
    dist_rows = [[float(lam.space.dist(i, j)) for j in range(n)] for i in range(n)]
    lam_t = _subset_tables(w_l, n)
    nu_t = _subset_tables(w_n, n)

    def feasible(eta: float) -> bool:
        hoods = _neighborhood_masks(dist_rows, eta, n)
        return _max_deficit(lam_t, nu_t, hoods) <= eta

    lo, hi = 0.0, 1.0  # eta = 1 always works for probability measures
    while hi - lo > resolution:
        mid = (lo + hi) / 2.0
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def prokhorov_bounds(lam: FiniteMeasure, nu: FiniteMeasure) -> tuple[float, float]:
    """Certified (lower, upper) without the exponential sweep, for large spaces.

    Upper: min(total variation, 1).  Lower: the per-set threshold over the
    polynomial family of singletons and closed balls.
    """
    if not lam.same_space(nu):
        raise ValidationError("measures live on different spaces")
    n = lam.space.size
    d = lam.space.dist
    upper = min(float(total_variation(lam, nu)), 1.0)
    radii = sorted({0.0} | {float(d(i, j)) for i in range(n) for j in range(i + 1, n)})
    lower = 0.0
    for center in range(n):
        for radius in radii:
            ball = [i for i in range(n) if float(d(center, i)) <= radius]
            lower = max(lower, _set_threshold(lam, nu, ball, radii))
            lower = max(lower, _set_threshold(nu, lam, ball, radii))
    return min(lower, upper), upper


def _set_threshold(lam: FiniteMeasure, nu: FiniteMeasure, subset: list[int],
                   radii: list[float]) -> float:
    """min eta satisfying lam(A) <= nu(A^eta) + eta for one fixed A."""
    n = lam.space.size
    d = lam.space.dist
    lam_a = float(lam.mass(subset))
    best = None
    for eta0 in radii:
        hood = [j for j in range(n) if any(float(d(j, i)) <= eta0 for i in subset)]
        needed = max(eta0, lam_a - float(nu.mass(hood)))
        later = [r for r in radii if r > eta0]
        cap = later[0] if later else float("inf")
        if needed < cap or not later:
            if best is None or needed < best:
                best = needed
    return max(best or 0.0, 0.0)


# ---------------------------------------------------------------------------
# group actions on finite point sets
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GroupAction:
    """Generator-indexed permutations of a space's points."""

    space: Any
    permutations: dict[str, tuple[int, ...]]
    inverse_symbol: dict[str, str]

    def __post_init__(self):
        n = self.space.size
        for s, p in self.permutations.items():
            if sorted(p) != list(range(n)):
                raise ValidationError("generator table is not a bijection", symbol=s)
        for s, t in self.inverse_symbol.items():
            p, q = self.permutations[s], self.permutations[t]
            if any(q[p[i]] != i for i in range(n)):
                raise ValidationError("inverse generators do not act inversely", symbol=s)

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(sorted(self.permutations))

    def word_permutation(self, word: Sequence[str]) -> tuple[int, ...]:
        n = self.space.size
        perm = tuple(range(n))
        # left action: (s1 s2).x = s1.(s2.x)
        for s in reversed(word):
            try:
                p = self.permutations[s]
            except KeyError:
                raise ValidationError("unknown generator symbol", symbol=s) from None
            perm = tuple(p[perm[i]] for i in range(n))
        return perm

    def apply(self, word: Sequence[str], point: int) -> int:
        return self.word_permutation(word)[point]

    def check_relations(self, group, max_length: int = 4) -> None:
        """Sampled relation check: equal group elements must act identically."""
        seen: dict[Any, tuple[str, ...]] = {}
        for length in range(max_length + 1):
            for word in itertools.product(group.generators, repeat=length):
                value = group.eval_word(word)
                if value in seen:
                    if self.word_permutation(word) != self.word_permutation(seen[value]):
                        raise ValidationError("group relation broken by the action",
                                              word="".join(word), other="".join(seen[value]))
                else:
                    seen[value] = word


def left_translation_action(q) -> GroupAction:
    """A quotient acting on itself by left multiplication."""
    perms = {}
    for s, g in q.generator_images.items():
        perms[s] = tuple(q.mul(g, x) for x in range(q.order))
    return GroupAction(q, perms, dict(q.parent.inverse_symbol))


def mapspace_action(space) -> GroupAction:
    """Generators acting on an enumerated map space's members.

    Requires the member set to be closed under the action, which holds for
    complete enumerations because left translation is a word-metric isometry.
    """
    from .coarse import act

    perms = {}
    for s in space.domain.parent.generators:
        images = []
        for m in space.members:
            idx = space.member_index(act([s], m).table)
            if idx is None:
                raise ValidationError("action leaves the member set", symbol=s,
                                      complete=space.complete)
            images.append(idx)
        perms[s] = tuple(images)
    return GroupAction(space, perms, dict(space.domain.parent.inverse_symbol))


def translate(word: Sequence[str], mu: FiniteMeasure, action: GroupAction) -> FiniteMeasure:
    """(g.mu)(A) = mu(g^-1 A): the weight at g.x is the old weight at x."""
    perm = action.word_permutation(word)
    out = [None] * len(perm)
    for i, w in enumerate(mu.weights):
        out[perm[i]] = w
    return FiniteMeasure(mu.space, tuple(out))


@dataclass(frozen=True)
class InvarianceDefect:
    tv: float
    prokhorov: float
    worst_word: tuple[str, ...]
    per_word: tuple[tuple[str, float, float], ...]  # (word, tv, prokhorov)

    def as_payload(self) -> dict:
        return {
            "tv": self.tv,
            "prokhorov": self.prokhorov,
            "worst_word": "".join(self.worst_word),
            "per_word": [[w, tv, pk] for w, tv, pk in self.per_word],
        }


def invariance_defect(mu: FiniteMeasure, action: GroupAction, word_length_bound: int,
                      symbols: Sequence[str] | None = None) -> InvarianceDefect:
    """Max over words up to the length bound of d(g.mu, mu) in TV and Prokhorov."""
    symbols = tuple(symbols) if symbols is not None else action.symbols
    seen_perms: dict[tuple[int, ...], tuple[str, ...]] = {}
    for length in range(1, word_length_bound + 1):
        for word in itertools.product(symbols, repeat=length):
            perm = action.word_permutation(word)
            seen_perms.setdefault(perm, word)
    rows = []
    worst = (0.0, 0.0, ())
    for perm, word in sorted(seen_perms.items(), key=lambda kv: (len(kv[1]), kv[1])):
        moved = translate(word, mu, action)
        tv = float(total_variation(moved, mu))
        pk = prokhorov(moved, mu)
        rows.append(("".join(word), tv, pk))
        if (pk, tv) > (worst[1], worst[0]):
            worst = (tv, pk, word)
    return InvarianceDefect(max((r[1] for r in rows), default=0.0),
                            max((r[2] for r in rows), default=0.0),
                            worst[2], tuple(rows))


# ---------------------------------------------------------------------------
# weak* limit evidence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeakStarEvidence:
    limit_weights: tuple
    table: tuple[tuple[float, ...], ...]   # d_P(mu_j, mu_k) for all pairs
    envelope: tuple[float, ...]            # sup over pairs with both indices >= m
    cauchy: bool
    tolerance: float

    def as_payload(self) -> dict:
        return {
            "limit": [number_to_json(w) for w in self.limit_weights],
            "table": [list(row) for row in self.table],
            "envelope": list(self.envelope),
            "cauchy": self.cauchy,
            "tolerance": self.tolerance,
        }


def weak_star_evidence(seq: Sequence[FiniteMeasure], tolerance: float = 1e-6) -> WeakStarEvidence:
    """Pairwise Prokhorov Cauchy table with its monotone envelope.

    On a fixed finite space the weak* limit is the pointwise limit; the table
    still runs through d_P because that is the metric the limiting argument
    uses.
    """
    if not seq:
        raise ValidationError("empty sequence")
    first = seq[0]
    for mu in seq[1:]:
        if not mu.same_space(first):
            raise ValidationError("sequence must share one space")
    k = len(seq)
    table = [[0.0] * k for _ in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            table[i][j] = table[j][i] = prokhorov(seq[i], seq[j])
    envelope = []
    for m in range(k):
        tail = [table[i][j] for i in range(m, k) for j in range(i + 1, k)]
        envelope.append(max(tail) if tail else 0.0)
    cauchy = any(e <= tolerance for e in envelope[:-1]) or k == 1
    return WeakStarEvidence(tuple(seq[-1].weights),
                            tuple(tuple(row) for row in table),
                            tuple(envelope), cauchy, tolerance)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def measure_to_payload(mu: FiniteMeasure) -> dict:
    return {
        "format": "measure/v1",
        "weights": {str(lab): number_to_json(w)
                    for lab, w in zip(mu.space.labels, mu.weights)},
    }


def measure_from_payload(payload: dict, space) -> FiniteMeasure:
    if payload.get("format", "measure/v1") != "measure/v1":
        raise ValidationError("not a measure payload", format=payload.get("format"))
    by_label = {str(k): number_from_json(v) for k, v in payload["weights"].items()}
    try:
        weights = tuple(by_label[str(lab)] for lab in space.labels)
    except KeyError as missing:
        raise ValidationError("weight missing for a point", label=str(missing)) from None
    return FiniteMeasure(space, weights)


def defects_to_csv(defect: InvarianceDefect) -> str:
    lines = ["word,tv,prokhorov"]
    for word, tv, pk in defect.per_word:
        lines.append(f"{word},{tv!r},{pk!r}")
    return "\n".join(lines) + "\n"
