"""Box-space assembly over a chain's quotients and coarse-geometric diagnostics.

The box metric routes cross-component distances through per-component anchor
positions on a ray: d((m,x),(n,y)) = d_m(x,1) + |t_m - t_n| + d_n(1,y).  With
t_{n+1} = t_n + diam_n + diam_{n+1} + 1 every cross-component distance exceeds
both component diameters and grows without bound along the chain.

Spectral quantities use the normalized Laplacian L = I - A/deg of the simple
Cayley graph (generator multi-edges collapsed, which is recorded in the
report since it changes the degree).  Diagnostics at finitely many levels are
evidence only; no asymptotic expansion claim is made.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
import numpy as np

from .errors import BudgetError, ValidationError
from .groups import FiniteQuotient, NormalChain
from .utils import parallel_map

DENSE_EIG_MAX = 2000
EIGEN_BUDGET = 5000
CHEEGER_EXACT_MAX = 20
REPORT_CAVEAT = ("finite-stage evidence: diagnostics cover finitely many levels "
                 "and certify no asymptotic expansion property")


@dataclass(eq=False)
class BoxSpace:
    """Disjoint union of a chain's quotients under the through-anchor metric."""

    chain: NormalChain
    anchors: tuple[int, ...]

    @property
    def points(self) -> list[tuple[int, int]]:
        """(level, element index) pairs, level 1-based, in canonical order."""
        return [(q.level, i) for q in self.chain.quotients for i in range(q.order)]

    @property
    def size(self) -> int:
        return sum(q.order for q in self.chain.quotients)

    def dist(self, p: tuple[int, int], q: tuple[int, int]) -> int:
        (m, x), (n, y) = p, q
        qm = self.chain.quotients[m - 1]
        qn = self.chain.quotients[n - 1]
        if m == n:
            return qm.dist(x, y)
        return qm.dist0[x] + abs(self.anchors[m - 1] - self.anchors[n - 1]) + qn.dist0[y]

    def labels(self) -> list[str]:
        return [f"{lv}:{self.chain.quotients[lv - 1].labels[i]}" for lv, i in self.points]


def component_diameter(q: FiniteQuotient) -> int:
    # Cayley graphs are vertex-transitive, so eccentricities are constant.
    return max(q.dist0)


def assemble(chain: NormalChain) -> BoxSpace:
    """Box space over the chain, anchors t_{n+1} = t_n + diam_n + diam_{n+1} + 1."""
    if chain.depth < 1:
        raise ValidationError("chain is empty")
    diams = [component_diameter(q) for q in chain.quotients]
    anchors = [0]
    for n in range(1, chain.depth):
        anchors.append(anchors[-1] + diams[n - 1] + diams[n] + 1)
    return BoxSpace(chain, tuple(anchors))


# ---------------------------------------------------------------------------
# graph diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphDiagnostics:
    level: int
    order: int
    degree: int
    diameter: int
    girth: int | None            # None means no cycle (infinite girth)
    girth_infinite: bool
    spectral_gap: float | None   # lambda_1 of the normalized Laplacian
    spectral_exact: bool         # dense symmetric solve vs iterative extremal
    cheeger_lo: Fraction | float
    cheeger_hi: Fraction | float
    cheeger_exact: bool
    degraded: str | None = None

    def as_row(self) -> dict:
        return {
            "level": self.level,
            "order": self.order,
            "degree": self.degree,
            "diameter": self.diameter,
            "girth": "inf" if self.girth_infinite else self.girth,
            "lambda1": self.spectral_gap,
            "lambda1_exact": self.spectral_exact,
            "cheeger_lo": float(self.cheeger_lo),
            "cheeger_hi": float(self.cheeger_hi),
            "cheeger_exact": self.cheeger_exact,
            "degraded": self.degraded,
        }


def _girth_from_identity(q: FiniteQuotient) -> int | None:
    """Shortest cycle length in the simple Cayley graph.

    BFS from the identity suffices: every cycle can be translated through the
    identity by vertex transitivity, and each non-tree edge (u, w) closes a
    cycle of length dist[u] + dist[w] + 1.
    """
    root = 0
    dist = {root: 0}
    parent = {root: None}
    frontier = [root]
    best = None
    while frontier:
        new = []
        for u in frontier:
            for w in q.neighbors(u):
                if w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    new.append(w)
                elif parent[u] != w and parent.get(w) != u:
                    cycle = dist[u] + dist[w] + 1
                    if best is None or cycle < best:
                        best = cycle
        frontier = new
    return best


# Multithreaded BLAS reductions are not bitwise reproducible, so BLAS is
# pinned to one thread for the whole process and eigensolves are serialized;
# reports then come out byte-identical at any worker-thread count.
from threadpoolctl import threadpool_limits as _threadpool_limits

_BLAS_PIN = _threadpool_limits(limits=1)
_EIG_LOCK = threading.Lock()

_POWER_ITER_CAP = 200_000
_RESIDUAL_TARGET = 1e-9


def _second_adjacency_eigenvalue(q: FiniteQuotient, degree: int) -> float:
    """Second-largest eigenvalue of A/deg by deflated power iteration.

    The matvec is a fixed-order sum of permuted vectors (elementwise numpy
    adds, no BLAS reductions), so the result is bitwise reproducible.  The
    uniform vector is the exact top eigenvector of a connected regular graph
    and is projected out each step.  Stops once the infinity-norm residual of
    the Ritz pair drops below the 1e-9 contract.
    """
    n = q.order
    neighbor_cols = np.array([q.neighbors(i) for i in range(n)], dtype=np.intp)

    def matvec(x: np.ndarray) -> np.ndarray:
        y = np.zeros(n)
        for c in range(neighbor_cols.shape[1]):
            y += x[neighbor_cols[:, c]]
        return y / degree

    # shift to [0, 1] so the dominant deflated eigenpair is the second-largest
    def shifted(x: np.ndarray) -> np.ndarray:
        return 0.5 * (matvec(x) + x)

    rng = np.random.Generator(np.random.PCG64(0))
    x = rng.standard_normal(n)
    for iteration in range(_POWER_ITER_CAP):
        x = x - np.sum(x) / n
        norm = float(np.sqrt(np.sum(x * x)))
        if norm == 0.0:
            raise BudgetError("power iteration collapsed", order=n)
        x = x / norm
        y = shifted(x)
        rho = float(np.sum(x * y))
        if iteration % 8 == 0:
            residual = float(np.max(np.abs(y - rho * x)))
            if residual < _RESIDUAL_TARGET / 2:  # residual doubles after unshifting
                mu2 = 2.0 * rho - 1.0
                return mu2
        x = y
    raise BudgetError("iterative eigensolve did not reach the residual target",
                      order=n, target=_RESIDUAL_TARGET)


def _spectral_gap(q: FiniteQuotient, degree: int) -> tuple[float, bool]:
    n = q.order
    if n <= DENSE_EIG_MAX:
        a = np.zeros((n, n))
        for i in range(n):
            for j in q.neighbors(i):
                a[i, j] = 1.0
        lap = np.eye(n) - a / degree
        with _EIG_LOCK:
            eigs = np.linalg.eigvalsh(lap)
        return float(eigs[1]), True
    with _EIG_LOCK:
        mu2 = _second_adjacency_eigenvalue(q, degree)
    return 1.0 - mu2, False


def _exact_cheeger(q: FiniteQuotient, degree: int) -> Fraction:
    """min over cuts of |edge boundary| / (degree * |smaller side|), by subset sweep."""
    n = q.order
    adj_mask = [0] * n
    for i in range(n):
        for j in q.neighbors(i):
            adj_mask[i] |= 1 << j
    full = (1 << n) - 1
    best = None
    # fix vertex 0 inside S; {S, complement} pairs are then enumerated once
    for mask in range((1 << (n - 1)) - 1):
        s = (mask << 1) | 1  # proper nonempty subsets containing vertex 0
        cut = 0
        m = s
        while m:
            v = (m & -m).bit_length() - 1
            cut += (adj_mask[v] & ~s & full).bit_count()
            m &= m - 1
        size = s.bit_count()
        for side in (size, n - size):
            if 0 < side <= n // 2 or (n % 2 == 0 and side == n // 2):
                ratio = Fraction(cut, degree * side)
                if best is None or ratio < best:
                    best = ratio
    return best


def _combinatorial_part(q: FiniteQuotient):
    """Degree, diameter, girth and (small orders) the exact Cheeger constant.

    Integer and rational arithmetic only, so safe to run on worker threads
    without disturbing byte-reproducibility.
    """
    degree = len(q.neighbors(0))
    diameter = component_diameter(q)
    girth = _girth_from_identity(q)
    cheeger = _exact_cheeger(q, degree) if q.order <= CHEEGER_EXACT_MAX else None
    return degree, diameter, girth, cheeger


def _finish_diagnostics(q: FiniteQuotient, combo, eigen_budget: int) -> GraphDiagnostics:
    n = q.order
    degree, diameter, girth, cheeger = combo
    if n > eigen_budget:
        return GraphDiagnostics(q.level, n, degree, diameter, girth, girth is None,
                                None, False, Fraction(0), Fraction(1), False,
                                degraded=f"order {n} over eigensolver budget {eigen_budget}")
    lam1, exact = _spectral_gap(q, degree)
    if cheeger is not None:
        ch_lo = ch_hi = cheeger
        ch_exact = True
    else:
        ch_lo, ch_hi = lam1 / 2.0, float(np.sqrt(2.0 * lam1))
        ch_exact = False
    return GraphDiagnostics(q.level, n, degree, diameter, girth, girth is None,
                            lam1, exact, ch_lo, ch_hi, ch_exact, None)


def diagnostics(q: FiniteQuotient, eigen_budget: int = EIGEN_BUDGET) -> GraphDiagnostics:
    """Diameter, girth, Cheeger constant and spectral gap of one quotient."""
    if q.order == 1:
        return GraphDiagnostics(q.level, 1, 0, 0, None, True, None, True,
                                Fraction(0), Fraction(0), True, degraded="trivial graph")
    return _finish_diagnostics(q, _combinatorial_part(q), eigen_budget)


@dataclass(frozen=True)
class ExpanderReport:
    caveat: str
    rows: tuple[GraphDiagnostics, ...]
    min_gap: float | None

    def as_payload(self) -> dict:
        return {
            "caveat": self.caveat,
            "rows": [r.as_row() for r in self.rows],
            "min_lambda1": self.min_gap,
        }

    def as_csv(self) -> str:
        header = "level,order,degree,diameter,girth,lambda1,cheeger_lo,cheeger_hi"
        lines = [f"# {self.caveat}", header]
        for r in self.rows:
            girth = "inf" if r.girth_infinite else r.girth
            lam = "" if r.spectral_gap is None else repr(r.spectral_gap)
            lines.append(f"{r.level},{r.order},{r.degree},{r.diameter},{girth},"
                         f"{lam},{float(r.cheeger_lo)!r},{float(r.cheeger_hi)!r}")
        return "\n".join(lines) + "\n"


def expander_report(chain: NormalChain, eigen_budget: int = EIGEN_BUDGET,
                    threads: int = 1) -> ExpanderReport:
    """Per-level diagnostics; a level over budget is marked degraded, not fatal.

    The combinatorial work parallelizes; eigensolves stay on the calling
    thread, since even single-threaded LAPACK results can depend on which OS
    thread runs them.
    """
    combos = parallel_map(_combinatorial_part, list(chain.quotients), threads)
    rows = []
    for q, combo in zip(chain.quotients, combos):
        if q.order == 1:
            rows.append(diagnostics(q, eigen_budget))
            continue
        try:
            rows.append(_finish_diagnostics(q, combo, eigen_budget))
        except BudgetError as exc:
            degree, diameter, girth, _ = combo
            rows.append(GraphDiagnostics(q.level, q.order, degree, diameter, girth,
                                         girth is None, None, False,
                                         Fraction(0), Fraction(1), False, degraded=str(exc)))
    rows.sort(key=lambda r: r.level)
    gaps = [r.spectral_gap for r in rows if r.spectral_gap is not None]
    return ExpanderReport(REPORT_CAVEAT, tuple(rows), min(gaps) if gaps else None)


def boxspace_to_payload(b: BoxSpace) -> dict:
    from .groups import chain_to_payload

    return {
        "format": "boxspace/v1",
        "chain": chain_to_payload(b.chain),
        "anchors": list(b.anchors),
    }


def boxspace_from_payload(payload: dict) -> BoxSpace:
    from .groups import chain_from_payload

    if payload.get("format") != "boxspace/v1":
        raise ValidationError("not a boxspace payload", format=payload.get("format"))
    chain = chain_from_payload(payload["chain"])
    box = assemble(chain)
    if list(box.anchors) != payload["anchors"]:
        raise ValidationError("stored anchors disagree with the anchor rule")
    return box
