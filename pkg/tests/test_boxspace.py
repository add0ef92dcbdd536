from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from coarsebox.boxspace import (
    REPORT_CAVEAT,
    assemble,
    boxspace_from_payload,
    boxspace_to_payload,
    component_diameter,
    diagnostics,
    expander_report,
)
from coarsebox.errors import ValidationError
from coarsebox.groups import build_family, cyclic_quotient


def test_anchor_rule_two_components():
    chain = build_family("cyclic:2", 2)  # diameters 1 and 2
    box = assemble(chain)
    assert box.anchors == (0, 4)
    # cross-component distance through the anchors
    q1, q2 = chain.quotients
    for x in range(q1.order):
        for y in range(q2.order):
            assert box.dist((1, x), (2, y)) == q1.dist0[x] + 4 + q2.dist0[y]


def test_single_component_is_isometric_to_it():
    chain = build_family("cyclic:2", 3)
    box = assemble(build_family("cyclic:2:3", 1))  # just C8
    q = box.chain.quotients[0]
    for x in range(q.order):
        for y in range(q.order):
            assert box.dist((1, x), (1, y)) == q.dist(x, y)


def test_empty_chain_rejected_upstream():
    with pytest.raises(ValidationError):
        build_family("cyclic:2", 0)


def test_box_metric_axioms_exhaustive():
    chain = build_family("cyclic:2", 6)  # 2+4+8+16+32+64 = 126 points
    box = assemble(chain)
    pts = box.points
    n = len(pts)
    assert n <= 300
    d = np.array([[box.dist(p, q) for q in pts] for p in pts], dtype=float)
    assert np.all(np.diag(d) == 0)
    assert np.all(d == d.T)
    assert np.all(d + np.eye(n) > 0)
    for k in range(n):
        assert np.all(d <= d[:, [k]] + d[[k], :] + 1e-12)


def test_cross_component_distances_dominate_diameters():
    chain = build_family("cyclic:2", 4)
    box = assemble(chain)
    diams = [component_diameter(q) for q in chain.quotients]
    for m in range(1, 5):
        for n in range(m + 1, 5):
            lower = diams[m - 1] + diams[n - 1] + 1
            assert abs(box.anchors[m - 1] - box.anchors[n - 1]) >= lower
            for x in range(chain.quotients[m - 1].order):
                for y in range(chain.quotients[n - 1].order):
                    assert box.dist((m, x), (n, y)) >= lower


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def test_cycle_spectral_gap_closed_form():
    for n in range(3, 65):
        d = diagnostics(cyclic_quotient(n))
        assert d.spectral_exact
        assert abs(d.spectral_gap - (1 - math.cos(2 * math.pi / n))) < 1e-9


def test_cycle_girth_is_length():
    assert diagnostics(cyclic_quotient(8)).girth == 8
    assert diagnostics(cyclic_quotient(5)).girth == 5


def test_two_point_graph_has_no_cycle():
    d = diagnostics(cyclic_quotient(2))
    assert d.girth_infinite and d.girth is None


def test_complete_graph_from_all_nonzero_generators():
    k4 = cyclic_quotient(4, steps=(1, 2, 3))
    d = diagnostics(k4)
    assert d.degree == 3
    assert d.girth == 3
    assert abs(d.spectral_gap - 4 / 3) < 1e-9


def test_cycle_cheeger_exact_value():
    # even cycle: cut an arc of half the points with two boundary edges
    for n in (4, 8, 16):
        d = diagnostics(cyclic_quotient(n))
        assert d.cheeger_exact
        assert d.cheeger_lo == d.cheeger_hi == Fraction(2, n)


def test_cheeger_buser_sandwich_on_exact_graphs():
    quotients = [cyclic_quotient(n) for n in (3, 4, 6, 8, 12, 16, 20)]
    quotients.append(cyclic_quotient(4, steps=(1, 2, 3)))
    quotients.append(build_family("free:2:102,120", 1).quotients[0])
    for q in quotients:
        d = diagnostics(q)
        assert d.cheeger_exact
        h = float(d.cheeger_lo)
        assert d.spectral_gap / 2 <= h + 1e-9
        assert h <= math.sqrt(2 * d.spectral_gap) + 1e-9


def test_expander_report_cyclic_gaps_decrease():
    report = expander_report(build_family("cyclic:2", 4))
    gaps = [r.spectral_gap for r in report.rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert report.min_gap == gaps[-1]
    assert report.caveat == REPORT_CAVEAT
    csv = report.as_csv()
    assert csv.splitlines()[0] == f"# {REPORT_CAVEAT}"
    assert "level,order,degree,diameter,girth,lambda1" in csv


def test_expander_report_degrades_over_budget():
    report = expander_report(build_family("cyclic:2", 3), eigen_budget=4)
    assert report.rows[2].degraded is not None
    assert report.rows[2].spectral_gap is None
    assert report.rows[0].spectral_gap is not None  # small levels still computed


def test_sl2_gaps_positive():
    report = expander_report(build_family("sl2:3,5,7", 2))
    assert report.min_gap > 0
    for row in report.rows:
        assert row.spectral_gap > 0


def test_iterative_gap_matches_dense_on_midsize_graph():
    # order 336 runs dense; force the iterative path and compare
    from coarsebox.boxspace import _second_adjacency_eigenvalue, _spectral_gap

    q = build_family("sl2:7", 1).quotients[0]
    dense, exact = _spectral_gap(q, 4)
    assert exact
    mu2 = _second_adjacency_eigenvalue(q, 4)
    assert abs((1.0 - mu2) - dense) < 1e-9


def test_boxspace_serialization_round_trip():
    box = assemble(build_family("cyclic:2", 3))
    payload = boxspace_to_payload(box)
    again = boxspace_from_payload(payload)
    assert boxspace_to_payload(again) == payload
