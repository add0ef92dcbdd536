from __future__ import annotations

import itertools

import pytest

from coarsebox.errors import BudgetError, ValidationError
from coarsebox.groups import (
    ball_in_group,
    build_family,
    chain_from_payload,
    chain_injectivity_radii,
    chain_to_payload,
    cyclic_quotient,
    injectivity_radius,
    marked_free,
    marked_integers,
    marked_sl2,
    word_metric,
)


# ---------------------------------------------------------------------------
# family construction
# ---------------------------------------------------------------------------

def test_cyclic_tower_orders():
    chain = build_family("cyclic:2", 3)
    assert [q.order for q in chain.quotients] == [2, 4, 8]
    assert [sorted(q.generator_images) for q in chain.quotients] == [["+1", "-1"]] * 3


def test_cyclic_tower_with_start():
    chain = build_family("cyclic:2:2", 3)
    assert [q.order for q in chain.quotients] == [4, 8, 16]


def sl2_mod_p_order_by_enumeration(p):
    # every 2x2 matrix over Z/p with determinant one
    count = 0
    for a, b, c, d in itertools.product(range(p), repeat=4):
        if (a * d - b * c) % p == 1:
            count += 1
    return count


def test_congruence_sl2_order_against_enumeration():
    chain = build_family("sl2:3", 1)
    assert chain.quotients[0].order == 24
    assert chain.quotients[0].order == sl2_mod_p_order_by_enumeration(3)


def test_free_hom_chain_and_rejection():
    chain = build_family("free:2:102,120|1023,1230", 2)
    assert chain.quotients[0].order == 6  # all of Sym(3)
    assert chain.quotients[1].order % 6 == 0
    # images generating only a proper subgroup of Sym(3) are rejected
    with pytest.raises(ValidationError) as err:
        build_family("free:2:120,201", 1)  # two 3-cycles: only the alternating half
    assert err.value.details["unreached"] == 3


def test_family_parameter_validation():
    with pytest.raises(ValidationError):
        build_family("cyclic:1", 2)
    with pytest.raises(ValidationError):
        build_family("sl2:4", 1)  # not an odd prime
    with pytest.raises(ValidationError):
        build_family("sl2:3,3", 2)  # repeated prime
    with pytest.raises(ValidationError):
        build_family("cyclic:2", 0)
    with pytest.raises(ValidationError):
        build_family("octonion:2", 1)


# ---------------------------------------------------------------------------
# word metric
# ---------------------------------------------------------------------------

def test_word_metric_examples(c8):
    assert word_metric(c8, 0, 0) == 0
    assert word_metric(c8, 0, c8.index[5]) == 3  # 5 is -3 mod 8
    sl2 = build_family("sl2:3", 1).quotients[0]
    for s in ("e12+", "e12-", "e21+", "e21-"):
        assert word_metric(sl2, 0, sl2.generator_images[s]) == 1


def test_word_metric_matches_cyclic_closed_form():
    for m in (5, 8, 12):
        q = cyclic_quotient(m)
        for x in range(m):
            for y in range(m):
                expected = min((q.elements[y] - q.elements[x]) % m,
                               (q.elements[x] - q.elements[y]) % m)
                assert word_metric(q, x, y) == expected


def test_word_metric_index_bounds(c8):
    with pytest.raises(ValidationError):
        word_metric(c8, 0, 99)


def test_left_invariance_exhaustive_small():
    for q in (cyclic_quotient(8), build_family("sl2:3", 1).quotients[0],
              build_family("free:2:102,120", 1).quotients[0]):
        assert q.order <= 200
        for z in range(q.order):
            for x in range(q.order):
                for y in range(q.order):
                    assert q.dist(q.mul(z, x), q.mul(z, y)) == q.dist(x, y)


# ---------------------------------------------------------------------------
# balls in the infinite group
# ---------------------------------------------------------------------------

def test_ball_in_integers():
    ball = ball_in_group(marked_integers(), 3)
    assert [x for x, _ in ball] == [0, -1, 1, -2, 2, -3, 3]
    assert all(d == abs(x) for x, d in ball)


def test_ball_in_free_group_counts():
    g = marked_free(2)
    # layer r of F_2 has 4 * 3^(r-1) reduced words
    for r in range(0, 4):
        expected = 1 + sum(4 * 3 ** (k - 1) for k in range(1, r + 1))
        assert len(ball_in_group(g, r)) == expected
    assert len(ball_in_group(g, 2)) == 17


def test_ball_radius_zero():
    for g in (marked_integers(), marked_free(2), marked_sl2()):
        assert ball_in_group(g, 0) == [(g.identity(), 0)]


def test_ball_budget():
    with pytest.raises(BudgetError):
        ball_in_group(marked_free(2), 10, budget=50)


# ---------------------------------------------------------------------------
# injectivity radii
# ---------------------------------------------------------------------------

def test_injectivity_radius_examples(cyclic_chain):
    z = marked_integers()
    r8 = injectivity_radius(z, cyclic_chain.quotients[2], 10)
    assert (r8.value, r8.saturated) == (3, False)
    r2 = injectivity_radius(z, cyclic_chain.quotients[0], 10)
    assert (r2.value, r2.saturated) == (0, False)
    r0 = injectivity_radius(z, cyclic_chain.quotients[2], 0)
    assert (r0.value, r0.saturated) == (0, True)
    assert str(r0) == ">= 0"


def test_injectivity_radii_nondecreasing_along_chains():
    for family, depth in (("cyclic:2", 4), ("sl2:3,5", 2), ("free:2:102,120|1023,1230", 2)):
        chain = build_family(family, depth)
        radii = [r.value for r in chain_injectivity_radii(chain, 4)]
        assert radii == sorted(radii)


# ---------------------------------------------------------------------------
# chain invariants
# ---------------------------------------------------------------------------

def test_connecting_maps_one_lipschitz_exhaustive():
    for family, depth in (("cyclic:2", 3), ("free:2:102,120|1023,1230", 2)):
        chain = build_family(family, depth)
        for i, table in enumerate(chain.connecting):
            hi, lo = chain.quotients[i + 1], chain.quotients[i]
            if hi.order > 200:
                continue
            for x in range(hi.order):
                for y in range(hi.order):
                    assert lo.dist(table[x], table[y]) <= hi.dist(x, y)


def test_generator_images_at_distance_one(cyclic_chain):
    for q in cyclic_chain.quotients:
        for s, g in q.generator_images.items():
            if g != 0:
                assert q.dist0[g] == 1


def test_canonical_enumeration_is_distance_sorted(cyclic_chain):
    for q in cyclic_chain.quotients:
        assert q.identity_index == 0
        assert list(q.dist0) == sorted(q.dist0)


def test_chain_serialization_round_trip():
    for family, depth in (("cyclic:2", 3), ("sl2:3", 1), ("free:2:102,120", 1)):
        chain = build_family(family, depth)
        payload = chain_to_payload(chain)
        again = chain_from_payload(payload)
        assert chain_to_payload(again) == payload


def test_marked_group_validation():
    with pytest.raises(ValidationError):
        marked_integers(steps=(0,))
    g = marked_integers()
    with pytest.raises(ValidationError):
        g.eval_word(["+2"])  # unknown symbol
    assert g.eval_word(["+1", "+1", "-1"]) == 1


def test_dot_export_mentions_generators(c4):
    dot = c4.to_dot()
    assert "digraph" in dot and 'label="+1"' in dot
    assert dot.count("->") == c4.order * len(c4.parent.generators)
