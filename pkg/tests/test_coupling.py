from __future__ import annotations

import random
from fractions import Fraction

import pytest

from coarsebox.coarse import MapRecord
from coarsebox.coupling import (
    equivariance_defect,
    equivariant_report,
    extend_from_net,
    net_extension_instances,
    preimage_hausdorff_check,
    preimage_instances,
    _cycle_space,
    _rotation_action,
)
from coarsebox.errors import ValidationError
from coarsebox.measures import GroupAction


def test_equivariant_map_has_zero_defect():
    s = _cycle_space(8)
    action = _rotation_action(s)
    ident = MapRecord(s, s, tuple(range(8)))
    for word in (["r"], ["r'"], ["r", "r"]):
        assert equivariance_defect(ident, action, action, word) == 0


def test_shifted_codomain_action_has_defect_one():
    s = _cycle_space(8)
    action = _rotation_action(s)
    double_step = GroupAction(s, {"r": tuple((i + 2) % 8 for i in range(8)),
                                  "r'": tuple((i - 2) % 8 for i in range(8))},
                              {"r": "r'", "r'": "r"})
    ident = MapRecord(s, s, tuple(range(8)))
    assert equivariance_defect(ident, action, double_step, ["r"]) == 1
    assert equivariance_defect(ident, action, double_step, ["r'"]) == 1


def test_constant_map_to_fixed_point_has_zero_defect():
    s = _cycle_space(8)
    action = _rotation_action(s)
    trivial = GroupAction(s, {"r": tuple(range(8)), "r'": tuple(range(8))},
                          {"r": "r'", "r'": "r"})
    const = MapRecord(s, s, (0,) * 8)
    assert equivariance_defect(const, action, trivial, ["r"]) == 0


def test_identity_word_defect_is_zero_for_any_map():
    rng = random.Random(7)
    s = _cycle_space(10)
    action = _rotation_action(s)
    for _ in range(20):
        f = MapRecord(s, s, tuple(rng.randrange(10) for _ in range(10)))
        assert equivariance_defect(f, action, action, []) == 0


def test_equivariant_report_rows():
    s = _cycle_space(6)
    action = _rotation_action(s)
    ident = MapRecord(s, s, tuple(range(6)))
    report = equivariant_report(ident, action, action, [["r"], ["r", "r"]])
    assert report.epsilon == 0
    assert dict(report.xi_per_word) == {"r": 0, "rr": 0}


# ---------------------------------------------------------------------------
# extension from a net
# ---------------------------------------------------------------------------

def test_extension_with_full_net_is_unchanged():
    s = _cycle_space(8)
    res = extend_from_net(s, list(range(8)), list(range(8)), s, 0)
    assert res.record.table == tuple(range(8))
    assert res.within_three_eps


def test_extension_on_even_net_of_the_cycle():
    s = _cycle_space(8)
    res = extend_from_net(s, [0, 2, 4, 6], [0, 2, 4, 6], s, 1)
    # ties go to the canonical (lowest-index) net point
    assert res.record.table == (0, 0, 2, 2, 4, 4, 6, 0)
    assert res.epsilon == 1
    assert res.extended_distortion == 2
    assert res.within_three_eps


def test_non_net_rejected_with_witness():
    s = _cycle_space(8)
    with pytest.raises(ValidationError) as err:
        extend_from_net(s, [0], [0], s, 1)
    assert "uncovered" in err.value.details


def test_net_extension_instances_respect_three_eps():
    for space, net, values, codomain, radius in net_extension_instances(321, 150):
        res = extend_from_net(space, net, values, codomain, radius)
        assert res.within_three_eps


# ---------------------------------------------------------------------------
# the preimage-Hausdorff bound
# ---------------------------------------------------------------------------

def test_equivariant_isometry_gives_zero_distance():
    s = _cycle_space(8)
    action = _rotation_action(s)
    ident = MapRecord(s, s, tuple(range(8)))
    out = preimage_hausdorff_check(ident, action, action, ["r"], [0, 3], 0)
    assert out.status == "pass" and out.measured == 0


def test_hypothesis_failure_is_vacuous_not_failed():
    s = _cycle_space(8)
    action = _rotation_action(s)
    antipode = MapRecord(s, s, tuple((i + 4) % 8 if i % 2 else i for i in range(8)))
    out = preimage_hausdorff_check(antipode, action, action, ["r"], [0], Fraction(1, 10))
    assert out.status == "vacuous"


def test_empty_preimage_is_inapplicable():
    s = _cycle_space(8)
    action = _rotation_action(s)
    const = MapRecord(s, s, (0,) * 8)
    out = preimage_hausdorff_check(const, action, action, ["r"], [4], 4)
    assert out.status == "inapplicable"


def test_preimage_instances_pass_two_xi_bound():
    for inst in preimage_instances(654, 150):
        out = preimage_hausdorff_check(*inst)
        assert out.status == "pass"
        assert out.measured <= out.bound


def test_generators_are_seed_deterministic():
    a = [(f.table, word, subset, xi)
         for f, _, _, word, subset, xi in preimage_instances(42, 10)]
    b = [(f.table, word, subset, xi)
         for f, _, _, word, subset, xi in preimage_instances(42, 10)]
    assert a == b
    c = list(net_extension_instances(42, 5))
    d = list(net_extension_instances(42, 5))
    assert [(x[1], x[2], x[4]) for x in c] == [(x[1], x[2], x[4]) for x in d]
