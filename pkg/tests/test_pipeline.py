from __future__ import annotations

import json
from pathlib import Path

import pytest

from coarsebox.bundles import bundled_configs
from coarsebox.errors import ValidationError
from coarsebox.pipeline import ExperimentConfig, run


@pytest.fixture(scope="module")
def reports():
    return {name: run(cfg) for name, cfg in bundled_configs().items()}


def test_identity_tower_self_comparison(reports):
    payload = reports["identity_tower"].payload
    assert payload["status"] == "complete"
    lim = payload["diagonal_limit"]
    assert lim["radius"] == 3
    assert lim["verify"]["passed"]
    # the extracted partial map is the identity on the ball
    assert all(x == y for x, y in lim["partial_map"]["table"])
    assert all(it["epsilon"] == 0 for it in payload["gh_evidence"]["items"])
    assert all(row["tv"] == 0.0 and row["prokhorov"] == 0.0
               for row in payload["measure_defects"])


def test_doubling_tower_completes_and_contains_doubling_maps(reports):
    payload = reports["doubling_tower"].payload
    assert payload["status"] == "complete"
    assert payload["truncated_at_level"] is None
    # every level's enumeration contains the doubling map k -> 2k
    from coarsebox.coarse import enumerate_map_space, parse_controls
    from coarsebox.groups import build_family

    cfg = bundled_configs()["doubling_tower"]
    controls = parse_controls(cfg.controls)
    g = build_family(cfg.g_family, cfg.levels)
    h = build_family(cfg.h_family, cfg.levels)
    for level in range(1, cfg.levels + 1):
        qg, qh = g.quotients[level - 1], h.quotients[level - 1]
        space = enumerate_map_space(qg, qh, controls, basepointed=True)
        table = tuple(qh.index[(2 * qg.elements[i]) % qh.carrier.modulus]
                      for i in range(qg.order))
        assert space.member_index(table) is not None
    lim = payload["diagonal_limit"]
    assert lim["verify"]["passed"]


def test_infeasible_config_truncates_with_reason(reports):
    payload = reports["sl2_vs_cyclic_infeasible"].payload
    assert payload["status"] == "truncated"
    assert payload["truncated_at_level"] == 1
    assert "empty map space" in payload["truncation_reason"]
    assert payload["diagonal_limit"] is None
    # the expander stage still reports both chains
    assert payload["expander"]["g"]["min_lambda1"] > 0
    assert payload["expander"]["h"]["min_lambda1"] > 0


def test_report_internal_consistency(reports):
    from coarsebox.coarse import parse_controls
    from coarsebox.groups import build_family
    from coarsebox.limits import liftable_radius

    for name, report in reports.items():
        payload = report.payload
        for row in payload["map_spaces"]:
            assert row["net_size"] <= row["members"]
        lim = payload.get("diagonal_limit")
        if lim and "radius" in lim:
            surviving = lim["partial_map"]["provenance"][str(lim["radius"])]
            assert len(surviving) >= 1
            # the achieved radius never exceeds any surviving level's liftable radius
            cfg = report.config
            g = build_family(cfg.g_family, cfg.levels)
            h = build_family(cfg.h_family, cfg.levels)
            rho = parse_controls(cfg.controls).rho_plus
            for level in surviving:
                assert lim["radius"] <= liftable_radius(g, h, level, lim["radius"] + 1, rho)


def test_run_directory_contents(tmp_path, reports):
    cfg = bundled_configs()["identity_tower"]
    run(cfg, out_dir=tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"report.json", "summary.txt", "manifest.json",
            "chain_g.json", "chain_h.json", "partialmap.json"} <= names
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    for fname, meta in manifest["files"].items():
        data = (tmp_path / fname).read_bytes()
        assert meta["bytes"] == len(data)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["name"] == "identity_tower"


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig("bad", "cyclic:2", "cyclic:2", 2,
                         "affine:1,0/affine:1,0/0", (2, 1))  # decreasing schedule
    with pytest.raises(ValidationError):
        ExperimentConfig("bad", "cyclic:2", "cyclic:2", 0,
                         "affine:1,0/affine:1,0/0", ())
    with pytest.raises(ValidationError):
        ExperimentConfig("bad", "cyclic:2", "cyclic:2", 1,
                         "affine:1,0/affine:1,0/0", (1,), node_budget=0)


def test_config_payload_round_trip():
    cfg = bundled_configs()["doubling_tower"]
    assert ExperimentConfig.from_payload(cfg.as_payload()) == cfg
