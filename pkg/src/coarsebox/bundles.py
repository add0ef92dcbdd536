"""Bundled example map spaces and experiment configs used by the acceptance
suite, the docs, and the CLI's --bundled flag."""

from __future__ import annotations

from .coarse import MapSpace, enumerate_map_space, parse_controls
from .groups import build_family
from .pipeline import ExperimentConfig

# Three control settings over the three cyclic pairs C4<->C4, C8<->C8, C8<->C16.
# "tapered" uses the piecewise-linear control form: generous at distance 1,
# tight further out.
BUNDLED_CONTROL_SETTINGS = {
    "isometry": "affine:1,0/affine:1,0/0",
    "doubling": "affine:2,0/affine:1,0/1",
    "tapered": "table:(0,0);(1,2);(2,2.5),1/affine:0.5,0/1",
}

BUNDLED_PAIRS = {
    "c4-c4": (4, 4),
    "c8-c8": (8, 8),
    "c8-c16": (8, 16),
}


def bundled_map_spaces() -> dict[str, MapSpace]:
    """All bundled pair/setting combinations, fully enumerated."""
    chain = build_family("cyclic:2", 4)  # orders 2, 4, 8, 16
    by_order = {q.order: q for q in chain.quotients}
    out: dict[str, MapSpace] = {}
    for sname, ctext in BUNDLED_CONTROL_SETTINGS.items():
        controls = parse_controls(ctext)
        for pname, (dom_order, cod_order) in BUNDLED_PAIRS.items():
            space = enumerate_map_space(by_order[dom_order], by_order[cod_order],
                                        controls, basepointed=True)
            out[f"{pname}:{sname}"] = space
    return out


def bundled_configs() -> dict[str, ExperimentConfig]:
    return {
        "identity_tower": ExperimentConfig(
            name="identity_tower",
            g_family="cyclic:2:2",
            h_family="cyclic:2:2",
            levels=3,
            controls="affine:1,0/affine:1,0/0",
            schedule=(1, 2, 3),
        ),
        "doubling_tower": ExperimentConfig(
            name="doubling_tower",
            g_family="cyclic:2:2",
            h_family="cyclic:2:3",
            levels=3,
            controls="affine:2,0/affine:0.5,0/1",
            schedule=(1, 2, 3),
        ),
        "sl2_vs_cyclic_infeasible": ExperimentConfig(
            name="sl2_vs_cyclic_infeasible",
            g_family="sl2:3,5",
            h_family="cyclic:2",
            levels=2,
            controls="affine:1,0/affine:1,0/0",
            schedule=(1, 2),
        ),
    }
