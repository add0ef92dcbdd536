"""End-to-end experiments: build two chains, enumerate per-level map spaces,
run nets, the diagonal limit, convergence evidence and measure defects, and
emit one deterministic evidence report.

Stages run in a fixed order and each consumes only earlier outputs.  A stage
that cannot proceed (empty map space, no liftable level) truncates or degrades
the report with an explicit reason; nothing is silently skipped.  Reports
contain no timestamps or thread counts, so re-running an identical config is
byte-identical regardless of parallelism.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import boxspace as bx
from . import coarse as cs
from . import ghmetric as gh
from . import limits as lm
from . import measures as ms
from .errors import InfeasibleError, ValidationError
from .groups import DEFAULT_BALL_BUDGET, build_family, chain_to_payload
from .utils import canonical_dumps


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    g_family: str
    h_family: str
    levels: int
    controls: str                 # rho_plus/rho_minus/c grammar
    schedule: tuple[int, ...]     # net radius exponent per level; last entry is the limit radius target
    defect_word_length: int = 2
    node_budget: int = cs.DEFAULT_NODE_BUDGET
    ball_budget: int = DEFAULT_BALL_BUDGET
    gh_budget: int = gh.DEFAULT_GH_BUDGET
    eigen_budget: int = bx.EIGEN_BUDGET
    seed: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise ValidationError("levels must be positive", levels=self.levels)
        if len(self.schedule) != self.levels:
            raise ValidationError("schedule must have one entry per level",
                                  schedule=list(self.schedule), levels=self.levels)
        if list(self.schedule) != sorted(self.schedule):
            raise ValidationError("schedule must be nondecreasing", schedule=list(self.schedule))
        if min(self.node_budget, self.ball_budget, self.gh_budget, self.eigen_budget) <= 0:
            raise ValidationError("budgets must be positive")

    def as_payload(self) -> dict:
        return {
            "name": self.name,
            "g_family": self.g_family,
            "h_family": self.h_family,
            "levels": self.levels,
            "controls": self.controls,
            "schedule": list(self.schedule),
            "defect_word_length": self.defect_word_length,
            "node_budget": self.node_budget,
            "ball_budget": self.ball_budget,
            "gh_budget": self.gh_budget,
            "eigen_budget": self.eigen_budget,
            "seed": self.seed,
        }

    @staticmethod
    def from_payload(payload: dict) -> "ExperimentConfig":
        return ExperimentConfig(
            name=str(payload["name"]),
            g_family=str(payload["g_family"]),
            h_family=str(payload["h_family"]),
            levels=int(payload["levels"]),
            controls=str(payload["controls"]),
            schedule=tuple(int(r) for r in payload["schedule"]),
            defect_word_length=int(payload.get("defect_word_length", 2)),
            node_budget=int(payload.get("node_budget", cs.DEFAULT_NODE_BUDGET)),
            ball_budget=int(payload.get("ball_budget", DEFAULT_BALL_BUDGET)),
            gh_budget=int(payload.get("gh_budget", gh.DEFAULT_GH_BUDGET)),
            eigen_budget=int(payload.get("eigen_budget", bx.EIGEN_BUDGET)),
            seed=int(payload.get("seed", 0)),
        )


@dataclass(eq=False)
class EvidenceReport:
    config: ExperimentConfig
    payload: dict
    artifacts: dict[str, dict] = field(default_factory=dict)

    def to_json(self) -> str:
        return canonical_dumps(self.payload)

    def summary(self) -> str:
        p = self.payload
        lines = [f"experiment: {p['config']['name']}", f"status: {p['status']}"]
        if p.get("truncated_at_level"):
            lines.append(f"truncated at level {p['truncated_at_level']}: {p['truncation_reason']}")
        lines.append("level  |Xn|  net  bound  net_ok")
        for row in p["map_spaces"]:
            lines.append(f"{row['level']:>5}  {row['members']:>4}  "
                         f"{row.get('net_size', '-'):>3}  {row.get('net_bound', '-'):>5}  "
                         f"{row.get('net_ok', '-')}")
        lim = p.get("diagonal_limit")
        if lim:
            lines.append(f"diagonal limit: radius {lim['radius']}, verified {lim['verify']['passed']}")
        ghe = p.get("gh_evidence")
        if ghe:
            eps = ", ".join(str(it["epsilon"]) for it in ghe["items"])
            lines.append(f"gh evidence eps: [{eps}] nonincreasing={ghe['nonincreasing']}")
        md = p.get("measure_defects")
        if md:
            worst = max((row["prokhorov"] for row in md), default=0.0)
            lines.append(f"max pushforward invariance defect (prokhorov): {worst}")
        for side in ("g", "h"):
            rep = p["expander"][side]
            lines.append(f"expander[{side}]: min lambda1 = {rep['min_lambda1']}")
        return "\n".join(lines) + "\n"


def _limit_stage(config, chain_g, chain_h, selected, controls):
    """Try the diagonal limit at the deepest feasible radius, walking down."""
    target = config.schedule[-1]
    last_reason = "target radius below 1"
    for radius in range(target, 0, -1):
        try:
            pm = lm.diagonal_limit(selected, chain_g, chain_h, controls, radius,
                                   ball_budget=config.ball_budget)
        except (InfeasibleError, ValidationError) as exc:
            last_reason = str(exc)
            continue
        report = lm.verify_partial(pm, controls, ball_budget=config.ball_budget)
        return pm, report, radius, None
    return None, None, 0, last_reason


def run(config: ExperimentConfig, out_dir: str | Path | None = None,
        threads: int = 1) -> EvidenceReport:
    controls = cs.parse_controls(config.controls)
    chain_g = build_family(config.g_family, config.levels, budget=config.ball_budget)
    chain_h = build_family(config.h_family, config.levels, budget=config.ball_budget)

    payload: dict[str, Any] = {"format": "evidence/v1", "config": config.as_payload()}
    artifacts: dict[str, dict] = {
        "chain_g.json": chain_to_payload(chain_g),
        "chain_h.json": chain_to_payload(chain_h),
    }

    payload["expander"] = {
        "g": bx.expander_report(chain_g, config.eigen_budget, threads).as_payload(),
        "h": bx.expander_report(chain_h, config.eigen_budget, threads).as_payload(),
    }

    # per-level map spaces, truncating at the first infeasible level
    def enumerate_level(level: int) -> cs.MapSpace:
        return cs.enumerate_map_space(
            chain_g.quotients[level - 1], chain_h.quotients[level - 1], controls,
            basepointed=True, injective_required=False, node_budget=config.node_budget)

    # sequential with early break: a truncated run must not pay for deeper levels
    spaces: list[cs.MapSpace] = []
    truncated_at = None
    truncation_reason = None
    for level in range(1, config.levels + 1):
        space = enumerate_level(level)
        if space.size == 0:
            truncated_at = level
            truncation_reason = "empty map space under the configured controls"
            break
        spaces.append(space)

    rows = []
    for level, space in enumerate(spaces, start=1):
        injective_m = cs.make_injective(space.members[0]).codomain.tag_size
        row = {
            "level": level,
            "members": space.size,
            "complete": space.complete,
            "nodes": space.nodes_expanded,
            "injectivity_tag_size": injective_m,
        }
        cert = cs.eps_net(space, config.schedule[level - 1])
        row["net_size"] = len(cert.net_member_indices)
        row["net_bound"] = cert.cardinality_bound
        row["net_ok"] = cert.net_property_ok and cert.cardinality_ok
        row["net"] = cert.as_payload()
        rows.append(row)
        artifacts[f"mapspace_level{level}.json"] = cs.mapspace_to_payload(
            space,
            {"family": config.g_family, "depth": config.levels, "level": level},
            {"family": config.h_family, "depth": config.levels, "level": level},
        )
    payload["map_spaces"] = rows
    payload["truncated_at_level"] = truncated_at
    payload["truncation_reason"] = truncation_reason
    payload["tag_group_size"] = max((r["injectivity_tag_size"] for r in rows), default=None)

    if spaces:
        selected = [(level, space.members[0]) for level, space in enumerate(spaces, start=1)]
        pm, verify_rep, achieved, reason = _limit_stage(config, chain_g, chain_h, selected, controls)
        if pm is not None:
            payload["diagonal_limit"] = {
                "radius": achieved,
                "target_radius": config.schedule[-1],
                "partial_map": lm.partialmap_to_payload(pm),
                "verify": verify_rep.as_payload(),
            }
            artifacts["partialmap.json"] = lm.partialmap_to_payload(pm)
        else:
            payload["diagonal_limit"] = {"degraded": reason, "target_radius": config.schedule[-1]}

        snapshots = [gh.space_from_mapspace(space) for space in spaces]
        terminal = snapshots[-1]
        evidence = gh.convergence_evidence(snapshots[:-1], terminal, budget=config.gh_budget)
        payload["gh_evidence"] = evidence.as_payload()

        defect_rows = []
        terminal_space = spaces[-1]
        try:
            terminal_action = ms.mapspace_action(terminal_space)
            for level, (space, item) in enumerate(zip(spaces[:-1], evidence.items), start=1):
                witness = cs.MapRecord(space, terminal_space, item.witness.table)
                pushed = ms.pushforward(ms.uniform(space), witness)
                defect = ms.invariance_defect(pushed, terminal_action, config.defect_word_length)
                defect_rows.append({
                    "level": level,
                    "tv": defect.tv,
                    "prokhorov": defect.prokhorov,
                    "worst_word": "".join(defect.worst_word),
                })
            uniform_defect = ms.invariance_defect(ms.uniform(terminal_space), terminal_action,
                                                  config.defect_word_length)
            defect_rows.append({
                "level": len(spaces),
                "tv": uniform_defect.tv,
                "prokhorov": uniform_defect.prokhorov,
                "worst_word": "".join(uniform_defect.worst_word),
            })
            payload["measure_defects"] = defect_rows
        except ValidationError as exc:
            payload["measure_defects"] = None
            payload["measure_defects_degraded"] = str(exc)
    else:
        payload["diagonal_limit"] = None
        payload["gh_evidence"] = None
        payload["measure_defects"] = None

    payload["status"] = "truncated" if truncated_at else "complete"

    report = EvidenceReport(config, payload, artifacts)
    if out_dir is not None:
        _write_run_dir(report, Path(out_dir))
    return report


def _write_run_dir(report: EvidenceReport, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {"report.json": report.to_json(), "summary.txt": report.summary()}
    for name, artifact in sorted(report.artifacts.items()):
        files[name] = canonical_dumps(artifact)
    manifest = {"format": "manifest/v1", "files": {}}
    for name, text in sorted(files.items()):
        digest = hashlib.sha256(text.encode()).hexdigest()
        manifest["files"][name] = {"sha256": digest, "bytes": len(text.encode())}
        (out_dir / name).write_text(text)
    (out_dir / "manifest.json").write_text(canonical_dumps(manifest))
