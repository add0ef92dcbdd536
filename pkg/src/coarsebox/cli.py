"""Batch command-line front end.

Subcommands: chain build, box assemble|diagnostics, maps verify|enumerate|net|act,
limit run, gh bounds|evidence, measure uniform|push|prokhorov|defect,
couple defect|extend|check, pipeline run.

Exit codes: 0 success, 2 validation error, 3 budget exhaustion, 4 infeasible stage.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import boxspace as bx
from . import coarse as cs
from . import ghmetric as gh
from . import limits as lm
from . import measures as ms
from . import coupling as cp
from .bundles import bundled_configs
from .errors import CoarseboxError, ValidationError
from .groups import build_family, chain_from_payload, chain_to_payload
from .pipeline import ExperimentConfig, run as run_pipeline
from .utils import canonical_dumps


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError("input file not found", path=path) from None
    except json.JSONDecodeError as exc:
        raise ValidationError("input file is not valid JSON", path=path, reason=str(exc)) from None


def _write_output(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_chain(path: str):
    return chain_from_payload(_load_json(path))


def _chain_level(ref: str):
    """Parse 'chain.json:LEVEL' into a quotient."""
    path, _, level_text = ref.rpartition(":")
    if not path:
        raise ValidationError("expected FILE:LEVEL", ref=ref)
    chain = _load_chain(path)
    level = int(level_text)
    if not 1 <= level <= chain.depth:
        raise ValidationError("level out of range", level=level, depth=chain.depth)
    return chain, chain.quotients[level - 1]


def _load_space(path: str):
    payload = _load_json(path)
    return gh.space_from_payload(payload)


def _parse_word(text: str) -> list[str]:
    return [s for s in text.split(",") if s]


def _parse_indices(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _mapspace_from_file(path: str, budget: int | None):
    payload = _load_json(path)
    if payload.get("format") != "mapspace/v1":
        raise ValidationError("not a map-space payload", path=path)
    dom_ref, cod_ref = payload["domain_ref"], payload["codomain_ref"]
    chain_d = build_family(dom_ref["family"], dom_ref["depth"])
    chain_c = build_family(cod_ref["family"], cod_ref["depth"])
    domain = chain_d.quotients[dom_ref["level"] - 1]
    codomain = chain_c.quotients[cod_ref["level"] - 1]
    controls = cs.controls_from_payload(payload["controls"])
    flags = payload["flags"]
    space = cs.enumerate_map_space(
        domain, codomain, controls,
        basepointed=flags["basepointed"], injective_required=flags["injective"],
        node_budget=budget or cs.DEFAULT_NODE_BUDGET)
    stored = [tuple(t) for t in payload["members"]]
    if [list(m.table) for m in space.members] != payload["members"]:
        raise ValidationError("stored members disagree with re-enumeration", path=path)
    return space


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_chain_build(args) -> int:
    from .groups import DEFAULT_BALL_BUDGET

    chain = build_family(args.family, args.depth,
                         budget=args.ball_budget or DEFAULT_BALL_BUDGET)
    _write_output(canonical_dumps(chain_to_payload(chain)), args.output)
    if args.dot:
        for q in chain.quotients:
            Path(f"{args.dot}-level{q.level}.dot").write_text(q.to_dot())
    return 0


def _cmd_box_assemble(args) -> int:
    chain = _load_chain(args.chain)
    box = bx.assemble(chain)
    _write_output(canonical_dumps(bx.boxspace_to_payload(box)), args.output)
    return 0


def _cmd_box_diagnostics(args) -> int:
    chain = _load_chain(args.chain)
    report = bx.expander_report(chain, eigen_budget=args.eigen_budget, threads=args.threads)
    if args.format == "csv":
        _write_output(report.as_csv(), args.output)
    else:
        _write_output(canonical_dumps(report.as_payload()), args.output)
    return 0


def _cmd_maps_verify(args) -> int:
    _, domain = _chain_level(args.domain)
    _, codomain = _chain_level(args.codomain)
    table = _parse_indices(args.table)
    record = cs.MapRecord(domain, codomain, tuple(table))
    controls = cs.parse_controls(args.controls)
    report = cs.verify(record, controls, mode=args.mode)
    _write_output(canonical_dumps(report.as_payload()), args.output)
    return 0 if report.passed else 0  # failure is an outcome, not an error


def _cmd_maps_enumerate(args) -> int:
    chain_d, domain = _chain_level(args.domain)
    chain_c, codomain = _chain_level(args.codomain)
    controls = cs.parse_controls(args.controls)
    space = cs.enumerate_map_space(domain, codomain, controls,
                                   basepointed=args.basepointed,
                                   injective_required=args.injective,
                                   node_budget=args.budget or cs.DEFAULT_NODE_BUDGET)
    dom_path, _, dom_level = args.domain.rpartition(":")
    cod_path, _, cod_level = args.codomain.rpartition(":")
    payload = cs.mapspace_to_payload(
        space,
        {"family": chain_d.family, "depth": chain_d.depth, "level": int(dom_level)},
        {"family": chain_c.family, "depth": chain_c.depth, "level": int(cod_level)},
    )
    _write_output(canonical_dumps(payload), args.output)
    return 0


def _cmd_maps_net(args) -> int:
    space = _mapspace_from_file(args.space, args.budget)
    cert = cs.eps_net(space, args.radius_exponent)
    _write_output(canonical_dumps(cert.as_payload()), args.output)
    return 0


def _cmd_maps_act(args) -> int:
    space = _mapspace_from_file(args.space, args.budget)
    if not 0 <= args.member < space.size:
        raise ValidationError("member index out of range", member=args.member, size=space.size)
    outcome = cs.act_in_space(space, _parse_word(args.word), args.member)
    payload = {
        "table": list(outcome.record.table),
        "verifies": outcome.verifies,
        "member_index": outcome.member_index,
        "in_space": outcome.in_space,
    }
    _write_output(canonical_dumps(payload), args.output)
    return 0


def _cmd_limit_run(args) -> int:
    chain_g = _load_chain(args.domain_chain)
    chain_h = _load_chain(args.codomain_chain)
    controls = cs.parse_controls(args.controls)
    if chain_g.depth != chain_h.depth:
        raise ValidationError("chains must have equal depth",
                              g=chain_g.depth, h=chain_h.depth)
    selected = []
    for level in range(1, chain_g.depth + 1):
        space = cs.enumerate_map_space(chain_g.quotients[level - 1],
                                       chain_h.quotients[level - 1], controls,
                                       basepointed=True)
        if space.size == 0:
            raise ValidationError("empty map space at a level", level=level)
        rank = min(args.member_rank, space.size - 1)
        selected.append((level, space.members[rank]))
    pm = lm.diagonal_limit(selected, chain_g, chain_h, controls, args.radius)
    report = lm.verify_partial(pm, controls)
    sys.stdout.write(lm.survival_table_text(pm))
    payload = {"partial_map": lm.partialmap_to_payload(pm), "verify": report.as_payload()}
    if args.output:
        Path(args.output).write_text(canonical_dumps(payload))
    return 0


def _cmd_gh_bounds(args) -> int:
    x = _load_space(args.space_a)
    y = _load_space(args.space_b)
    result = gh.gh_bounds(x, y, budget=args.budget or gh.DEFAULT_GH_BUDGET)
    _write_output(canonical_dumps(result.as_payload()), args.output)
    return 0


def _cmd_gh_evidence(args) -> int:
    target = _load_space(args.target)
    seq = [_load_space(p) for p in args.spaces]
    evidence = gh.convergence_evidence(seq, target, budget=args.budget or gh.DEFAULT_GH_BUDGET)
    _write_output(canonical_dumps(evidence.as_payload()), args.output)
    return 0


def _cmd_measure_uniform(args) -> int:
    space = _load_space(args.space)
    mu = ms.uniform(space)
    _write_output(canonical_dumps(ms.measure_to_payload(mu)), args.output)
    return 0


def _cmd_measure_push(args) -> int:
    domain = _load_space(args.domain)
    codomain = _load_space(args.codomain)
    mu = ms.measure_from_payload(_load_json(args.measure), domain)
    table = tuple(_parse_indices(args.table))
    record = cs.MapRecord(domain, codomain, table)
    _write_output(canonical_dumps(ms.measure_to_payload(ms.pushforward(mu, record))), args.output)
    return 0


def _cmd_measure_prokhorov(args) -> int:
    space = _load_space(args.space)
    lam = ms.measure_from_payload(_load_json(args.measure_a), space)
    nu = ms.measure_from_payload(_load_json(args.measure_b), space)
    if args.bounds:
        lo, hi = ms.prokhorov_bounds(lam, nu)
        payload = {"lower": lo, "upper": hi, "exact": False}
    else:
        payload = {"value": ms.prokhorov(lam, nu), "exact": True}
    _write_output(canonical_dumps(payload), args.output)
    return 0


def _cmd_measure_defect(args) -> int:
    space = _load_space(args.space)
    action_payload = _load_json(args.action)
    perms = {s: tuple(p) for s, p in action_payload["permutations"].items()}
    action = ms.GroupAction(space, perms, dict(action_payload["inverse_symbol"]))
    mu = ms.measure_from_payload(_load_json(args.measure), space)
    defect = ms.invariance_defect(mu, action, args.word_length)
    if args.format == "csv":
        _write_output(ms.defects_to_csv(defect), args.output)
    else:
        _write_output(canonical_dumps(defect.as_payload()), args.output)
    return 0


def _load_action(path: str, space) -> ms.GroupAction:
    payload = _load_json(path)
    perms = {s: tuple(p) for s, p in payload["permutations"].items()}
    return ms.GroupAction(space, perms, dict(payload["inverse_symbol"]))


def _cmd_couple_defect(args) -> int:
    domain = _load_space(args.domain)
    codomain = _load_space(args.codomain)
    record = cs.MapRecord(domain, codomain, tuple(_parse_indices(args.table)))
    dom_action = _load_action(args.domain_action, domain)
    cod_action = _load_action(args.codomain_action, codomain)
    value = cp.equivariance_defect(record, dom_action, cod_action, _parse_word(args.word))
    _write_output(canonical_dumps({"word": args.word, "defect": float(value)}), args.output)
    return 0


def _cmd_couple_extend(args) -> int:
    space = _load_space(args.space)
    codomain = _load_space(args.codomain) if args.codomain else space
    result = cp.extend_from_net(space, _parse_indices(args.net),
                                _parse_indices(args.values), codomain,
                                Fraction(args.radius))
    _write_output(canonical_dumps(result.as_payload()), args.output)
    return 0


def _cmd_couple_check(args) -> int:
    if args.instances:
        rows = []
        failures = 0
        for record, da, ca, word, subset, xi in cp.preimage_instances(args.seed, args.instances):
            outcome = cp.preimage_hausdorff_check(record, da, ca, word, subset, xi)
            failures += outcome.status == "fail"
            rows.append(outcome.as_payload())
        payload = {"seed": args.seed, "instances": args.instances,
                   "failures": failures, "results": rows}
        _write_output(canonical_dumps(payload), args.output)
        return 0
    domain = _load_space(args.domain)
    codomain = _load_space(args.codomain)
    record = cs.MapRecord(domain, codomain, tuple(_parse_indices(args.table)))
    dom_action = _load_action(args.domain_action, domain)
    cod_action = _load_action(args.codomain_action, codomain)
    outcome = cp.preimage_hausdorff_check(record, dom_action, cod_action,
                                          _parse_word(args.word),
                                          _parse_indices(args.subset),
                                          Fraction(args.xi))
    _write_output(canonical_dumps(outcome.as_payload()), args.output)
    return 0


def _cmd_pipeline_run(args) -> int:
    if args.bundled:
        configs = bundled_configs()
        if args.bundled not in configs:
            raise ValidationError("unknown bundled config", name=args.bundled,
                                  known=sorted(configs))
        config = configs[args.bundled]
    elif args.config:
        config = ExperimentConfig.from_payload(_load_json(args.config))
    else:
        raise ValidationError("pipeline run needs --config or --bundled")
    report = run_pipeline(config, out_dir=args.out_dir, threads=args.threads)
    if not args.out_dir:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.summary())
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coarsebox",
        description="Finite quotient chains, box-space diagnostics, coarse-map "
                    "spaces, diagonal limits, GH and Prokhorov evidence.")
    parser.add_argument("--version", action="version", version=f"coarsebox {__version__}")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (results never depend on this)")
    parser.add_argument("--budget", type=int, default=None, help="override the default search budget")
    parser.add_argument("--seed", type=int, default=0, help="seed for generated instances")
    parser.add_argument("--json-errors", action="store_true", help="emit machine-readable errors on stderr")
    sub = parser.add_subparsers(dest="group", required=True)

    chain = sub.add_parser("chain", help="quotient chains").add_subparsers(dest="cmd", required=True)
    p = chain.add_parser("build", help="build a chain from a family descriptor")
    p.add_argument("--family", required=True, help="cyclic:k[:start] | sl2:p1,p2,... | free:rank:SPEC")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--ball-budget", type=int, default=None, help="element enumeration cap")
    p.add_argument("-o", "--output")
    p.add_argument("--dot", help="prefix for per-level Cayley-graph DOT files")
    p.set_defaults(handler=_cmd_chain_build)

    box = sub.add_parser("box", help="box spaces and diagnostics").add_subparsers(dest="cmd", required=True)
    p = box.add_parser("assemble")
    p.add_argument("--chain", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_box_assemble)
    p = box.add_parser("diagnostics")
    p.add_argument("--chain", required=True)
    p.add_argument("--eigen-budget", type=int, default=bx.EIGEN_BUDGET)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_box_diagnostics)

    maps = sub.add_parser("maps", help="coarse maps and map spaces").add_subparsers(dest="cmd", required=True)
    p = maps.add_parser("verify")
    p.add_argument("--domain", required=True, help="chain.json:LEVEL")
    p.add_argument("--codomain", required=True, help="chain.json:LEVEL")
    p.add_argument("--table", required=True, help="comma-separated codomain indices")
    p.add_argument("--controls", required=True, help="PLUS/MINUS/c, e.g. affine:2,0/affine:0.5,0/1")
    p.add_argument("--mode", choices=["embedding", "equivalence"], default="equivalence")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_maps_verify)
    p = maps.add_parser("enumerate")
    p.add_argument("--domain", required=True, help="chain.json:LEVEL")
    p.add_argument("--codomain", required=True, help="chain.json:LEVEL")
    p.add_argument("--controls", required=True)
    p.add_argument("--basepointed", action="store_true")
    p.add_argument("--injective", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_maps_enumerate)
    p = maps.add_parser("net")
    p.add_argument("--space", required=True, help="map-space JSON file")
    p.add_argument("-R", "--radius-exponent", type=int, required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_maps_net)
    p = maps.add_parser("act")
    p.add_argument("--space", required=True)
    p.add_argument("--member", type=int, required=True)
    p.add_argument("--word", required=True, help="comma-separated generator symbols")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_maps_act)

    limit = sub.add_parser("limit", help="diagonal limits").add_subparsers(dest="cmd", required=True)
    p = limit.add_parser("run")
    p.add_argument("--domain-chain", required=True)
    p.add_argument("--codomain-chain", required=True)
    p.add_argument("--controls", required=True)
    p.add_argument("-R", "--radius", type=int, required=True)
    p.add_argument("--member-rank", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_limit_run)

    ghp = sub.add_parser("gh", help="Gromov-Hausdorff bounds").add_subparsers(dest="cmd", required=True)
    p = ghp.add_parser("bounds")
    p.add_argument("space_a")
    p.add_argument("space_b")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_gh_bounds)
    p = ghp.add_parser("evidence")
    p.add_argument("--target", required=True)
    p.add_argument("spaces", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_gh_evidence)

    measure = sub.add_parser("measure", help="finite measures").add_subparsers(dest="cmd", required=True)
    p = measure.add_parser("uniform")
    p.add_argument("--space", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_measure_uniform)
    p = measure.add_parser("push")
    p.add_argument("--domain", required=True)
    p.add_argument("--codomain", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_measure_push)
    p = measure.add_parser("prokhorov")
    p.add_argument("--space", required=True)
    p.add_argument("measure_a")
    p.add_argument("measure_b")
    p.add_argument("--bounds", action="store_true", help="certified bounds instead of the exact sweep")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_measure_prokhorov)
    p = measure.add_parser("defect")
    p.add_argument("--space", required=True)
    p.add_argument("--action", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("-L", "--word-length", type=int, default=2)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_measure_defect)

    couple = sub.add_parser("couple", help="almost-equivariant isometries").add_subparsers(dest="cmd", required=True)
    p = couple.add_parser("defect")
    p.add_argument("--domain", required=True)
    p.add_argument("--codomain", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--domain-action", required=True)
    p.add_argument("--codomain-action", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_couple_defect)
    p = couple.add_parser("extend")
    p.add_argument("--space", required=True)
    p.add_argument("--codomain")
    p.add_argument("--net", required=True, help="comma-separated point indices")
    p.add_argument("--values", required=True, help="comma-separated codomain indices")
    p.add_argument("--radius", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_couple_extend)
    p = couple.add_parser("check")
    p.add_argument("--instances", type=int, help="run this many seeded generated instances")
    p.add_argument("--domain")
    p.add_argument("--codomain")
    p.add_argument("--table")
    p.add_argument("--domain-action")
    p.add_argument("--codomain-action")
    p.add_argument("--word")
    p.add_argument("--subset")
    p.add_argument("--xi")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_couple_check)

    pipe = sub.add_parser("pipeline", help="end-to-end experiments").add_subparsers(dest="cmd", required=True)
    p = pipe.add_parser("run")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--bundled", help="name of a bundled config")
    p.add_argument("--out-dir", help="write report and artifacts here")
    p.set_defaults(handler=_cmd_pipeline_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except CoarseboxError as exc:
        if getattr(args, "json_errors", False):
            sys.stderr.write(canonical_dumps(exc.payload()))
        else:
            sys.stderr.write(f"error: {exc}\n")
            for key, value in sorted(exc.details.items()):
                sys.stderr.write(f"  {key}: {value}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
