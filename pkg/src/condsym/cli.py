"""Command-line driver: ``condsym classify|reduce|verify|chain PROBLEM [options]``.

Exit status: 0 when every verdict is determinate, 2 when some verdict is
undetermined, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import canonical, parse_io, verify
from .classify import (
    DEFAULT_SIGMA_MAX,
    PARTIAL,
    PARTIAL_CERTIFIED,
    UNDETERMINED,
    WEAK_CS,
    WEAK_CS_CERTIFIED,
    ClassificationReport,
    PdeProblem,
    classify,
    delta_chain,
    partial_report,
)
from .jetspace import JetError
from .kernel import KernelError, to_text

log = logging.getLogger("condsym")

EXIT_OK, EXIT_ERROR, EXIT_UNDETERMINED = 0, 1, 2


class CliError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: Path
    fields: tuple[str, ...] = ()
    solutions: tuple[str, ...] = ()
    sigma_max: int = DEFAULT_SIGMA_MAX
    depth: int | None = None
    certify: bool = False
    format: str = "human"
    out: Path | None = None

    def __post_init__(self):
        if self.sigma_max < 1:
            raise CliError("--sigma-max must be at least 1")
        if self.depth is not None and self.depth < 0:
            raise CliError("--depth must be non-negative")


def _load(cfg: RunConfig) -> parse_io.ProblemDocument:
    try:
        text = cfg.problem.read_text()
    except FileNotFoundError:
        raise CliError(f"file not found: {cfg.problem}") from None
    except OSError as exc:
        raise CliError(f"cannot read {cfg.problem}: {exc.strerror}") from None
    try:
        return parse_io.parse_problem(text)
    except parse_io.ParseError as exc:
        raise CliError(f"{cfg.problem}: {exc}") from None


def _fields(cfg: RunConfig, doc: parse_io.ProblemDocument, required: bool = True) -> list[str]:
    declared = [f.name for f in doc.fields]
    if cfg.fields:
        unknown = [f for f in cfg.fields if f not in declared]
        if unknown:
            raise CliError(f"unknown field {unknown[0]!r} (declared: {', '.join(declared) or 'none'})")
        return [f for f in declared if f in cfg.fields]
    if len(declared) == 1:
        return declared
    if not required:
        return []
    if not declared:
        raise CliError("the problem declares no field")
    raise CliError(f"several fields are declared ({', '.join(declared)}); choose one with --field")


def _problem(cfg: RunConfig, doc: parse_io.ProblemDocument) -> PdeProblem:
    return doc.problem().with_depth(cfg.depth) if cfg.depth is not None else doc.problem()


def _solutions(cfg: RunConfig, doc: parse_io.ProblemDocument) -> list:
    names = cfg.solutions or tuple(s.name for s in doc.solutions)
    out = []
    for name in names:
        if "=" in name:
            out.append(parse_io.parse_inline_solution(name, doc.ctx, name=name.replace(" ", "")))
        else:
            try:
                out.append(doc.solution(name))
            except KeyError as exc:
                raise CliError(exc.args[0]) from None
    return out


def _certified(report: ClassificationReport, witnesses, P, X, sigma_max):
    """Try the weak-CS route first, then the partial-symmetry route."""
    if report.verdict == WEAK_CS:
        report = verify.certify(report, witnesses)
        if report.verdict == WEAK_CS_CERTIFIED:
            return report
    partial = partial_report(X, P, sigma_max)
    if partial.verdict == PARTIAL:
        certified = verify.certify(partial, witnesses)
        if certified.verdict == PARTIAL_CERTIFIED:
            return certified
    return report


def run_classify(cfg: RunConfig) -> tuple[int, str]:
    doc = _load(cfg)
    P = _problem(cfg, doc)
    reports = []
    for name in _fields(cfg, doc):
        X = doc.field(name)
        r = classify(X, P, cfg.sigma_max, with_reduction=True)
        if cfg.certify:
            r = _certified(r, _solutions(cfg, doc), P, X, cfg.sigma_max)
        reports.append(r)
    status = EXIT_UNDETERMINED if any(r.verdict == UNDETERMINED for r in reports) else EXIT_OK
    return status, _render_reports(reports, cfg.format)


def _render_reports(reports, fmt: str) -> str:
    if fmt == "structured":
        trees = [parse_io.report_tree(r) for r in reports]
        return json.dumps(trees[0] if len(trees) == 1 else trees, indent=2) + "\n"
    return "\n".join(parse_io.emit_report(r, "human") for r in reports)


def _coordinates(doc, name: str) -> canonical.CoordinateChange:
    X = doc.field(name)
    spec = doc.coordinates_for(name)
    try:
        if spec is not None:
            cc = parse_io.coordinate_change_from_spec(spec, doc.ctx)
            return canonical.validate_coordinates(X, cc)
        return canonical.derive_canonical_coordinates(X)
    except canonical.NotDerivable as exc:
        raise CliError(
            f"cannot derive adapted coordinates for {name}: {exc}; "
            f"supply them with a 'coordinates for {name}: ...' block"
        ) from None


def run_reduce(cfg: RunConfig) -> tuple[int, str]:
    doc = _load(cfg)
    P = _problem(cfg, doc)
    results = []
    for name in _fields(cfg, doc):
        cc = _coordinates(doc, name)
        transformed = canonical.transform_pde(P, cc)
        parts = [canonical.s_form_decompose(e, transformed.change.adapted) for e in transformed.equations]
        reduced = []
        for part in parts:
            if part.shape != canonical.UNCLASSIFIED:
                reduced += [to_text(e) for e in canonical.reduce(part)]
        results.append(
            {
                "field": name,
                "coordinates": [line.replace("**", "^") for line in cc.describe()],
                "multiplier": [to_text(m) for m in transformed.multipliers],
                "transformed": [to_text(e) for e in transformed.equations],
                "decomposition": [
                    {
                        "shape": part.shape,
                        "theta": to_text(part.theta_part),
                        "components": [{"R": to_text(r), "K": to_text(k)} for r, k in part.components],
                        "remainder": to_text(part.remainder),
                    }
                    for part in parts
                ],
                "reduced_system": reduced,
                "depth": P.consequence_depth,
                "sigma_max": cfg.sigma_max,
            }
        )
    status = EXIT_OK
    if any(p["shape"] == canonical.UNCLASSIFIED for r in results for p in r["decomposition"]):
        status = EXIT_UNDETERMINED
    if cfg.format == "structured":
        return status, json.dumps(results[0] if len(results) == 1 else results, indent=2) + "\n"
    lines = []
    for r in results:
        lines.append(f"{doc.name} / field {r['field']}")
        lines += [f"  {c}" for c in r["coordinates"]]
        for m, e, part in zip(r["multiplier"], r["transformed"], r["decomposition"]):
            lines.append(f"  multiplier: {m}")
            lines.append(f"  transformed: {e} = 0")
            lines.append(f"  shape: {part['shape']}")
            if part["theta"] != "0":
                lines.append(f"  theta: {part['theta']}")
            for k, comp in enumerate(part["components"]):
                lines.append(f"    R{k} = {comp['R']}    K{k} = {comp['K']}")
            if part["remainder"] != "0":
                lines.append(f"  unclassified remainder: {part['remainder']}")
        lines.append("  reduced system:")
        lines += [f"    {e} = 0" for e in r["reduced_system"]] or ["    (none)"]
        lines.append(f"  depth: {r['depth']}")
        lines.append(f"  sigma_max: {r['sigma_max']}")
    return status, "\n".join(lines) + "\n"


def run_verify(cfg: RunConfig) -> tuple[int, str]:
    doc = _load(cfg)
    P = _problem(cfg, doc)
    witnesses = _solutions(cfg, doc)
    if not witnesses:
        raise CliError("no solution given; declare a solution block or pass --solution")
    checks = [verify.check_system(P.equations, w, "equations") for w in witnesses]
    reports = []
    for name in _fields(cfg, doc, required=cfg.certify):
        X = doc.field(name)
        for w in witnesses:
            checks.append(
                verify.WitnessCheck(
                    w.name,
                    f"invariant surface of {name}",
                    verify.verify_invariance_of_solution(X, w),
                    verify.invariance_residuals(X, w),
                )
            )
        if cfg.certify:
            r = classify(X, P, cfg.sigma_max)
            reports.append(_certified(r, witnesses, P, X, cfg.sigma_max))
    status = EXIT_OK
    if any(r.verdict == UNDETERMINED for r in reports):
        status = EXIT_UNDETERMINED
    table = [{"witness": c.witness, "system": c.system, "passed": c.passed} for c in checks]
    if cfg.format == "structured":
        tree = {"problem": doc.name, "checks": table, "reports": [parse_io.report_tree(r) for r in reports]}
        return status, json.dumps(tree, indent=2) + "\n"
    width = max(len(c["witness"]) for c in table)
    lines = [f"{doc.name}: witness checks"]
    lines += [f"  {c['witness']:<{width}}  {c['system']}: {'pass' if c['passed'] else 'fail'}" for c in table]
    text = "\n".join(lines) + "\n"
    if reports:
        text += "\n" + _render_reports(reports, "human")
    return status, text


def run_chain(cfg: RunConfig) -> tuple[int, str]:
    doc = _load(cfg)
    P = _problem(cfg, doc)
    out = []
    status = EXIT_OK
    for name in _fields(cfg, doc):
        X = doc.field(name)
        weak = delta_chain(X, P, cfg.sigma_max, invariant_surface=True)
        partial = delta_chain(X, P, cfg.sigma_max, invariant_surface=False)
        longest = partial if len(partial) >= len(weak) else weak
        if not (weak.stabilized or partial.stabilized):
            status = EXIT_UNDETERMINED
        out.append(
            {
                "field": name,
                "chain": [to_text(e) for e in longest.system()],
                "sigma_with_invariant_surface": weak.sigma,
                "sigma_partial": partial.sigma,
                "depth": P.consequence_depth,
                "sigma_max": cfg.sigma_max,
            }
        )
    if cfg.format == "structured":
        return status, json.dumps(out[0] if len(out) == 1 else out, indent=2) + "\n"
    lines = []
    for r in out:
        lines.append(f"{doc.name} / field {r['field']}")
        lines += [f"  Delta^({k}) = {e}" for k, e in enumerate(r["chain"])]
        for key, label in (("sigma_with_invariant_surface", "with invariant surface"), ("sigma_partial", "partial")):
            val = r[key]
            lines.append(f"  sigma ({label}): {val if val is not None else 'not reached'}")
        lines.append(f"  depth: {r['depth']}")
        lines.append(f"  sigma_max: {r['sigma_max']}")
    return status, "\n".join(lines) + "\n"


COMMANDS = {"classify": run_classify, "reduce": run_reduce, "verify": run_verify, "chain": run_chain}
HELP = {
    "classify": "verdict and order for each field",
    "reduce": "adapted coordinates and reduced system",
    "verify": "check solutions against the equations and invariant surfaces",
    "chain": "print the sequence Delta^(k)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condsym", description="Classify conditional symmetries of PDEs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("problem", type=Path, help="problem file")
        p.add_argument("--field", action="append", default=[], help="field name (repeatable)")
        p.add_argument(
            "--solution", action="append", default=[], help="solution name or inline 'u = ...' (repeatable)"
        )
        p.add_argument("--sigma-max", type=int, default=DEFAULT_SIGMA_MAX, metavar="N")
        p.add_argument("--depth", type=int, default=None, metavar="N", help="consequence depth")
        p.add_argument("--certify", action="store_true", help="certify candidate verdicts with the solutions")
        p.add_argument("--format", choices=("human", "structured"), default="human")
        p.add_argument("--out", type=Path, default=None, metavar="PATH")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = RunConfig(
            args.command,
            args.problem,
            tuple(args.field),
            tuple(args.solution),
            args.sigma_max,
            args.depth,
            args.certify,
            args.format,
            args.out,
        )
        status, text = COMMANDS[cfg.command](cfg)
    except (CliError, parse_io.ParseError, KernelError, JetError, ValueError) as exc:
        print(f"condsym: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if cfg.out is not None:
        try:
            cfg.out.write_text(text)
        except OSError as exc:
            print(f"condsym: error: cannot write {cfg.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_ERROR
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
