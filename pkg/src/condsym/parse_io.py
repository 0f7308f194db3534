"""Problem-file grammar, expression parsing and report serialization.

Expressions use infix ``+ - * /``, powers with ``^`` or ``**``, parentheses
and the functions ``exp``, ``log``, ``sin``, ``cos``. Derivatives are written
as suffixes: ``u_xxt`` is ``u`` differentiated twice in ``x`` and once in
``t``; letter order does not matter.

A problem file is a sequence of line blocks::

    problem boussinesq
      independents x, t
      dependents u
      order 4
      equation main: u_tt + u_xxxx + u*u_xx + u_x^2 = 0
      field F1: xi_t = 1; phi_u = 1/t^2 - 2*u/t
      coordinates for F1: s = t; z1 = x; v = t^2*u - t
      solution S1 [params c]: u = c*exp(x)

``#`` starts a comment. ``equation`` accepts an optional ``[lead u_tt]``
and ``depth N`` sets the consequence depth.
"""

from __future__ import annotations

import ast
import json
import logging
import re
import warnings
from dataclasses import dataclass
from typing import Iterable

import sympy as sp

from .classify import ClassificationReport, PdeProblem
from .jetspace import JetContext, JetError
from .kernel import Expression, KernelError, normalize, to_text
from .liefield import VectorField

log = logging.getLogger(__name__)

FUNCTIONS = {"exp": sp.exp, "log": sp.log, "sin": sp.sin, "cos": sp.cos}


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message, self.line, self.column = message, line, column
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: " if column is not None else f"line {line}: "
        super().__init__(where + message)


class UnknownIdentifier(ParseError):
    pass


class OrderExtended(UserWarning):
    """An expression uses derivatives above the declared working order."""


def _caret_to_pow(text: str) -> tuple[str, list[int]]:
    # Map '^' to '**' and remember where the shifts happened, to report
    # columns relative to the original text.
    out, shifts = [], []
    for k, ch in enumerate(text):
        if ch == "^":
            out.append("**")
            shifts.append(k)
        else:
            out.append(ch)
    return "".join(out), shifts


def _original_column(col: int, shifts: list[int]) -> int:
    for k in shifts:
        if col > k:
            col -= 1
    return col


class _Builder(ast.NodeVisitor):
    def __init__(self, names: dict, line: int, offset: int, shifts: list[int], source: str):
        self.names = names
        self.source = source
        self.line = line
        self.offset = offset
        self.shifts = shifts

    def fail(self, node, message, cls=ParseError):
        col = _original_column(getattr(node, "col_offset", 0), self.shifts)
        raise cls(message, self.line, self.offset + col + 1)

    def visit_Expression(self, node):
        return self.visit(node.body)

    def visit_BinOp(self, node):
        a, b = self.visit(node.left), self.visit(node.right)
        op = type(node.op)
        if op is ast.Add:
            return a + b
        if op is ast.Sub:
            return a - b
        if op is ast.Mult:
            return a * b
        if op is ast.Div:
            if b == 0:
                self.fail(node.right, "division by zero")
            return a / b
        if op is ast.Pow:
            return a**b
        self.fail(node, f"unsupported operator {op.__name__}")

    def visit_UnaryOp(self, node):
        val = self.visit(node.operand)
        if isinstance(node.op, ast.USub):
            return -val
        if isinstance(node.op, ast.UAdd):
            return val
        self.fail(node, "unsupported unary operator")

    def visit_Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            self.fail(node, f"unsupported literal {node.value!r}")
        if isinstance(node.value, int):
            return sp.Integer(node.value)
        return sp.Rational(ast.get_source_segment(self.source, node) or repr(node.value))

    def visit_Name(self, node):
        sym = self.names.get(node.id)
        if sym is None:
            self.fail(node, f"unknown identifier {node.id!r}", UnknownIdentifier)
        return sym

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            name = getattr(node.func, "id", "?")
            self.fail(node, f"unknown function {name!r}", UnknownIdentifier)
        if len(node.args) != 1 or node.keywords:
            self.fail(node, f"{node.func.id} takes exactly one argument")
        return FUNCTIONS[node.func.id](self.visit(node.args[0]))

    def generic_visit(self, node):
        self.fail(node, f"unsupported syntax ({type(node).__name__})")


_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


def _name_table(ctx: JetContext, text: str, parameters: Iterable[str]) -> dict:
    names = {n: s for n, s in zip(ctx.independents, ctx.x)}
    names.update({n: s for n, s in zip(ctx.dependents, ctx.u)})
    for p in parameters:
        names[p] = sp.Symbol(p)
    for ident in _IDENT.findall(text):
        if ident not in names and ident not in FUNCTIONS:
            dec = ctx.decode(sp.Symbol(ident))
            if dec is not None:
                names[ident] = ctx.jet(*dec)
    return names


def parse_expression(
    text: str,
    ctx: JetContext,
    parameters: Iterable[str] = (),
    line: int | None = None,
    offset: int = 0,
) -> Expression:
    """Parse and normalize an expression over ``ctx``.

    ``u_xt`` and ``u_tx`` denote the same symbol. Derivatives above
    ``ctx.order`` are accepted with an :class:`OrderExtended` warning.
    """
    src, shifts = _caret_to_pow(text.strip())
    lead = len(text) - len(text.lstrip())
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        col = _original_column((exc.offset or 1) - 1, shifts)
        raise ParseError(f"syntax error: {exc.msg}", line or exc.lineno, offset + lead + col + 1) from None
    builder = _Builder(_name_table(ctx, src, parameters), line or 1, offset + lead, shifts, src)
    try:
        expr = builder.visit(tree)
        expr = normalize(expr)
    except KernelError as exc:
        raise ParseError(str(exc), line or 1, offset + lead + 1) from None
    order = ctx.order_of(expr)
    if order > ctx.order:
        warnings.warn(f"derivative order {order} exceeds declared order {ctx.order}", OrderExtended, stacklevel=2)
    return expr


def parse_equation(text: str, ctx: JetContext, parameters=(), line=None, offset=0) -> Expression:
    """``lhs = rhs`` becomes ``lhs - rhs``; a bare expression is taken as ``= 0``."""
    if text.count("=") > 1:
        raise ParseError("more than one '=' in equation", line, offset + 1)
    lhs, sep, rhs = text.partition("=")
    e = parse_expression(lhs, ctx, parameters, line, offset)
    if sep:
        e = normalize(e - parse_expression(rhs, ctx, parameters, line, offset + len(lhs) + 1))
    return e


@dataclass(frozen=True)
class EquationSpec:
    name: str
    expression: Expression
    lead: sp.Symbol | None = None


@dataclass(frozen=True)
class FieldSpec:
    name: str
    components: tuple[tuple[str, Expression], ...]

    def build(self, ctx: JetContext) -> VectorField:
        return VectorField.from_components(ctx, self.name, **dict(self.components))


@dataclass(frozen=True)
class CoordinatesSpec:
    field: str
    assignments: tuple[tuple[str, Expression], ...]


@dataclass(frozen=True)
class SolutionSpec:
    name: str
    parameters: tuple[str, ...]
    assignments: tuple[tuple[str, Expression], ...]


@dataclass(frozen=True)
class ProblemDocument:
    name: str
    independents: tuple[str, ...]
    dependents: tuple[str, ...]
    order: int
    equations: tuple[EquationSpec, ...] = ()
    fields: tuple[FieldSpec, ...] = ()
    coordinates: tuple[CoordinatesSpec, ...] = ()
    solutions: tuple[SolutionSpec, ...] = ()
    depth: int | None = None

    @property
    def ctx(self) -> JetContext:
        return JetContext(self.independents, self.dependents, self.order)

    def problem(self) -> PdeProblem:
        return PdeProblem(
            self.ctx,
            tuple(e.expression for e in self.equations),
            tuple(e.lead for e in self.equations) if any(e.lead is not None for e in self.equations) else (),
            self.depth,
            self.name,
        )

    def field(self, name: str) -> VectorField:
        for f in self.fields:
            if f.name == name:
                return f.build(self.ctx)
        known = ", ".join(f.name for f in self.fields) or "none"
        raise KeyError(f"no field named {name!r} (declared: {known})")

    def coordinates_for(self, name: str) -> CoordinatesSpec | None:
        return next((c for c in self.coordinates if c.field == name), None)

    def solution(self, name: str):
        for s in self.solutions:
            if s.name == name:
                return solution_from_spec(s, self.ctx)
        known = ", ".join(s.name for s in self.solutions) or "none"
        raise KeyError(f"no solution named {name!r} (declared: {known})")


def solution_from_spec(spec: SolutionSpec, ctx: JetContext):
    from .verify import ExplicitSolution

    values = dict(spec.assignments)
    missing = [d for d in ctx.dependents if d not in values]
    if missing:
        raise ParseError(f"solution {spec.name!r} does not assign {', '.join(missing)}")
    return ExplicitSolution(ctx, tuple(values[d] for d in ctx.dependents), tuple(sp.Symbol(p) for p in spec.parameters), spec.name)


def coordinate_change_from_spec(spec: CoordinatesSpec, ctx: JetContext):
    from .canonical import coordinate_change

    if len(spec.assignments) != ctx.p + ctx.q:
        raise ParseError(
            f"coordinates for {spec.field}: expected {ctx.p} independent and {ctx.q} dependent assignments"
        )
    names = [n for n, _ in spec.assignments]
    maps = [e for _, e in spec.assignments]
    return coordinate_change(ctx, maps[: ctx.p], maps[ctx.p :], names=(names[: ctx.p], names[ctx.p :]))


_HEADER = re.compile(r"^(?P<kw>[a-z]+)\b\s*(?P<rest>.*)$")
_NAMED = re.compile(r"^(?P<name>[A-Za-z][\w]*)\s*(\[(?P<opts>[^\]]*)\])?\s*:(?P<body>.*)$")
_COORDS = re.compile(r"^for\s+(?P<name>[A-Za-z][\w]*)\s*:(?P<body>.*)$")


def _split_names(text: str, line: int) -> tuple[str, ...]:
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    for n in names:
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", n):
            raise ParseError(f"invalid variable name {n!r}", line)
    return names


def _assignments(body: str, line: int, col: int, parse) -> tuple[tuple[str, Expression], ...]:
    out = []
    pos = col
    for part in body.split(";"):
        if part.strip():
            key, sep, val = part.partition("=")
            if not sep:
                raise ParseError(f"expected 'name = expression' in {part.strip()!r}", line, pos + 1)
            out.append((key.strip(), parse(val, pos + len(key) + 1)))
        pos += len(part) + 1
    return tuple(out)


def parse_problem(text: str) -> ProblemDocument:
    """Parse a problem document; errors carry line and column."""
    name = None
    indep = deps = None
    order = None
    depth = None
    pending = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        m = _HEADER.match(line.strip())
        if not m:
            raise ParseError(f"cannot read {line.strip()!r}", lineno, indent + 1)
        kw, rest = m["kw"], m["rest"]
        col = line.index(rest, indent + len(kw)) if rest else len(line)
        if kw == "problem":
            if name is not None:
                raise ParseError("more than one problem block", lineno)
            name = rest.strip()
        elif kw == "independents":
            indep = _split_names(rest, lineno)
        elif kw == "dependents":
            deps = _split_names(rest, lineno)
        elif kw in ("order", "depth"):
            try:
                val = int(rest)
            except ValueError:
                raise ParseError(f"{kw} must be an integer", lineno, col + 1) from None
            if kw == "order":
                order = val
            else:
                depth = val
        elif kw in ("equation", "field", "coordinates", "solution"):
            pending.append((kw, rest, lineno, col))
        else:
            raise ParseError(f"unknown block {kw!r}", lineno, indent + 1)
    if name is None:
        raise ParseError("missing 'problem' line")
    if not indep or not deps:
        raise ParseError("missing 'independents' or 'dependents' line")
    dup = set(indep) & set(deps)
    if dup or len(set(indep)) != len(indep) or len(set(deps)) != len(deps):
        raise ParseError(f"duplicate variable names in {indep + deps}")
    try:
        ctx = JetContext(indep, deps, order or 1)
    except JetError as exc:
        raise ParseError(str(exc)) from None

    equations, fields, coords, sols = [], [], [], []
    taken = {"equation": set(), "field": set(), "solution": set(), "coordinates": set()}
    extended = [ctx.order]

    def parse_in(text, lineno, col, params=(), equation=True):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fn = parse_equation if equation else parse_expression
            e = fn(text, ctx, params, lineno, col)
        if any(issubclass(w.category, OrderExtended) for w in caught):
            extended.append(ctx.order_of(e))
        return e

    for kw, rest, lineno, col in pending:
        if kw == "coordinates":
            m = _COORDS.match(rest)
            if not m:
                raise ParseError("expected 'coordinates for <field>: ...'", lineno, col + 1)
            body_col = col + m.start("body")
            assigns = _assignments(
                m["body"], lineno, body_col, lambda t, c: parse_in(t, lineno, c, equation=False)
            )
            if m["name"] in taken[kw]:
                raise ParseError(f"duplicate coordinates for {m['name']!r}", lineno)
            taken[kw].add(m["name"])
            coords.append(CoordinatesSpec(m["name"], assigns))
            continue
        m = _NAMED.match(rest)
        if not m:
            raise ParseError(f"expected '{kw} <name>: ...'", lineno, col + 1)
        label, opts, body = m["name"], (m["opts"] or "").strip(), m["body"]
        body_col = col + m.start("body")
        if label in taken[kw]:
            raise ParseError(f"duplicate {kw} name {label!r}", lineno, col + 1)
        taken[kw].add(label)
        if kw == "equation":
            lead = None
            if opts:
                om = re.fullmatch(r"lead\s+(\w+)", opts)
                if not om or ctx.decode(sp.Symbol(om[1])) is None:
                    raise ParseError(f"bad equation option [{opts}]", lineno, col + 1)
                lead = ctx.jet(*ctx.decode(sp.Symbol(om[1])))
            e = parse_in(body, lineno, body_col)
            if not ctx.jets_in(e):
                raise ParseError(f"equation {label!r} references no dependent variable", lineno, body_col + 1)
            equations.append(EquationSpec(label, e, lead))
        elif kw == "field":
            if opts:
                raise ParseError(f"field blocks take no options [{opts}]", lineno, col + 1)
            comps = _assignments(body, lineno, body_col, lambda t, c: parse_in(t, lineno, c, equation=False))
            for key, _ in comps:
                kind, _, var = key.partition("_")
                if not ((kind == "xi" and var in indep) or (kind == "phi" and var in deps)):
                    raise ParseError(f"unknown field component {key!r}", lineno, body_col + 1)
            fields.append(FieldSpec(label, comps))
        else:
            params = ()
            if opts:
                om = re.fullmatch(r"params?\s+(.*)", opts)
                if not om:
                    raise ParseError(f"bad solution option [{opts}]", lineno, col + 1)
                params = _split_names(om[1], lineno)
                clash = set(params) & (set(indep) | set(deps))
                if clash:
                    raise ParseError(f"parameter names clash with variables: {sorted(clash)}", lineno)
            comps = _assignments(
                body, lineno, body_col, lambda t, c: parse_in(t, lineno, c, params, equation=False)
            )
            for key, val in comps:
                if key not in deps:
                    raise ParseError(f"solution assigns unknown dependent {key!r}", lineno, body_col + 1)
                if ctx.jets_in(val):
                    raise ParseError(f"solution {label!r} must be explicit in the independents", lineno)
            sols.append(SolutionSpec(label, params, comps))
    if not equations:
        raise ParseError("no equation declared")
    for c in coords:
        if c.field not in taken["field"]:
            raise ParseError(f"coordinates for undeclared field {c.field!r}")
    final_order = max(extended)
    if order is not None and final_order > order:
        log.warning("working order raised from %d to %d", order, final_order)
    return ProblemDocument(
        name,
        indep,
        deps,
        final_order if order is None else max(order, final_order),
        tuple(equations),
        tuple(fields),
        tuple(coords),
        tuple(sols),
        depth,
    )


def parse_inline_solution(text: str, ctx: JetContext, name: str = "inline"):
    """``u = ...; v = ...`` given on the command line; extra symbols become parameters."""
    from .verify import ExplicitSolution

    known = set(ctx.independents) | set(ctx.dependents) | set(FUNCTIONS)
    params = sorted({i for i in _IDENT.findall(text) if i not in known and ctx.decode(sp.Symbol(i)) is None})
    comps = _assignments(text, 1, 0, lambda t, c: parse_expression(t, ctx, params, 1, c))
    spec = SolutionSpec(name, tuple(params), comps)
    for key, _ in comps:
        if key not in ctx.dependents:
            raise ParseError(f"solution assigns unknown dependent {key!r}", 1, 1)
    return solution_from_spec(spec, ctx)


def format_problem(doc: ProblemDocument) -> str:
    """Print a document in the block format; parsing the output gives an equal document."""
    lines = [f"problem {doc.name}"]
    lines.append("  independents " + ", ".join(doc.independents))
    lines.append("  dependents " + ", ".join(doc.dependents))
    lines.append(f"  order {doc.order}")
    if doc.depth is not None:
        lines.append(f"  depth {doc.depth}")
    for e in doc.equations:
        opt = f" [lead {e.lead}]" if e.lead is not None else ""
        lines.append(f"  equation {e.name}{opt}: {to_text(e.expression)} = 0")
    for f in doc.fields:
        lines.append(f"  field {f.name}: " + "; ".join(f"{k} = {to_text(v)}" for k, v in f.components))
    for c in doc.coordinates:
        lines.append(f"  coordinates for {c.field}: " + "; ".join(f"{k} = {to_text(v)}" for k, v in c.assignments))
    for s in doc.solutions:
        opt = f" [params {', '.join(s.parameters)}]" if s.parameters else ""
        lines.append(f"  solution {s.name}{opt}: " + "; ".join(f"{k} = {to_text(v)}" for k, v in s.assignments))
    return "\n".join(lines) + "\n"


def _matrix_text(G) -> object:
    if G is None:
        return None
    if G.shape == (1, 1):
        return to_text(G[0, 0])
    return [[to_text(G[i, j]) for j in range(G.shape[1])] for i in range(G.shape[0])]


def report_tree(r: ClassificationReport) -> dict:
    """Key-value tree of a report, with a fixed key order."""
    chain = [] if r.chain is None else [to_text(e) for e in r.chain.system()]
    return {
        "problem": r.problem.name,
        "field": r.field.name,
        "verdict": r.verdict,
        "sigma": r.sigma,
        "multiplier": _matrix_text(r.multiplier),
        "chain": chain,
        "reduced_system": None if r.reduced_system is None else [to_text(e) for e in r.reduced_system],
        "depth": r.depth,
        "sigma_max": r.sigma_max,
        "witnesses": [
            {"name": w.witness, "system": w.system, "passed": w.passed}
            for w in r.witnesses
        ],
        "notes": list(r.notes),
    }


def emit_report(r: ClassificationReport, format: str = "human") -> str:
    """Render a report as ``human`` text or ``structured`` JSON."""
    tree = report_tree(r)
    if format == "structured":
        return json.dumps(tree, indent=2) + "\n"
    if format != "human":
        raise ValueError(f"unknown format {format!r}")
    lines = [f"{tree['problem'] or 'problem'} / field {tree['field']}", f"  verdict: {tree['verdict']}"]
    lines.append(f"  sigma: {tree['sigma'] if tree['sigma'] is not None else '-'}")
    if tree["multiplier"] is not None:
        lines.append(f"  multiplier: {tree['multiplier']}")
    if tree["chain"]:
        lines.append("  chain:")
        lines += [f"    [{k}] {e} = 0" for k, e in enumerate(tree["chain"])]
    if tree["reduced_system"] is not None:
        lines.append("  reduced system:")
        lines += [f"    {e} = 0" for e in tree["reduced_system"]]
    lines.append(f"  depth: {tree['depth']}")
    lines.append(f"  sigma_max: {tree['sigma_max']}")
    if tree["witnesses"]:
        lines.append("  witnesses:")
        lines += [
            f"    {w['name']} [{w['system']}]: {'pass' if w['passed'] else 'fail'}" for w in tree["witnesses"]
        ]
    for n in tree["notes"]:
        lines.append(f"  note: {n}")
    return "\n".join(lines) + "\n"
