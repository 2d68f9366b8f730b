"""JSON machine-definition format.

Top-level object::

    {"name": ..., "universe": [atoms], "variables": [{"name", "kind", "bound"?}],
     "init": {var: literal}, "invariants": [tree], "variant"?: tree,
     "events": [{"name", "params", "guard", "assignments", "convergent"?, "system"?}],
     "systems": [{"id", "sv", "variant"}],
     "selector"?: var, "checkpoint"?: tree, "horizontal"?: tree}

Expression trees are tagged objects::

    {"nat": 3}  {"bool": true}  {"atom": "Prod1"}  {"atoms": ["Prod1"]}  {"var": "C1"}
    {"op": "universe"}  {"op": "set", "args": [...]}
    {"op": "card" | "not", "arg": tree}
    {"op": "union" | "inter" | "diff" | "add" | "sub" | "eq" | "le" | "lt"
           | "in" | "subset" | "implies", "args": [left, right]}
    {"op": "and" | "or", "args": [...]}
    {"op": "forall" | "exists", "bind": name, "domain": domain, "body": tree}

Domains are ``{"kind": "atoms", "of": tree}``, ``{"kind": "nat", "lo": 0, "hi": 3}``
or ``{"kind": "bool"}``. Parsing is strict: unknown or missing keys raise
FormatError.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import expr as E
from .errors import FormatError, MachineError, SortError
from .expr import Sort
from .kernel import GuardedEvent, Machine, Param, SystemDef, Valuation, VarDecl

# --- expressions -----------------------------------------------------------


def expr_to_tree(e: E.Expr) -> dict:
    match e:
        case E.Nat(value):
            return {"nat": value}
        case E.Bool(value):
            return {"bool": value}
        case E.Atom(name):
            return {"atom": name}
        case E.Atoms(names):
            return {"atoms": sorted(names)}
        case E.Var(name):
            return {"var": name}
        case E.Universe():
            return {"op": "universe"}
        case E.SetOf(elems):
            return {"op": "set", "args": [expr_to_tree(x) for x in elems]}
        case E.Card(arg):
            return {"op": "card", "arg": expr_to_tree(arg)}
        case E.Not(arg):
            return {"op": "not", "arg": expr_to_tree(arg)}
        case E.Bin(op, left, right):
            return {"op": op, "args": [expr_to_tree(left), expr_to_tree(right)]}
        case E.Junction(op, args):
            return {"op": op, "args": [expr_to_tree(a) for a in args]}
        case E.Quant(kind, bind, domain, body):
            return {
                "op": kind,
                "bind": bind,
                "domain": domain_to_tree(domain),
                "body": expr_to_tree(body),
            }
    raise FormatError(f"cannot serialise {e!r}")


def domain_to_tree(d: E.Domain) -> dict:
    match d:
        case E.AtomsIn(of):
            return {"kind": "atoms", "of": expr_to_tree(of)}
        case E.NatRange(lo, hi):
            return {"kind": "nat", "lo": lo, "hi": hi}
        case E.BoolDomain():
            return {"kind": "bool"}
    raise FormatError(f"cannot serialise domain {d!r}")


def _keys(obj, required, optional=(), where="object"):
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise FormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise FormatError(f"{where}: missing field(s) {sorted(missing)}")


def _str(x, where):
    if not isinstance(x, str):
        raise FormatError(f"{where}: expected a string")
    return x


def _args(tree, n=None):
    args = tree["args"]
    if not isinstance(args, list) or (n is not None and len(args) != n):
        raise FormatError(f"operator {tree['op']!r} expects {n} args")
    return [tree_to_expr(a) for a in args]


def tree_to_expr(tree) -> E.Expr:
    if not isinstance(tree, dict):
        raise FormatError(f"expression must be an object, got {tree!r}")
    if "op" not in tree:
        if len(tree) != 1:
            raise FormatError(f"literal/variable node must have exactly one key: {tree}")
        (tag, val), = tree.items()
        if tag == "nat":
            if isinstance(val, bool) or not isinstance(val, int) or val < 0:
                raise FormatError(f"bad nat literal {val!r}")
            return E.Nat(val)
        if tag == "bool":
            if not isinstance(val, bool):
                raise FormatError(f"bad bool literal {val!r}")
            return E.Bool(val)
        if tag == "atom":
            return E.Atom(_str(val, "atom"))
        if tag == "atoms":
            if not isinstance(val, list):
                raise FormatError("atoms literal must be a list")
            return E.Atoms(frozenset(_str(a, "atoms") for a in val))
        if tag == "var":
            return E.Var(_str(val, "var"))
        raise FormatError(f"unknown node tag {tag!r}")
    op = tree["op"]
    where = f"op {op!r}"
    if op == "universe":
        _keys(tree, ["op"], where=where)
        return E.UNIVERSE
    if op in ("card", "not"):
        _keys(tree, ["op", "arg"], where=where)
        arg = tree_to_expr(tree["arg"])
        return E.Card(arg) if op == "card" else E.Not(arg)
    if op == "set":
        _keys(tree, ["op", "args"], where=where)
        return E.SetOf(tuple(_args(tree)))
    if op in E.BIN_OPS:
        _keys(tree, ["op", "args"], where=where)
        left, right = _args(tree, 2)
        return E.Bin(op, left, right)
    if op in E.JUNCTIONS:
        _keys(tree, ["op", "args"], where=where)
        return E.Junction(op, tuple(_args(tree)))
    if op in E.QUANTIFIERS:
        _keys(tree, ["op", "bind", "domain", "body"], where=where)
        return E.Quant(
            op, _str(tree["bind"], where), tree_to_domain(tree["domain"]), tree_to_expr(tree["body"])
        )
    raise FormatError(f"unknown operator {op!r}")


def tree_to_domain(tree) -> E.Domain:
    if not isinstance(tree, dict) or "kind" not in tree:
        raise FormatError(f"bad domain {tree!r}")
    kind = tree["kind"]
    if kind == "atoms":
        _keys(tree, ["kind", "of"], where="domain")
        return E.AtomsIn(tree_to_expr(tree["of"]))
    if kind == "nat":
        _keys(tree, ["kind", "lo", "hi"], where="domain")
        lo, hi = tree["lo"], tree["hi"]
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (lo, hi)):
            raise FormatError("nat domain bounds must be integers")
        return E.NatRange(lo, hi)
    if kind == "bool":
        _keys(tree, ["kind"], where="domain")
        return E.BoolDomain()
    raise FormatError(f"unknown domain kind {kind!r}")


# --- machines --------------------------------------------------------------


def _literal_to_json(value):
    if isinstance(value, frozenset):
        return sorted(value)
    return value


def _literal_from_json(decl: VarDecl, raw):
    if decl.kind is Sort.ATOMSET:
        if not isinstance(raw, list) or not all(isinstance(a, str) for a in raw):
            raise FormatError(f"init of {decl.name} must be a list of atoms")
        return frozenset(raw)
    if decl.kind is Sort.BOOL:
        if not isinstance(raw, bool):
            raise FormatError(f"init of {decl.name} must be a boolean")
        return raw
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise FormatError(f"init of {decl.name} must be a natural number")
    return raw


def machine_to_dict(m: Machine) -> dict:
    out = {
        "name": m.name,
        "universe": list(m.universe),
        "variables": [
            {"name": d.name, "kind": d.kind.value, **({"bound": d.bound} if d.bound is not None else {})}
            for d in m.variables
        ],
        "init": {d.name: _literal_to_json(m.init[d.name]) for d in m.variables},
        "invariants": [expr_to_tree(i) for i in m.invariants],
        "events": [
            {
                "name": ev.name,
                "params": [{"name": p.name, "domain": domain_to_tree(p.domain)} for p in ev.params],
                "guard": expr_to_tree(ev.guard),
                "assignments": [{"var": t, "expr": expr_to_tree(rhs)} for t, rhs in ev.assigns],
                "convergent": ev.convergent,
                **({"system": ev.system} if ev.system is not None else {}),
            }
            for ev in m.events
        ],
        "systems": [
            {"id": s.id, "sv": list(s.sv), "variant": expr_to_tree(s.variant)} for s in m.systems
        ],
    }
    if m.variant is not None:
        out["variant"] = expr_to_tree(m.variant)
    if m.selector is not None:
        out["selector"] = m.selector
    if m.checkpoint is not None:
        out["checkpoint"] = expr_to_tree(m.checkpoint)
    if m.horizontal is not None:
        out["horizontal"] = expr_to_tree(m.horizontal)
    return out


_TOP_REQUIRED = ("name", "universe", "variables", "init", "invariants", "events", "systems")
_TOP_OPTIONAL = ("variant", "selector", "checkpoint", "horizontal")


def machine_from_dict(data) -> Machine:
    _keys(data, _TOP_REQUIRED, _TOP_OPTIONAL, where="machine")
    try:
        universe = [_str(a, "universe") for a in data["universe"]]
        decls = []
        for raw in data["variables"]:
            _keys(raw, ["name", "kind"], ["bound"], where="variable")
            try:
                kind = Sort(raw["kind"])
            except ValueError:
                raise FormatError(f"unknown variable kind {raw['kind']!r}") from None
            if kind is Sort.ATOM:
                raise FormatError("variables cannot have kind 'atom'")
            decls.append(VarDecl(_str(raw["name"], "variable"), kind, raw.get("bound")))
        if not isinstance(data["init"], dict):
            raise FormatError("init must be an object")
        by_name = {d.name: d for d in decls}
        unknown = set(data["init"]) - set(by_name)
        if unknown:
            raise FormatError(f"init assigns undeclared variables {sorted(unknown)}")
        init = Valuation(
            (name, _literal_from_json(by_name[name], data["init"][name]))
            for name in by_name
            if name in data["init"]
        )
        events = []
        for raw in data["events"]:
            _keys(raw, ["name", "params", "guard", "assignments"], ["convergent", "system"], where="event")
            params = []
            for p in raw["params"]:
                _keys(p, ["name", "domain"], where=f"parameter of {raw['name']}")
                params.append(Param(_str(p["name"], "parameter"), tree_to_domain(p["domain"])))
            assigns = []
            for a in raw["assignments"]:
                _keys(a, ["var", "expr"], where=f"assignment in {raw['name']}")
                assigns.append((_str(a["var"], "assignment"), tree_to_expr(a["expr"])))
            convergent = raw.get("convergent", False)
            if not isinstance(convergent, bool):
                raise FormatError("convergent must be a boolean")
            events.append(
                GuardedEvent(
                    _str(raw["name"], "event"),
                    tuple(params),
                    tree_to_expr(raw["guard"]),
                    tuple(assigns),
                    convergent,
                    raw.get("system"),
                )
            )
        systems = []
        for raw in data["systems"]:
            _keys(raw, ["id", "sv", "variant"], where="system")
            systems.append(
                SystemDef(
                    _str(raw["id"], "system"),
                    tuple(_str(n, "sv") for n in raw["sv"]),
                    tree_to_expr(raw["variant"]),
                )
            )
        optional = {k: tree_to_expr(data[k]) for k in ("variant", "checkpoint", "horizontal") if k in data}
        return Machine(
            name=_str(data["name"], "name"),
            universe=tuple(universe),
            variables=tuple(decls),
            init=init,
            invariants=tuple(tree_to_expr(t) for t in data["invariants"]),
            events=tuple(events),
            systems=tuple(systems),
            selector=data.get("selector"),
            **optional,
        )
    except (MachineError, SortError) as exc:
        raise FormatError(str(exc)) from exc
    except (TypeError, KeyError) as exc:
        raise FormatError(f"malformed machine definition: {exc}") from exc


def dumps(m: Machine) -> str:
    return json.dumps(machine_to_dict(m), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> Machine:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return machine_from_dict(data)


def load(path: str | Path) -> Machine:
    return loads(Path(path).read_text())


def dump(m: Machine, path: str | Path) -> None:
    Path(path).write_text(dumps(m))


def load_expr(path: str | Path) -> E.Expr:
    try:
        return tree_to_expr(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
