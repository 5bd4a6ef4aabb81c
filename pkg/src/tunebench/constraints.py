"""Known-constraint expressions over configurations.

Constraints are written as infix text, e.g.::

    tile_i * tile_j * 8 <= 16384
    chunk == 0 or chunk mod 16 == 0
    precedes(loop_order, 0, 2) and loop_order[0] != 1

Supported: integer literals, quoted string literals, parameter names,
arithmetic (``+ - * // %``, with ``/`` an alias for ``//`` and ``mod`` for
``%``), comparisons, ``and`` / ``or`` / ``not``, permutation element access
``name[i]`` and ``precedes(name, a, b)``.

Evaluation is total: division or modulo by zero, out-of-range indexing, and
order comparisons between mismatched types make the enclosing comparison
false instead of raising.
"""

from __future__ import annotations

import re
from typing import Any, Mapping

__all__ = ["Constraint", "ConstraintError", "parse_constraint", "RESERVED_WORDS"]

RESERVED_WORDS = frozenset({"and", "or", "not", "mod", "precedes"})

_TOKEN_RE = re.compile(
    r"""\s*(?:
      (?P<num>\d+)
    | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<str>'[^']*'|"[^"]*")
    | (?P<op>==|!=|<=|>=|//|=|[-+*/%<>()\[\],])
    )""",
    re.VERBOSE,
)

_CMP_OPS = {"==", "=", "!=", "<", ">", "<=", ">="}


class ConstraintError(ValueError):
    """Raised when constraint text does not parse."""


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.toks: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip():
                    raise ConstraintError(
                        f"bad token at offset {pos} in constraint: {text!r}"
                    )
                break
            pos = m.end()
            for kind in ("num", "name", "str", "op"):
                val = m.group(kind)
                if val is not None:
                    self.toks.append((kind, val, m.start()))
                    break
        self.i = 0

    def peek(self) -> tuple[str, str] | None:
        if self.i < len(self.toks):
            kind, val, _ = self.toks[self.i]
            return kind, val
        return None

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise ConstraintError(f"unexpected end of constraint: {self.text!r}")
        self.i += 1
        return tok

    def expect(self, val: str) -> None:
        tok = self.peek()
        if tok is None or tok[1] != val:
            got = tok[1] if tok else "end of input"
            raise ConstraintError(
                f"expected {val!r}, got {got!r} in constraint: {self.text!r}"
            )
        self.i += 1


# AST nodes are plain tuples: ("num", v) ("str", s) ("ref", name)
# ("index", name, expr) ("prec", name, expr, expr) ("neg", e)
# ("bin", op, l, r) ("cmp", op, l, r) ("not", e) ("and", l, r) ("or", l, r)


def _parse_expr(t: _Tokens):
    node = _parse_and(t)
    while t.peek() == ("name", "or"):
        t.next()
        node = ("or", node, _parse_and(t))
    return node


def _parse_and(t: _Tokens):
    node = _parse_not(t)
    while t.peek() == ("name", "and"):
        t.next()
        node = ("and", node, _parse_not(t))
    return node


def _parse_not(t: _Tokens):
    if t.peek() == ("name", "not"):
        t.next()
        return ("not", _parse_not(t))
    return _parse_cmp(t)


def _parse_cmp(t: _Tokens):
    left = _parse_sum(t)
    tok = t.peek()
    if tok is not None and tok[0] == "op" and tok[1] in _CMP_OPS:
        op = t.next()[1]
        if op == "=":
            op = "=="
        right = _parse_sum(t)
        return ("cmp", op, left, right)
    return left


def _parse_sum(t: _Tokens):
    node = _parse_term(t)
    while True:
        tok = t.peek()
        if tok is not None and tok[0] == "op" and tok[1] in ("+", "-"):
            op = t.next()[1]
            node = ("bin", op, node, _parse_term(t))
        else:
            return node


def _parse_term(t: _Tokens):
    node = _parse_unary(t)
    while True:
        tok = t.peek()
        if tok is not None and (
            (tok[0] == "op" and tok[1] in ("*", "//", "/", "%"))
            or tok == ("name", "mod")
        ):
            op = t.next()[1]
            if op in ("/", "mod"):
                op = "//" if op == "/" else "%"
            node = ("bin", op, node, _parse_unary(t))
        else:
            return node


def _parse_unary(t: _Tokens):
    if t.peek() == ("op", "-"):
        t.next()
        return ("neg", _parse_unary(t))
    return _parse_atom(t)


def _parse_atom(t: _Tokens):
    kind, val = t.next()
    if kind == "num":
        return ("num", int(val))
    if kind == "str":
        return ("str", val[1:-1])
    if kind == "op" and val == "(":
        node = _parse_expr(t)
        t.expect(")")
        return node
    if kind == "name":
        if val in ("and", "or", "not", "mod"):
            raise ConstraintError(
                f"misplaced keyword {val!r} in constraint: {t.text!r}"
            )
        if val == "precedes":
            t.expect("(")
            tok = t.next()
            if tok[0] != "name":
                raise ConstraintError(
                    f"precedes() needs a parameter name first: {t.text!r}"
                )
            name = tok[1]
            t.expect(",")
            a = _parse_sum(t)
            t.expect(",")
            b = _parse_sum(t)
            t.expect(")")
            return ("prec", name, a, b)
        if t.peek() == ("op", "["):
            t.next()
            idx = _parse_sum(t)
            t.expect("]")
            return ("index", val, idx)
        return ("ref", val)
    raise ConstraintError(f"unexpected token {val!r} in constraint: {t.text!r}")


def _collect_refs(node, out: set[str]) -> None:
    tag = node[0]
    if tag in ("ref", "index", "prec"):
        out.add(node[1])
    if tag in ("index",):
        _collect_refs(node[2], out)
    elif tag == "prec":
        _collect_refs(node[2], out)
        _collect_refs(node[3], out)
    elif tag in ("neg", "not"):
        _collect_refs(node[1], out)
    elif tag in ("bin", "cmp"):
        _collect_refs(node[2], out)
        _collect_refs(node[3], out)
    elif tag in ("and", "or"):
        _collect_refs(node[1], out)
        _collect_refs(node[2], out)


def _codegen(node) -> str:
    tag = node[0]
    if tag == "num":
        return repr(node[1])
    if tag == "str":
        return repr(node[1])
    if tag == "ref":
        return f"_v[{node[1]!r}]"
    if tag == "index":
        return f"_v[{node[1]!r}][{_codegen(node[2])}]"
    if tag == "prec":
        return f"_prec(_v[{node[1]!r}], {_codegen(node[2])}, {_codegen(node[3])})"
    if tag == "neg":
        return f"(-{_codegen(node[1])})"
    if tag == "bin":
        return f"({_codegen(node[2])} {node[1]} {_codegen(node[3])})"
    if tag == "cmp":
        return f"({_codegen(node[2])} {node[1]} {_codegen(node[3])})"
    if tag == "not":
        return f"(not {_codegen(node[1])})"
    if tag in ("and", "or"):
        return f"({_codegen(node[1])} {tag} {_codegen(node[2])})"
    raise AssertionError(tag)


def _prec(perm, a, b) -> bool:
    seq = list(perm)
    return seq.index(a) < seq.index(b)


_UNDEF = object()


def _eval_arith(node, values: Mapping[str, Any]):
    # Returns a value or _UNDEF when the result is not defined.
    tag = node[0]
    if tag == "num" or tag == "str":
        return node[1]
    if tag == "ref":
        return values[node[1]]
    if tag == "index":
        seq = values[node[1]]
        idx = _eval_arith(node[2], values)
        if idx is _UNDEF or not isinstance(idx, int):
            return _UNDEF
        try:
            return seq[idx]
        except (IndexError, TypeError):
            return _UNDEF
    if tag == "neg":
        v = _eval_arith(node[1], values)
        if v is _UNDEF or isinstance(v, str):
            return _UNDEF
        return -v
    if tag == "bin":
        op, l, r = node[1], node[2], node[3]
        lv = _eval_arith(l, values)
        rv = _eval_arith(r, values)
        if lv is _UNDEF or rv is _UNDEF:
            return _UNDEF
        try:
            if op == "+":
                return lv + rv
            if op == "-":
                return lv - rv
            if op == "*":
                return lv * rv
            if op == "//":
                return lv // rv
            return lv % rv
        except (ZeroDivisionError, TypeError):
            return _UNDEF
    raise AssertionError(tag)


def _eval_bool(node, values: Mapping[str, Any]) -> bool:
    tag = node[0]
    if tag == "and":
        return _eval_bool(node[1], values) and _eval_bool(node[2], values)
    if tag == "or":
        return _eval_bool(node[1], values) or _eval_bool(node[2], values)
    if tag == "not":
        return not _eval_bool(node[1], values)
    if tag == "prec":
        perm = values[node[1]]
        a = _eval_arith(node[2], values)
        b = _eval_arith(node[3], values)
        if a is _UNDEF or b is _UNDEF:
            return False
        try:
            return _prec(perm, a, b)
        except (ValueError, TypeError):
            return False
    if tag == "cmp":
        op, l, r = node[1], node[2], node[3]
        lv = _eval_arith(l, values)
        rv = _eval_arith(r, values)
        if lv is _UNDEF or rv is _UNDEF:
            return False
        try:
            if op == "==":
                return lv == rv
            if op == "!=":
                return lv != rv
            if op == "<":
                return lv < rv
            if op == ">":
                return lv > rv
            if op == "<=":
                return lv <= rv
            return lv >= rv
        except TypeError:
            return False
    # Bare non-comparison expression used as a condition: truthiness, with
    # undefined treated as false.
    v = _eval_arith(node, values)
    return bool(v) if v is not _UNDEF else False


class Constraint:
    """A parsed, compiled constraint expression.

    Calling it with a mapping of parameter values returns a bool. The fast
    path is a compiled Python expression; when that raises (zero division,
    bad index, mixed-type ordering) the interpreter re-evaluates with the
    total semantics described in the module docstring.
    """

    __slots__ = ("text", "referenced", "_ast", "_code", "_globals")

    def __init__(self, text: str):
        t = _Tokens(text)
        ast = _parse_expr(t)
        if t.peek() is not None:
            raise ConstraintError(
                f"trailing tokens after constraint expression: {text!r}"
            )
        refs: set[str] = set()
        _collect_refs(ast, refs)
        if not refs:
            raise ConstraintError(
                f"constraint references no parameters: {text!r}"
            )
        self.text = text
        self.referenced = frozenset(refs)
        self._ast = ast
        self._code = compile(f"bool({_codegen(ast)})", "<constraint>", "eval")
        self._globals = {"__builtins__": {}, "bool": bool, "_prec": _prec}

    def __call__(self, values: Mapping[str, Any]) -> bool:
        try:
            return eval(self._code, self._globals, {"_v": values})
        except (ZeroDivisionError, TypeError, IndexError, ValueError):
            return _eval_bool(self._ast, values)

    def __repr__(self) -> str:
        return f"Constraint({self.text!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Constraint) and other.text == self.text

    def __hash__(self) -> int:
        return hash(self.text)


def parse_constraint(text: str) -> Constraint:
    return Constraint(text)
