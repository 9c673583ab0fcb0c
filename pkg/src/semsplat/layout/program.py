"""Straight-line placement-program DSL: parser and evaluator.

Programs are lists of statements, one per line:

    table_h = 0.75
    lamp_pos = table_top + vec(0, lamp_h / 2, 0)
    place(lamp, 0.4, vec(0, 0, 90), lamp_pos)

Values are scalars or 3-vectors. Supported operations: + - * / (vectors
componentwise, scalars broadcast over vectors for * and /), min/max, the
vec(x, y, z) constructor, and .x/.y/.z component access. `place(id, scale,
euler_xyz_degrees, translation)` emits one object placement. The language is
deliberately total - no loops, no conditionals, single assignment - so
executing untrusted planner output cannot diverge.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from semsplat.core import rotations
from semsplat.core.types import ObjectTransform
from semsplat.errors import ValidationError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<string>\"[^\"]*\"|'[^']*')"
    r"|(?P<op>==|[=+\-*/(),.])"
    r")"
)

_RESERVED = {"place", "vec", "min", "max"}


def _tokenize(line):
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if not m or m.end() == pos:
            rest = line[pos:].strip()
            if not rest:
                break
            raise ValidationError(f"cannot tokenize {rest!r}")
        if m.lastgroup == "number":
            tokens.append(("number", float(line[m.start() : m.end()].strip())))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        elif m.lastgroup == "string":
            tokens.append(("string", m.group("string")[1:-1]))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


class _Parser:
    """Recursive-descent expression parser producing nested tuples."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val = self.advance()
        if kind != "op" or val != op:
            raise ValidationError(f"expected {op!r}, found {val!r}")

    def parse_expr(self):
        node = self.parse_term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.advance()
            node = ("binop", op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.advance()
            node = ("binop", op, node, self.parse_factor())
        return node

    def parse_factor(self):
        if self.peek() == ("op", "-"):
            self.advance()
            return ("neg", self.parse_factor())
        return self.parse_postfix()

    def parse_postfix(self):
        node = self.parse_atom()
        while self.peek() == ("op", "."):
            self.advance()
            kind, comp = self.advance()
            if kind != "name" or comp not in ("x", "y", "z"):
                raise ValidationError("component access must be .x, .y or .z")
            node = ("component", node, "xyz".index(comp))
        return node

    def parse_atom(self):
        kind, val = self.advance()
        if kind == "number":
            return ("const", val)
        if kind == "name":
            if val in ("vec", "min", "max"):
                self.expect_op("(")
                args = [self.parse_expr()]
                while self.peek() == ("op", ","):
                    self.advance()
                    args.append(self.parse_expr())
                self.expect_op(")")
                return ("call", val, args)
            return ("var", val)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ValidationError(f"unexpected token {val!r}")


@dataclass
class Placement:
    object_id: str
    scale: float
    euler_xyz_degrees: np.ndarray
    translation: np.ndarray


@dataclass
class LayoutProgram:
    statements: list  # verbatim statement strings

    def to_list(self):
        return list(self.statements)

    @classmethod
    def from_list(cls, statements):
        return cls(statements=list(statements))


def _eval(node, env):
    kind = node[0]
    if kind == "const":
        return node[1]
    if kind == "var":
        if node[1] not in env:
            raise ValidationError(f"unbound variable {node[1]!r}")
        return env[node[1]]
    if kind == "neg":
        return -_eval(node[1], env)
    if kind == "component":
        val = _eval(node[1], env)
        if not isinstance(val, np.ndarray):
            raise ValidationError("component access on a scalar")
        return float(val[node[2]])
    if kind == "call":
        name, args = node[1], [_eval(a, env) for a in node[2]]
        if name == "vec":
            if len(args) != 3 or any(isinstance(a, np.ndarray) for a in args):
                raise ValidationError("vec() takes exactly three scalars")
            return np.array(args, dtype=np.float64)
        if len(args) < 2:
            raise ValidationError(f"{name}() needs at least two arguments")
        vecs = [isinstance(a, np.ndarray) for a in args]
        if any(vecs) and not all(vecs):
            raise ValidationError(f"{name}() arguments must share a type")
        fn = np.minimum if name == "min" else np.maximum
        out = args[0]
        for a in args[1:]:
            out = fn(out, a)
        return out if isinstance(out, np.ndarray) else float(out)
    if kind == "binop":
        op, left, right = node[1], _eval(node[2], env), _eval(node[3], env)
        lv, rv = isinstance(left, np.ndarray), isinstance(right, np.ndarray)
        if op in ("+", "-") and lv != rv:
            raise ValidationError(f"{op} needs operands of the same type")
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if np.any(np.asarray(right) == 0.0):
            raise ValidationError("division by zero")
        return left / right
    raise ValidationError(f"bad expression node {kind!r}")


def _as_vec(value, what):
    if not (isinstance(value, np.ndarray) and value.shape == (3,)):
        raise ValidationError(f"{what} must be a 3-vector")
    return value


def execute_program(program: LayoutProgram):
    """Run the program; returns dict object_id -> ObjectTransform."""
    env = {}
    placements = {}
    for index, line in enumerate(program.statements):
        try:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = _tokenize(stripped)
            parser = _Parser(tokens)
            kind, first = parser.peek()
            if kind == "name" and first == "place":
                parser.advance()
                parser.expect_op("(")
                tkind, target = parser.advance()
                if tkind not in ("name", "string"):
                    raise ValidationError("place() target must be a name or string")
                parser.expect_op(",")
                scale = _eval(parser.parse_expr(), env)
                parser.expect_op(",")
                euler = _eval(parser.parse_expr(), env)
                parser.expect_op(",")
                translation = _eval(parser.parse_expr(), env)
                parser.expect_op(")")
                if parser.peek()[0] != "end":
                    raise ValidationError("trailing tokens after place()")
                if isinstance(scale, np.ndarray):
                    raise ValidationError("place() scale must be a scalar")
                if scale <= 0:
                    raise ValidationError("place() scale must be positive")
                _as_vec(euler, "place() euler angles")
                _as_vec(translation, "place() translation")
                if target in placements:
                    raise ValidationError(f"object {target!r} placed twice")
                placements[target] = Placement(
                    object_id=target,
                    scale=float(scale),
                    euler_xyz_degrees=euler,
                    translation=translation,
                )
            else:
                nkind, name = parser.advance()
                if nkind != "name":
                    raise ValidationError("statement must be an assignment or place()")
                if name in _RESERVED:
                    raise ValidationError(f"{name!r} is reserved")
                parser.expect_op("=")
                value = _eval(parser.parse_expr(), env)
                if parser.peek()[0] != "end":
                    raise ValidationError("trailing tokens after expression")
                if name in env:
                    raise ValidationError(f"variable {name!r} assigned twice")
                env[name] = value
        except ValidationError as err:
            if err.statement_index is None:
                err.statement_index = index
            raise

    transforms = {}
    for oid, p in placements.items():
        transforms[oid] = ObjectTransform(
            scale=p.scale,
            rotation=rotations.quat_from_euler_xyz_degrees(p.euler_xyz_degrees),
            translation=p.translation,
        )
    return transforms
