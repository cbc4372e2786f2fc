"""Expression trees for agent update rules and custom corruption maps.

Expressions are total functions over small finite alphabets.  Leaves refer
to lagged stream symbols or to the per-agent noise draw; operators cover
boolean logic, modular arithmetic, and arbitrary lookup tables.  A rule is
compiled once against declared alphabet widths, so any way an expression
could leave its target alphabet is rejected at build time, never during
sampling.

Two leaf vocabularies share the same operator set:

* update rules: ``Var(agent, lag)`` with ``lag >= 1`` (strict causality)
  and ``Noise()`` for the agent's own innovation at lag 0;
* corruption maps: ``OwnStream(lag)`` with ``lag <= 0`` (the ideal stream,
  same-time access allowed), ``HeldStream(lag)`` with ``lag <= -1`` (the
  corrupted stream's own strict past), and ``Noise()``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ModelError

__all__ = [
    "Var",
    "OwnStream",
    "HeldStream",
    "Noise",
    "Const",
    "Op",
    "Expr",
    "compile_expr",
    "leaves",
    "parse_rule_expr",
    "parse_corruption_expr",
]


@dataclass(frozen=True)
class Var:
    """Lagged symbol of another (or the same) agent's ideal stream."""

    agent: int
    lag: int


@dataclass(frozen=True)
class OwnStream:
    """Corruption-map reference to the corrupted agent's ideal stream."""

    lag: int


@dataclass(frozen=True)
class HeldStream:
    """Corruption-map reference to the corrupted stream's own past."""

    lag: int


@dataclass(frozen=True)
class Noise:
    """The innovation symbol drawn fresh at the current step."""


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Op:
    """Operator node: ``name`` in OR/AND/XOR/NOT/ADD/MUL/LUT.

    ``mod`` is the modulus for ADD/MUL (defaults to the target alphabet);
    ``table`` is the flat lookup table for LUT, indexed in mixed radix with
    the first argument varying slowest.
    """

    name: str
    args: tuple
    mod: int | None = None
    table: tuple[int, ...] | None = None


Expr = Var | OwnStream | HeldStream | Noise | Const | Op

_BOOL_OPS = {"OR", "AND", "XOR", "NOT"}
_MOD_OPS = {"ADD", "MUL"}


def leaves(expr):
    """Yield every leaf of ``expr`` in depth-first order."""
    if isinstance(expr, Op):
        for a in expr.args:
            yield from leaves(a)
    else:
        yield expr


def compile_expr(expr, leaf_width, default_mod):
    """Compile ``expr`` into ``(fn, width)``.

    ``fn(resolve)`` evaluates the expression over numpy integer arrays,
    where ``resolve(leaf)`` supplies leaf values.  ``width`` bounds the
    output: every value lies in ``[0, width)``.  ``leaf_width(leaf)`` gives
    the alphabet size of each stream/noise leaf.  Raises ``ModelError`` on
    arity, range, or table-shape violations.
    """
    if isinstance(expr, Const):
        if expr.value < 0:
            raise ModelError(f"negative constant {expr.value}")
        v = expr.value
        return (lambda resolve: v), expr.value + 1
    if isinstance(expr, (Var, OwnStream, HeldStream, Noise)):
        w = leaf_width(expr)
        return (lambda resolve, e=expr: resolve(e)), w

    name = expr.name
    compiled = [compile_expr(a, leaf_width, default_mod) for a in expr.args]
    fns = [c[0] for c in compiled]
    widths = [c[1] for c in compiled]

    if name in _BOOL_OPS:
        bad = [w for w in widths if w > 2]
        if bad:
            raise ModelError(f"{name} requires binary operands, got width {max(bad)}")
        if name == "NOT":
            if len(fns) != 1:
                raise ModelError("NOT takes exactly one argument")
            f = fns[0]
            return (lambda resolve: 1 - f(resolve)), 2
        if len(fns) < 2:
            raise ModelError(f"{name} takes at least two arguments")
        red = {"OR": np.bitwise_or, "AND": np.bitwise_and, "XOR": np.bitwise_xor}[name]

        def run(resolve, fns=tuple(fns), red=red):
            out = fns[0](resolve)
            for f in fns[1:]:
                out = red(out, f(resolve))
            return out

        return run, 2

    if name in _MOD_OPS:
        mod = expr.mod if expr.mod is not None else default_mod
        if mod < 2:
            raise ModelError(f"{name} modulus must be >= 2, got {mod}")
        if len(fns) < 2:
            raise ModelError(f"{name} takes at least two arguments")
        if name == "ADD":

            def run(resolve, fns=tuple(fns), mod=mod):
                out = fns[0](resolve) + 0
                for f in fns[1:]:
                    out = out + f(resolve)
                return out % mod

        else:

            def run(resolve, fns=tuple(fns), mod=mod):
                out = fns[0](resolve) + 0
                for f in fns[1:]:
                    out = out * f(resolve)
                return out % mod

        return run, mod

    if name == "LUT":
        table = expr.table
        if table is None or not fns:
            raise ModelError("LUT needs arguments and a table")
        need = math.prod(widths)
        if len(table) != need:
            raise ModelError(
                f"LUT table has {len(table)} entries, expected {need} "
                f"for argument widths {tuple(widths)}"
            )
        if any(v < 0 for v in table):
            raise ModelError("LUT entries must be non-negative")
        arr = np.asarray(table, dtype=np.int64)

        def run(resolve, fns=tuple(fns), widths=tuple(widths), arr=arr):
            idx = fns[0](resolve) + 0
            for f, w in zip(fns[1:], widths[1:]):
                idx = idx * w + f(resolve)
            return arr[idx]

        return run, int(arr.max()) + 1

    raise ModelError(f"unknown operator {name!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<int>-?\d+)|(?P<punct>[()\[\],;=]))"
)
_OP_NAMES = _BOOL_OPS | _MOD_OPS | {"LUT"}


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise ModelError(f"bad character in expression near {text[pos:pos+10]!r}")
            break
        if m.group("name"):
            out.append(("name", m.group("name")))
        elif m.group("int"):
            out.append(("int", int(m.group("int"))))
        else:
            out.append(("punct", m.group("punct")))
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, tokens, mode):
        self.toks = tokens
        self.i = 0
        self.mode = mode  # "rule" or "corruption"

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        k, v = self.toks[self.i]
        if kind is not None and k != kind or value is not None and v != value:
            raise ModelError(f"unexpected token {v!r} in expression")
        self.i += 1
        return v

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            raise ModelError(f"trailing input after expression: {self.peek()[1]!r}")
        return e

    def expr(self):
        k, v = self.peek()
        if k == "int":
            self.take()
            if v < 0:
                raise ModelError("bare negative integers are not symbols")
            return Const(v)
        if k != "name":
            raise ModelError(f"expected a term, got {v!r}")
        name = self.take()
        upper = name.upper()
        if upper in _OP_NAMES and self.peek() == ("punct", "("):
            return self.call(upper)
        return self.leaf(name)

    def call(self, op):
        self.take("punct", "(")
        args = [self.expr()]
        while self.peek() == ("punct", ","):
            self.take()
            args.append(self.expr())
        mod = None
        table = None
        if self.peek() == ("punct", ";"):
            self.take()
            if op == "LUT":
                table = [self.take("int")]
                while self.peek() == ("punct", ","):
                    self.take()
                    table.append(self.take("int"))
                table = tuple(table)
            elif op in _MOD_OPS:
                key = self.take("name")
                if key != "mod":
                    raise ModelError(f"unknown option {key!r} for {op}")
                self.take("punct", "=")
                mod = self.take("int")
            else:
                raise ModelError(f"{op} takes no ';' options")
        self.take("punct", ")")
        if op == "LUT" and table is None:
            raise ModelError("LUT requires '; v0, v1, ...' table entries")
        return Op(op, tuple(args), mod=mod, table=table)

    def leaf(self, name):
        if self.peek() == ("punct", "["):
            self.take()
            lag = self.take("int")
            self.take("punct", "]")
            return self.stream_leaf(name, lag)
        return self.bare_leaf(name)

    def stream_leaf(self, name, lag):
        if self.mode == "rule":
            m = re.fullmatch(r"y(\d+)", name)
            if not m:
                raise ModelError(f"unknown stream {name!r} (expected y<k>[-lag])")
            if lag >= 0:
                raise ModelError(
                    f"{name}[{lag}] violates strict causality; rule lags must be <= -1"
                )
            return Var(agent=int(m.group(1)) - 1, lag=-lag)
        if name == "y":
            if lag > 0:
                raise ModelError(f"y[{lag}] looks ahead; corruption lags must be <= 0")
            return OwnStream(lag=lag)
        if name == "u":
            if lag >= 0:
                raise ModelError(f"u[{lag}] must reference the strict past (lag <= -1)")
            return HeldStream(lag=lag)
        raise ModelError(f"unknown stream {name!r} in corruption expression")

    def bare_leaf(self, name):
        if self.mode == "rule":
            m = re.fullmatch(r"e(\d+)", name)
            if m:
                return Noise()
            raise ModelError(f"unknown term {name!r} (noise terms are e<k>)")
        if name in ("z", "zeta"):
            return Noise()
        raise ModelError(f"unknown term {name!r} (corruption noise is z)")


def parse_rule_expr(text):
    """Parse an update-rule expression such as ``OR(y1[-1], y3[-1], e2)``.

    Returns the expression tree and the set of noise indices referenced,
    so the caller can check the rule only uses its own innovation.
    """
    noise_ids = {int(m.group(1)) - 1 for m in re.finditer(r"\be(\d+)\b", text)}
    tree = _Parser(_tokenize(text), "rule").parse()
    return tree, noise_ids


def parse_corruption_expr(text):
    """Parse a corruption-map expression such as ``XOR(y[0], z)``."""
    return _Parser(_tokenize(text), "corruption").parse()
