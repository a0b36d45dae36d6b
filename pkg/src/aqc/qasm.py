"""Importer for the rx/ry/rz/cx/u3 subset of OpenQASM 2."""

from __future__ import annotations

import ast
import bisect
import math
import operator
import re

from .circuit import Circuit, CircuitFormatError, cx, rotation

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}

_STMT = re.compile(r"^(\w+)\s*(?:\((.*)\))?\s*(.*)$", re.S)
_QARG = re.compile(r"^(\w+)\s*\[\s*(\d+)\s*\]$")
_IGNORED = {"OPENQASM", "include", "creg", "barrier"}


def eval_angle(expr: str) -> float:
    """Evaluate an angle expression built from numbers, ``pi`` and + - * / ** ."""
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"bad angle expression {expr!r}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported element in angle expression {expr!r}")

    try:
        value = ev(tree)
    except (ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"angle expression {expr!r}: {exc}") from None
    if not math.isfinite(value):
        raise ValueError(f"angle expression {expr!r} is not finite")
    return value


def _split_args(text: str) -> list[str]:
    return [a.strip() for a in text.split(",")] if text.strip() else []


def parse_qasm(text: str) -> Circuit:
    """Parse a single-register OpenQASM 2 program. ``q[i]`` becomes qubit ``i + 1``.

    ``u3(t, p, l)`` equals ``Rz(p) Ry(t) Rz(l)`` up to phase and is expanded
    into those three rotations.
    """
    text = re.sub(r"//[^\n]*", "", text)
    reg = None
    n = 0
    gates = []
    line_of = _line_index(text)
    pos = 0
    for raw in text.split(";"):
        start = pos
        pos += len(raw) + 1
        stmt = raw.strip()
        if not stmt:
            continue
        lineno = line_of(start + len(raw) - len(raw.lstrip()))
        m = _STMT.match(stmt)
        if not m:
            raise CircuitFormatError(f"line {lineno}: cannot parse {stmt!r}")
        op, params, args = m.group(1), m.group(2), m.group(3).strip()
        if op in _IGNORED:
            continue
        if op == "qreg":
            q = _QARG.match(args)
            if not q or reg is not None:
                raise CircuitFormatError(f"line {lineno}: expected one 'qreg name[n]'")
            reg, n = q.group(1), int(q.group(2))
            continue
        if reg is None:
            raise CircuitFormatError(f"line {lineno}: gate before qreg declaration")
        qubits = []
        for a in _split_args(args):
            q = _QARG.match(a)
            if not q or q.group(1) != reg:
                raise CircuitFormatError(f"line {lineno}: bad qubit argument {a!r}")
            idx = int(q.group(2))
            if idx >= n:
                raise CircuitFormatError(f"line {lineno}: qubit {a} out of range")
            qubits.append(idx + 1)
        try:
            angles = [eval_angle(p) for p in _split_args(params or "")]
        except ValueError as exc:
            raise CircuitFormatError(f"line {lineno}: {exc}") from None
        if op in ("rx", "ry", "rz") and len(qubits) == 1 and len(angles) == 1:
            gates.append(rotation(op[1], qubits[0], angles[0]))
        elif op == "cx" and len(qubits) == 2 and not angles:
            if qubits[0] == qubits[1]:
                raise CircuitFormatError(f"line {lineno}: control equals target")
            gates.append(cx(*qubits))
        elif op == "u3" and len(qubits) == 1 and len(angles) == 3:
            t, p, lam = angles
            q = qubits[0]
            gates += [rotation("z", q, lam), rotation("y", q, t), rotation("z", q, p)]
        else:
            raise CircuitFormatError(f"line {lineno}: unsupported statement {stmt!r}")
    if reg is None:
        raise CircuitFormatError("no qreg declaration")
    return Circuit(n, tuple(gates))


def _line_index(text: str):
    breaks = [i for i, ch in enumerate(text) if ch == "\n"]

    def line_of(offset: int) -> int:
        return bisect.bisect_left(breaks, offset) + 1

    return line_of
