"""
Gate-level circuits and the OpenQASM 2.0 subset they are exchanged in.

Qubit ``q`` is bit ``q`` of a computational basis index, matching the
orbital convention of the fermion module.
"""

import ast
import math
import operator
import re
from enum import Enum
from typing import Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ParseError, validation_message


class GateName(str, Enum):
    H = "h"
    X = "x"
    CX = "cx"
    RX = "rx"
    RY = "ry"
    RZ = "rz"

    @property
    def arity(self) -> int:
        return 2 if self is GateName.CX else 1

    @property
    def is_rotation(self) -> bool:
        return self in (GateName.RX, GateName.RY, GateName.RZ)


class Gate(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: GateName
    qubits: Tuple[int, ...]
    angle: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "Gate":
        if len(self.qubits) != self.name.arity:
            raise ValueError(f"{self.name.value} acts on {self.name.arity} qubit(s), got {len(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("qubit indices must be non-negative")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("cx control and target must differ")
        if self.name.is_rotation != (self.angle is not None):
            raise ValueError(f"{self.name.value} {'needs' if self.name.is_rotation else 'takes no'} angle")
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("angle must be finite")
        return self

    def __str__(self) -> str:
        args = ",".join(f"q[{q}]" for q in self.qubits)
        if self.angle is None:
            return f"{self.name.value} {args};"
        return f"{self.name.value}({self.angle:.12g}) {args};"


def h(q: int) -> Gate:
    return Gate(name=GateName.H, qubits=(q,))


def x(q: int) -> Gate:
    return Gate(name=GateName.X, qubits=(q,))


def cx(control: int, target: int) -> Gate:
    return Gate(name=GateName.CX, qubits=(control, target))


def rx(q: int, angle: float) -> Gate:
    return Gate(name=GateName.RX, qubits=(q,), angle=angle)


def ry(q: int, angle: float) -> Gate:
    return Gate(name=GateName.RY, qubits=(q,), angle=angle)


def rz(q: int, angle: float) -> Gate:
    return Gate(name=GateName.RZ, qubits=(q,), angle=angle)


class Circuit(BaseModel):
    """Ordered gate list on ``n_qubits`` qubits"""

    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(..., ge=1)
    gates: Tuple[Gate, ...] = ()

    @model_validator(mode="after")
    def _qubits_in_range(self) -> "Circuit":
        for gate in self.gates:
            if max(gate.qubits) >= self.n_qubits:
                raise ValueError(f"gate {gate} acts outside a {self.n_qubits}-qubit register")
        return self

    @classmethod
    def of(cls, n_qubits: int, gates: Iterable[Gate]) -> "Circuit":
        return cls(n_qubits=n_qubits, gates=tuple(gates))

    def then(self, other: "Circuit") -> "Circuit":
        """This circuit followed by ``other``"""
        if other.n_qubits != self.n_qubits:
            raise ValueError(f"cannot append a {other.n_qubits}-qubit circuit to a {self.n_qubits}-qubit one")
        return Circuit(n_qubits=self.n_qubits, gates=self.gates + other.gates)

    def count(self, name: GateName) -> int:
        return sum(1 for g in self.gates if g.name is name)

    def __len__(self) -> int:
        return len(self.gates)


QASM_HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";'


def to_qasm(circuit: Circuit, measure: bool = True) -> str:
    """OpenQASM 2.0 text, angles printed with 12 significant digits"""
    lines = [QASM_HEADER, f"qreg q[{circuit.n_qubits}];"]
    if measure:
        lines.append(f"creg c[{circuit.n_qubits}];")
    lines.extend(str(g) for g in circuit.gates)
    if measure:
        lines.extend(f"measure q[{q}] -> c[{q}];" for q in range(circuit.n_qubits))
    return "\n".join(lines) + "\n"


_BINARY_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNARY_OPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _evaluate(node: ast.AST) -> float:
    if isinstance(node, ast.Expression):
        return _evaluate(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY_OPS:
        return _BINARY_OPS[type(node.op)](_evaluate(node.left), _evaluate(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPS:
        return _UNARY_OPS[type(node.op)](_evaluate(node.operand))
    raise ValueError("unsupported expression")


def parse_angle(text: str) -> float:
    """Decimal literal or arithmetic over ``pi`` (``pi/2``, ``-pi/2``, ``0.5*pi``)"""
    try:
        value = _evaluate(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise ValueError(f"invalid angle {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"invalid angle {text!r}")
    return value


_STATEMENT_RE = re.compile(r"^(?P<name>[a-zA-Z_]\w*)\s*(?:\((?P<params>[^)]*)\))?\s*(?P<args>.*)$")
_QUBIT_RE = re.compile(r"^(?P<reg>[a-zA-Z_]\w*)\s*\[\s*(?P<index>\d+)\s*\]$")
_IGNORED = {"OPENQASM", "include", "creg", "barrier", "measure"}


def _qubit(token: str, register: Optional[str], lineno: int) -> int:
    match = _QUBIT_RE.match(token.strip())
    if not match:
        raise ParseError(f"invalid qubit reference {token.strip()!r}", lineno)
    if register is not None and match.group("reg") != register:
        raise ParseError(f"unknown register {match.group('reg')!r}", lineno)
    return int(match.group("index"))


def parse_qasm(text: str) -> Circuit:
    """Read the gate subset h, x, cx, rx, ry, rz from OpenQASM 2.0.

    A single quantum register is supported; ``measure``, ``barrier`` and
    ``creg`` statements are accepted and ignored.
    """
    register: Optional[str] = None
    size: Optional[int] = None
    gates: List[Gate] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0].strip()
        for statement in filter(None, (s.strip() for s in line.split(";"))):
            match = _STATEMENT_RE.match(statement)
            if not match:
                raise ParseError(f"cannot parse {statement!r}", lineno)
            name = match.group("name")
            if name in _IGNORED:
                continue
            if name == "qreg":
                if register is not None:
                    raise ParseError("only one qreg is supported", lineno)
                reg = _QUBIT_RE.match(match.group("args").strip())
                if not reg:
                    raise ParseError(f"invalid qreg declaration {statement!r}", lineno)
                register, size = reg.group("reg"), int(reg.group("index"))
                continue
            try:
                gate_name = GateName(name)
            except ValueError:
                raise ParseError(f"unsupported gate {name!r}", lineno) from None
            if register is None:
                raise ParseError("gate before qreg declaration", lineno)

            qubits = tuple(_qubit(t, register, lineno) for t in match.group("args").split(","))
            angle = None
            if match.group("params") is not None:
                try:
                    angle = parse_angle(match.group("params"))
                except ValueError as e:
                    raise ParseError(str(e), lineno) from None
            try:
                gates.append(Gate(name=gate_name, qubits=qubits, angle=angle))
            except ValueError as e:
                raise ParseError(validation_message(e), lineno) from None

    if register is None or not size:
        raise ParseError("no qreg declaration")
    try:
        return Circuit(n_qubits=size, gates=tuple(gates))
    except ValueError as e:
        raise ParseError(validation_message(e)) from None
