"""
Fermionic operator algebra over a finite Fock space.

Spin-orbital ``i`` is bit ``i`` of an occupation integer; printed kets put
orbital 0 rightmost. Ladder operators in a term are applied right-to-left, each
one picking up ``(-1)`` per occupied orbital with a lower index (the Z-string of
the Jordan-Wigner image).
"""

import math
import re
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import get_settings
from .errors import ParseError, ToleranceError

logger = structlog.get_logger(__name__)

HERMITICITY_TOL = 1e-9
JW_DROP_TOL = 1e-12
JW_IMAG_TOL = 1e-10

# (orbital, is_creation) pairs in application order
CompiledOps = Tuple[Tuple[int, bool], ...]


class OpKind(str, Enum):
    CREATION = "creation"
    ANNIHILATION = "annihilation"


class LadderOp(BaseModel):
    """Creation or annihilation operator on one spin-orbital"""

    model_config = ConfigDict(frozen=True)

    orbital: int = Field(..., ge=0)
    kind: OpKind

    @property
    def is_creation(self) -> bool:
        return self.kind is OpKind.CREATION

    def dagger(self) -> "LadderOp":
        kind = OpKind.ANNIHILATION if self.is_creation else OpKind.CREATION
        return LadderOp(orbital=self.orbital, kind=kind)

    def __str__(self) -> str:
        return f"{self.orbital}^" if self.is_creation else str(self.orbital)


def create(orbital: int) -> LadderOp:
    return LadderOp(orbital=orbital, kind=OpKind.CREATION)


def annihilate(orbital: int) -> LadderOp:
    return LadderOp(orbital=orbital, kind=OpKind.ANNIHILATION)


class FermionTerm(BaseModel):
    """Real coefficient times an ordered product of ladder operators"""

    model_config = ConfigDict(frozen=True)

    coefficient: float
    ops: Tuple[LadderOp, ...] = ()

    @field_validator("coefficient")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("coefficient must be finite")
        return value

    @property
    def is_identity(self) -> bool:
        return not self.ops

    @property
    def max_orbital(self) -> int:
        return max((op.orbital for op in self.ops), default=-1)

    def adjoint(self) -> "FermionTerm":
        return FermionTerm(
            coefficient=self.coefficient,
            ops=tuple(op.dagger() for op in reversed(self.ops)),
        )

    def compiled(self) -> CompiledOps:
        return tuple((op.orbital, op.is_creation) for op in reversed(self.ops))

    def __str__(self) -> str:
        return f"{self.coefficient:.12g} [{' '.join(str(op) for op in self.ops)}]"


class FockState(BaseModel):
    """Occupation-number basis state"""

    model_config = ConfigDict(frozen=True)

    occupation: int = Field(..., ge=0)
    n_orbitals: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _in_range(self) -> "FockState":
        if self.occupation >= 1 << self.n_orbitals:
            raise ValueError(
                f"occupation {self.occupation} does not fit in {self.n_orbitals} orbitals"
            )
        return self

    def is_occupied(self, orbital: int) -> bool:
        return bool(self.occupation >> orbital & 1)

    @property
    def n_electrons(self) -> int:
        return popcount(self.occupation)

    @property
    def label(self) -> str:
        return format(self.occupation, f"0{self.n_orbitals}b") if self.n_orbitals else ""

    @classmethod
    def from_label(cls, label: str, holes: bool = False) -> "FockState":
        """Build a state from a printed ket label.

        With ``holes`` the label is read the other way round: leftmost character is
        orbital 0 and ``0`` marks an occupied orbital.
        """
        if any(ch not in "01" for ch in label):
            raise ValueError(f"invalid ket label {label!r}")
        if holes:
            occupation = sum(1 << i for i, ch in enumerate(label) if ch == "0")
        else:
            occupation = int(label, 2) if label else 0
        return cls(occupation=occupation, n_orbitals=len(label))

    def __str__(self) -> str:
        return f"|{self.label}>"


PauliLabel = Literal["X", "Y", "Z"]

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class PauliString(BaseModel):
    """Real coefficient times a tensor product of Pauli factors"""

    model_config = ConfigDict(frozen=True)

    factors: Dict[int, PauliLabel] = Field(default_factory=dict)
    coefficient: float

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def label(self) -> str:
        if not self.factors:
            return "I"
        return " ".join(f"{p}{q}" for q, p in sorted(self.factors.items()))

    def to_matrix(self, n_qubits: int) -> np.ndarray:
        """Dense matrix with qubit 0 as the least significant index bit"""
        matrix = np.ones((1, 1), dtype=complex)
        for q in reversed(range(n_qubits)):
            matrix = np.kron(matrix, _PAULI_MATRICES[self.factors.get(q, "I")])
        return self.coefficient * matrix

    def __str__(self) -> str:
        return f"{self.coefficient:.12g} {self.label}"


class FermionOperator(BaseModel):
    """Sum of fermionic terms over ``n_orbitals`` spin-orbitals"""

    model_config = ConfigDict(frozen=True)

    terms: Tuple[FermionTerm, ...]
    n_orbitals: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _orbitals_in_range(self) -> "FermionOperator":
        for term in self.terms:
            if term.max_orbital >= self.n_orbitals:
                raise ValueError(
                    f"term {term} references orbital {term.max_orbital} "
                    f"but the operator has {self.n_orbitals} orbitals"
                )
        return self

    @classmethod
    def identity(cls, coefficient: float, n_orbitals: int) -> "FermionOperator":
        return cls(terms=(FermionTerm(coefficient=coefficient),), n_orbitals=n_orbitals)

    @property
    def dimension(self) -> int:
        return 1 << self.n_orbitals

    def compiled(self) -> List[Tuple[float, CompiledOps]]:
        return [(t.coefficient, t.compiled()) for t in self.terms]

    def adjoint(self) -> "FermionOperator":
        return FermionOperator(terms=tuple(t.adjoint() for t in self.terms), n_orbitals=self.n_orbitals)

    def to_sparse(self) -> sps.csr_matrix:
        return operator_matrix(self)

    def hermiticity_residual(self) -> float:
        """max |H - H^T| of the induced real matrix"""
        matrix = self.to_sparse()
        diff = (matrix - matrix.T).tocoo()
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def __str__(self) -> str:
        return "\n".join(str(t) for t in self.terms)


def popcount(value: int) -> int:
    return bin(value).count("1")


def _apply_compiled(ops: CompiledOps, occupation: int) -> Optional[Tuple[int, int]]:
    sign = 1
    for orbital, creation in ops:
        bit = 1 << orbital
        occupied = occupation & bit
        if creation == bool(occupied):
            return None
        if popcount(occupation & (bit - 1)) & 1:
            sign = -sign
        occupation ^= bit
    return occupation, sign


def apply_term(term: FermionTerm, state: FockState) -> Optional[Tuple[FockState, int]]:
    """Apply the ladder operators of ``term`` (ignoring its coefficient).

    Returns the resulting basis state and fermionic sign, or ``None`` when the
    product annihilates the state.
    """
    if term.max_orbital >= state.n_orbitals:
        raise ValueError(f"term {term} acts outside a {state.n_orbitals}-orbital space")
    result = _apply_compiled(term.compiled(), state.occupation)
    if result is None:
        return None
    occupation, sign = result
    return FockState(occupation=occupation, n_orbitals=state.n_orbitals), sign


def apply_operator(op: FermionOperator, vector: Mapping[int, float]) -> Dict[int, float]:
    """Sparse action of ``op`` on a vector given as {occupation: amplitude}"""
    out: Dict[int, float] = {}
    compiled = op.compiled()
    for occupation, amplitude in vector.items():
        if amplitude == 0.0:
            continue
        for coefficient, ops in compiled:
            result = _apply_compiled(ops, occupation)
            if result is None:
                continue
            target, sign = result
            out[target] = out.get(target, 0.0) + sign * coefficient * amplitude
    return out


def matrix_element(op: FermionOperator, bra: FockState, ket: FockState) -> float:
    """<bra|op|ket> in the occupation basis"""
    value = 0.0
    for coefficient, ops in op.compiled():
        result = _apply_compiled(ops, ket.occupation)
        if result is not None and result[0] == bra.occupation:
            value += result[1] * coefficient
    return value


def operator_matrix(op: FermionOperator, states: Optional[Sequence[int]] = None) -> sps.csr_matrix:
    """Sparse matrix of ``op`` on the given basis states (default: whole Fock space).

    Amplitude that leaves the given states is dropped, so pass a sector that the
    operator preserves.
    """
    if states is None:
        states = range(op.dimension)
    index = {occupation: i for i, occupation in enumerate(states)}
    compiled = op.compiled()
    rows: List[int] = []
    cols: List[int] = []
    data: List[float] = []
    for j, occupation in enumerate(states):
        for coefficient, ops in compiled:
            result = _apply_compiled(ops, occupation)
            if result is None:
                continue
            i = index.get(result[0])
            if i is None:
                continue
            rows.append(i)
            cols.append(j)
            data.append(result[1] * coefficient)
    size = len(states)
    return sps.coo_matrix((data, (rows, cols)), shape=(size, size), dtype=float).tocsr()


_TERM_RE = re.compile(r"^(?P<coeff>[^\[\s]+)\s*\[(?P<ops>[^\]]*)\]$")
_OP_RE = re.compile(r"^(?P<index>-?\d+)(?P<dagger>\^?)$")


def parse_fermion_operator(
    text: str,
    n_orbitals: Optional[int] = None,
    validate: bool = True,
) -> FermionOperator:
    """Parse a Hamiltonian file (``<coeff> [<op> ...]`` per line, ``#`` comments).

    ``n_orbitals`` enlarges the Fock space beyond the highest referenced orbital.
    """
    terms: List[FermionTerm] = []
    highest = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _TERM_RE.match(line)
        if not match:
            raise ParseError(f"expected '<coeff> [<ops>]', got {line!r}", lineno)

        coeff_text = match.group("coeff")
        if "j" in coeff_text.lower():
            raise ParseError("complex coefficients are not supported", lineno)
        try:
            coefficient = float(coeff_text)
        except ValueError:
            raise ParseError(f"invalid coefficient {coeff_text!r}", lineno) from None
        if not math.isfinite(coefficient):
            raise ParseError(f"non-finite coefficient {coeff_text!r}", lineno)

        ops = []
        for token in match.group("ops").split():
            op_match = _OP_RE.match(token)
            if not op_match:
                raise ParseError(f"invalid operator {token!r}", lineno)
            orbital = int(op_match.group("index"))
            if orbital < 0:
                raise ParseError(f"negative orbital index {orbital}", lineno)
            ops.append(create(orbital) if op_match.group("dagger") else annihilate(orbital))
            highest = max(highest, orbital)
        terms.append(FermionTerm(coefficient=coefficient, ops=tuple(ops)))

    if not terms:
        raise ParseError("no terms")
    required = highest + 1
    if n_orbitals is not None and n_orbitals < required:
        raise ParseError(f"operator references orbital {highest} but only {n_orbitals} orbitals were given")

    op = FermionOperator(terms=tuple(terms), n_orbitals=max(required, n_orbitals or 0))
    if validate:
        validate_hermitian(op)
    logger.debug("fermion_operator_parsed", terms=len(op.terms), n_orbitals=op.n_orbitals)
    return op


def validate_hermitian(op: FermionOperator) -> None:
    limit = get_settings().hermiticity_max_orbitals
    if op.n_orbitals > limit:
        logger.warning("hermiticity_check_skipped", n_orbitals=op.n_orbitals, limit=limit)
        return
    residual = op.hermiticity_residual()
    if residual > HERMITICITY_TOL:
        raise ToleranceError(f"operator is not Hermitian: max |H - H^T| = {residual:.3g}")


def load_fermion_operator(path: Union[str, Path], n_orbitals: Optional[int] = None) -> FermionOperator:
    with open(path, "r", encoding="utf-8") as f:
        return parse_fermion_operator(f.read(), n_orbitals=n_orbitals)


# Pauli product table: (left, right) -> (result, phase)
_PAULI_PRODUCT = {
    ("I", "I"): ("I", 1), ("I", "X"): ("X", 1), ("I", "Y"): ("Y", 1), ("I", "Z"): ("Z", 1),
    ("X", "I"): ("X", 1), ("X", "X"): ("I", 1), ("X", "Y"): ("Z", 1j), ("X", "Z"): ("Y", -1j),
    ("Y", "I"): ("Y", 1), ("Y", "X"): ("Z", -1j), ("Y", "Y"): ("I", 1), ("Y", "Z"): ("X", 1j),
    ("Z", "I"): ("Z", 1), ("Z", "X"): ("Y", 1j), ("Z", "Y"): ("X", -1j), ("Z", "Z"): ("I", 1),
}


def _multiply_strings(a: str, b: str) -> Tuple[str, complex]:
    result = []
    phase: complex = 1
    for pa, pb in zip(a, b):
        p, ph = _PAULI_PRODUCT[(pa, pb)]
        result.append(p)
        phase *= ph
    return "".join(result), phase


def _ladder_image(orbital: int, creation: bool, n_qubits: int) -> List[Tuple[str, complex]]:
    # character k of a string is qubit k
    head = "Z" * orbital
    tail = "I" * (n_qubits - orbital - 1)
    return [(head + "X" + tail, 0.5), (head + "Y" + tail, -0.5j if creation else 0.5j)]


def jordan_wigner(op: FermionOperator) -> List[PauliString]:
    """Expand ``op`` into combined Pauli strings.

    Strings below ``JW_DROP_TOL`` are dropped; a surviving imaginary part above
    ``JW_IMAG_TOL`` means the input was not Hermitian.
    """
    n = op.n_orbitals
    total: Dict[str, complex] = {}
    for term in op.terms:
        product: Dict[str, complex] = {"I" * n: complex(term.coefficient)}
        for ladder in term.ops:
            image = _ladder_image(ladder.orbital, ladder.is_creation, n)
            grown: Dict[str, complex] = {}
            for left, c_left in product.items():
                for right, c_right in image:
                    key, phase = _multiply_strings(left, right)
                    grown[key] = grown.get(key, 0) + c_left * c_right * phase
            product = grown
        for key, value in product.items():
            total[key] = total.get(key, 0) + value

    strings = []
    for key, value in total.items():
        if abs(value) < JW_DROP_TOL:
            continue
        if abs(value.imag) > JW_IMAG_TOL:
            raise ToleranceError(
                f"imaginary coefficient {value.imag:.3g} on Pauli string {key}; input is not Hermitian"
            )
        factors = {q: p for q, p in enumerate(key) if p != "I"}
        strings.append(PauliString(factors=factors, coefficient=value.real))
    strings.sort(key=lambda s: (len(s.factors), sorted(s.factors.items())))
    return strings


def count_pauli_strings(op: FermionOperator) -> int:
    """Number of non-identity Jordan-Wigner strings (one circuit each when measured naively)"""
    return sum(1 for s in jordan_wigner(op) if not s.is_identity)


def pauli_sum_matrix(strings: Sequence[PauliString], n_qubits: int) -> np.ndarray:
    matrix = np.zeros((1 << n_qubits, 1 << n_qubits), dtype=complex)
    for s in strings:
        matrix += s.to_matrix(n_qubits)
    return matrix
