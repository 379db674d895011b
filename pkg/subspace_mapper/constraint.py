"""
Constraint observables and the valid subspace they carve out of the Fock space.

Number and S_z constraints are functions of the per-spin electron counts, so
they are applied by enumerating the admissible (N_up, N_down) sectors. S^2 is
diagonalised only inside the resulting sector.
"""

import math
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InfeasibleConstraintError, ParseError, ToleranceError, validation_message
from .fermion import FermionOperator, FermionTerm, annihilate, create, operator_matrix, popcount

logger = structlog.get_logger(__name__)

EIGEN_TOL = 1e-8
RESIDUAL_TOL = 1e-7
AMPLITUDE_CUTOFF = 1e-12
CANONICAL_TOL = 1e-6


class ConstraintKind(str, Enum):
    TOTAL_NUMBER = "total_number"
    NUMBER_UP = "number_up"
    NUMBER_DOWN = "number_down"
    SZ = "sz"
    S_SQUARED = "s_squared"

    @property
    def is_diagonal(self) -> bool:
        return self is not ConstraintKind.S_SQUARED

    @property
    def is_number(self) -> bool:
        return self in (ConstraintKind.TOTAL_NUMBER, ConstraintKind.NUMBER_UP, ConstraintKind.NUMBER_DOWN)

    @property
    def spin_resolved(self) -> bool:
        return self is not ConstraintKind.TOTAL_NUMBER


class ConstraintSpec(BaseModel):
    """Constraint observable plus its allowed eigenvalues"""

    model_config = ConfigDict(frozen=True)

    kind: ConstraintKind
    allowed: Tuple[float, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_values(self) -> "ConstraintSpec":
        for value in self.allowed:
            if not math.isfinite(value):
                raise ValueError(f"allowed value {value} is not finite")
            if self.kind.is_number and (value < 0 or value != int(value)):
                raise ValueError(f"{self.kind.value} needs non-negative integers, got {value}")
        return self

    def accepts(self, value: float) -> bool:
        return any(abs(value - a) <= EIGEN_TOL for a in self.allowed)

    def __str__(self) -> str:
        return f"{self.kind.value} allowed={','.join(format(v, 'g') for v in self.allowed)}"


SparseVector = Tuple[Tuple[int, float], ...]


def _ordering_key(vector: SparseVector) -> Tuple[int, ...]:
    ranked = sorted(vector, key=lambda entry: (-round(abs(entry[1]), 9), entry[0]))
    return tuple(fock for fock, _ in ranked)


class SubspaceBasis(BaseModel):
    """Ordered orthonormal basis {|m>} of the valid subspace, stored sparsely"""

    model_config = ConfigDict(frozen=True)

    vectors: Tuple[SparseVector, ...] = Field(..., min_length=1)
    n_orbitals: int = Field(..., ge=0)

    @field_validator("vectors")
    @classmethod
    def _non_empty_vectors(cls, vectors):
        for v in vectors:
            if not v:
                raise ValueError("basis vectors must have at least one amplitude")
        return vectors

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    @property
    def fock_dimension(self) -> int:
        return 1 << self.n_orbitals

    @property
    def is_occupation_basis(self) -> bool:
        return all(len(v) == 1 for v in self.vectors)

    def vector(self, m: int) -> Dict[int, float]:
        return dict(self.vectors[m])

    def matrix(self) -> sps.csc_matrix:
        """Fock-dimension x M matrix whose columns are the basis vectors"""
        rows, cols, data = [], [], []
        for m, vector in enumerate(self.vectors):
            for fock, amplitude in vector:
                rows.append(fock)
                cols.append(m)
                data.append(amplitude)
        return sps.csc_matrix((data, (rows, cols)), shape=(self.fock_dimension, self.dimension))

    def dense(self) -> np.ndarray:
        return self.matrix().toarray()

    def projector(self) -> np.ndarray:
        columns = self.dense()
        return columns @ columns.T

    def gram_residual(self) -> float:
        columns = self.matrix()
        gram = (columns.T @ columns).toarray()
        return float(np.max(np.abs(gram - np.eye(self.dimension))))

    @classmethod
    def from_states(cls, states: Iterable[int], n_orbitals: int) -> "SubspaceBasis":
        return cls(vectors=tuple(((s, 1.0),) for s in sorted(states)), n_orbitals=n_orbitals)

    @classmethod
    def full_space(cls, n_orbitals: int) -> "SubspaceBasis":
        return cls.from_states(range(1 << n_orbitals), n_orbitals)

    @classmethod
    def from_columns(cls, states: Sequence[int], columns: np.ndarray, n_orbitals: int) -> "SubspaceBasis":
        """Canonical basis from column vectors given over ``states``.

        Each vector gets its first nonzero amplitude (in Fock order) positive;
        vectors are ordered by their largest-amplitude Fock indices.
        """
        order = np.argsort(states)
        states = [states[i] for i in order]
        columns = np.asarray(columns)[order, :]
        vectors = []
        for k in range(columns.shape[1]):
            entries = [(int(s), float(a)) for s, a in zip(states, columns[:, k]) if abs(a) > AMPLITUDE_CUTOFF]
            if entries[0][1] < 0:
                entries = [(s, -a) for s, a in entries]
            vectors.append(tuple(entries))
        vectors.sort(key=_ordering_key)
        return cls(vectors=tuple(vectors), n_orbitals=n_orbitals)


def spin_masks(n_orbitals: int) -> Tuple[int, int]:
    """(alpha, beta) occupation masks: even orbitals are alpha"""
    up = sum(1 << i for i in range(0, n_orbitals, 2))
    down = sum(1 << i for i in range(1, n_orbitals, 2))
    return up, down


def _sector_value(kind: ConstraintKind, n_up: int, n_down: int) -> float:
    if kind is ConstraintKind.TOTAL_NUMBER:
        return n_up + n_down
    if kind is ConstraintKind.NUMBER_UP:
        return n_up
    if kind is ConstraintKind.NUMBER_DOWN:
        return n_down
    if kind is ConstraintKind.SZ:
        return 0.5 * (n_up - n_down)
    raise ValueError(f"{kind.value} is not diagonal in the occupation basis")


def diagonal_value(kind: ConstraintKind, occupation: int, n_orbitals: int) -> float:
    """Eigenvalue of a diagonal constraint on one occupation state"""
    up, down = spin_masks(n_orbitals)
    return _sector_value(kind, popcount(occupation & up), popcount(occupation & down))


def _require_even(spec: ConstraintSpec, n_orbitals: int) -> None:
    if spec.kind.spin_resolved and n_orbitals % 2:
        raise ParseError(f"{spec.kind.value} needs an even number of spin orbitals, got {n_orbitals}")


def _number_term(i: int, coefficient: float = 1.0) -> FermionTerm:
    return FermionTerm(coefficient=coefficient, ops=(create(i), annihilate(i)))


def constraint_fermion_operator(spec: ConstraintSpec, n_orbitals: int) -> FermionOperator:
    """The observable C_k of ``spec`` as a fermionic operator"""
    _require_even(spec, n_orbitals)
    kind = spec.kind
    spin = [0.5 if i % 2 == 0 else -0.5 for i in range(n_orbitals)]
    terms: List[FermionTerm] = []

    if kind is ConstraintKind.TOTAL_NUMBER:
        terms = [_number_term(i) for i in range(n_orbitals)]
    elif kind is ConstraintKind.NUMBER_UP:
        terms = [_number_term(i) for i in range(0, n_orbitals, 2)]
    elif kind is ConstraintKind.NUMBER_DOWN:
        terms = [_number_term(i) for i in range(1, n_orbitals, 2)]
    elif kind is ConstraintKind.SZ:
        terms = [_number_term(i, spin[i]) for i in range(n_orbitals)]
    else:
        # S^2 = S_- S_+ + S_z (S_z + 1), S_+ = sum_p a+_{2p} a_{2p+1}
        spatial = n_orbitals // 2
        for q in range(spatial):
            for p in range(spatial):
                terms.append(FermionTerm(
                    coefficient=1.0,
                    ops=(create(2 * q + 1), annihilate(2 * q), create(2 * p), annihilate(2 * p + 1)),
                ))
        for i in range(n_orbitals):
            for j in range(n_orbitals):
                terms.append(FermionTerm(
                    coefficient=spin[i] * spin[j],
                    ops=(create(i), annihilate(i), create(j), annihilate(j)),
                ))
        terms.extend(_number_term(i, spin[i]) for i in range(n_orbitals))

    if not terms:
        terms = [FermionTerm(coefficient=0.0)]
    return FermionOperator(terms=tuple(terms), n_orbitals=n_orbitals)


def build_constraint_operator(spec: ConstraintSpec, n_orbitals: int) -> sps.csr_matrix:
    """Sparse Hermitian matrix of the constraint observable over the whole Fock space"""
    return operator_matrix(constraint_fermion_operator(spec, n_orbitals))


def canonical_columns(columns: np.ndarray) -> np.ndarray:
    """Basis of span(columns) that does not depend on how the eigensolver rotated it.

    ``columns`` must be orthonormal. The projector onto their span is applied to
    the unit vectors in index order and the independent images are orthonormalised.
    """
    k = columns.shape[1]
    accepted: List[np.ndarray] = []
    for row in columns:
        r = row.astype(float).copy()
        for c in accepted:
            r -= (c @ r) * c
        norm = np.linalg.norm(r)
        if norm > CANONICAL_TOL:
            accepted.append(r / norm)
            if len(accepted) == k:
                break
    return columns @ np.array(accepted).T


def _select_eigenspace(matrix: np.ndarray, allowed: Sequence[float]) -> np.ndarray:
    symmetric = 0.5 * (matrix + matrix.T)
    values, vectors = scipy.linalg.eigh(symmetric)
    mask = np.array([any(abs(v - a) <= EIGEN_TOL for a in allowed) for v in values], dtype=bool)
    return vectors[:, mask]


def _check_residuals(matrix, columns: np.ndarray, allowed: Sequence[float], label: str) -> None:
    for k in range(columns.shape[1]):
        v = columns[:, k]
        image = matrix @ v
        worst = min(np.linalg.norm(image - a * v) for a in allowed)
        if worst > RESIDUAL_TOL:
            raise ToleranceError(
                f"{label}: basis vector {k} is not an eigenvector (residual {worst:.3g}); "
                "constraints must commute"
            )


def null_space(
    operator: sps.spmatrix,
    allowed: Sequence[float],
    within: Optional[SubspaceBasis] = None,
) -> SubspaceBasis:
    """Orthonormal basis of the allowed-eigenvalue eigenspaces of ``operator``.

    ``operator`` acts on the whole Fock space; it is restricted to ``within`` (or
    used as is) and every eigenvector whose eigenvalue matches an allowed value is
    kept, which realises the union over allowed values.
    """
    if not allowed:
        raise ValueError("allowed eigenvalues must not be empty")
    dimension = operator.shape[0]
    n_orbitals = dimension.bit_length() - 1
    if operator.shape != (dimension, dimension) or 1 << n_orbitals != dimension:
        raise ValueError(f"operator shape {operator.shape} is not a Fock-space operator")
    basis = within if within is not None else SubspaceBasis.full_space(n_orbitals)
    if basis.fock_dimension != dimension:
        raise ValueError("operator and subspace live in different Fock spaces")

    embed = basis.matrix()
    restricted = (embed.T @ operator @ embed).toarray()
    selected = _select_eigenspace(restricted, allowed)
    if selected.shape[1] == 0:
        raise InfeasibleConstraintError(f"no eigenvalue in {list(allowed)}")

    columns = embed @ selected
    columns = canonical_columns(columns)
    _check_residuals(operator, columns, allowed, "null space")
    return SubspaceBasis.from_columns(list(range(dimension)), columns, n_orbitals)


def sector_states(n_orbitals: int, n_up: int, n_down: int) -> List[int]:
    """Occupations with ``n_up`` electrons on even orbitals and ``n_down`` on odd ones"""
    even = list(range(0, n_orbitals, 2))
    odd = list(range(1, n_orbitals, 2))
    ups = [sum(1 << i for i in c) for c in combinations(even, n_up)]
    downs = [sum(1 << i for i in c) for c in combinations(odd, n_down)]
    return [u | d for u in ups for d in downs]


def admissible_sectors(specs: Sequence[ConstraintSpec], n_orbitals: int) -> List[Tuple[int, int]]:
    n_even = (n_orbitals + 1) // 2
    n_odd = n_orbitals // 2
    return [
        (n_up, n_down)
        for n_up in range(n_even + 1)
        for n_down in range(n_odd + 1)
        if all(spec.accepts(_sector_value(spec.kind, n_up, n_down)) for spec in specs)
    ]


def intersect_constraints(specs: Sequence[ConstraintSpec], n_orbitals: int) -> SubspaceBasis:
    """Basis of the intersection of all constraint subspaces.

    Diagonal constraints select sectors; each S^2 constraint is then diagonalised
    inside the running subspace.
    """
    specs = list(specs)
    if not specs:
        return SubspaceBasis.full_space(n_orbitals)
    for spec in specs:
        _require_even(spec, n_orbitals)

    diagonal = [s for s in specs if s.kind.is_diagonal]
    others = [s for s in specs if not s.kind.is_diagonal]

    states = sorted(
        state
        for sector in admissible_sectors(diagonal, n_orbitals)
        for state in sector_states(n_orbitals, *sector)
    )
    if not states:
        raise InfeasibleConstraintError("; ".join(str(s) for s in specs))
    if not others:
        basis = SubspaceBasis.from_states(states, n_orbitals)
        logger.info("subspace_built", dimension=basis.dimension, sector_size=len(states))
        return basis

    # coordinates of the running subspace over the sector states; None is the whole sector
    columns: Optional[np.ndarray] = None
    for spec in others:
        matrix = operator_matrix(constraint_fermion_operator(spec, n_orbitals), states)
        if columns is None:
            restricted = matrix.toarray()
        else:
            restricted = columns.T @ (matrix @ columns)
        selected = _select_eigenspace(restricted, spec.allowed)
        if selected.shape[1] == 0:
            raise InfeasibleConstraintError("; ".join(str(s) for s in specs))
        columns = selected if columns is None else columns @ selected
        _check_residuals(matrix, columns, spec.allowed, str(spec))

    columns = canonical_columns(columns)
    basis = SubspaceBasis.from_columns(states, columns, n_orbitals)
    logger.info("subspace_built", dimension=basis.dimension, sector_size=len(states))
    return basis


def qubit_count(dimension: int) -> int:
    """ceil(log2 M), never below one qubit"""
    if dimension < 1:
        raise ValueError("dimension must be positive")
    return max(1, (dimension - 1).bit_length())


def sector_qubits(n_orbitals: int, n_up: int, n_down: int) -> int:
    """Qubits needed for a fixed (N_up, N_down) sector"""
    spatial = n_orbitals // 2
    return qubit_count(math.comb(spatial, n_up) * math.comb(spatial, n_down))


def _parse_number(text: str, lineno: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"invalid number {text!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite number {text!r}", lineno)
    return value


def _key_values(tokens: Sequence[str], lineno: int) -> Dict[str, str]:
    pairs = {}
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not value:
            raise ParseError(f"expected key=value, got {token!r}", lineno)
        pairs[key] = value
    return pairs


def _spec(kind: ConstraintKind, allowed: Sequence[float], lineno: int) -> ConstraintSpec:
    try:
        return ConstraintSpec(kind=kind, allowed=tuple(allowed))
    except ValueError as e:
        raise ParseError(validation_message(e), lineno) from None


def parse_constraints(text: str) -> List[ConstraintSpec]:
    """Parse a constraint file.

    Lines are ``<kind> allowed=<v1,v2,...>``, ``neutral_electrons=<n>`` or
    ``multiplicity=<2S+1> [sz=<v>]``. Multiplicity expands to per-spin electron
    counts and needs the total electron number from another line.
    """
    specs: List[ConstraintSpec] = []
    spin_lines: List[Tuple[int, Dict[str, str]]] = []
    totals: List[float] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        head = tokens[0]
        if "=" in head:
            pairs = _key_values(tokens, lineno)
            if "neutral_electrons" in pairs:
                if len(pairs) != 1:
                    raise ParseError("neutral_electrons takes no other keys", lineno)
                n = _parse_number(pairs["neutral_electrons"], lineno)
                specs.append(_spec(ConstraintKind.TOTAL_NUMBER, [n], lineno))
                totals.append(n)
            elif "multiplicity" in pairs:
                unknown = set(pairs) - {"multiplicity", "sz"}
                if unknown:
                    raise ParseError(f"unknown keys {sorted(unknown)}", lineno)
                spin_lines.append((lineno, pairs))
            else:
                raise ParseError(f"unknown constraint {head!r}", lineno)
            continue

        try:
            kind = ConstraintKind(head)
        except ValueError:
            raise ParseError(f"unknown constraint kind {head!r}", lineno) from None
        pairs = _key_values(tokens[1:], lineno)
        if set(pairs) != {"allowed"}:
            raise ParseError(f"{head} needs exactly one allowed=<values> field", lineno)
        allowed = [_parse_number(v, lineno) for v in pairs["allowed"].split(",") if v]
        if not allowed:
            raise ParseError("allowed list is empty", lineno)
        specs.append(_spec(kind, allowed, lineno))
        if kind is ConstraintKind.TOTAL_NUMBER and len(allowed) == 1:
            totals.append(allowed[0])

    for lineno, pairs in spin_lines:
        if len(set(totals)) != 1:
            raise ParseError("multiplicity needs exactly one total electron number", lineno)
        electrons = int(totals[0])
        multiplicity = _parse_number(pairs["multiplicity"], lineno)
        if multiplicity < 1 or multiplicity != int(multiplicity):
            raise ParseError(f"multiplicity must be a positive integer, got {multiplicity:g}", lineno)
        spin = (multiplicity - 1) / 2
        sz = _parse_number(pairs["sz"], lineno) if "sz" in pairs else spin
        two_sz = round(2 * sz)
        if abs(2 * sz - two_sz) > EIGEN_TOL or abs(sz) > spin + EIGEN_TOL:
            raise ParseError(f"sz={sz:g} is not a projection of S={spin:g}", lineno)
        if (electrons + two_sz) % 2 or electrons + two_sz < 0 or electrons - two_sz < 0:
            raise ParseError(f"{electrons} electrons cannot have sz={sz:g}", lineno)
        specs.append(_spec(ConstraintKind.NUMBER_UP, [(electrons + two_sz) // 2], lineno))
        specs.append(_spec(ConstraintKind.NUMBER_DOWN, [(electrons - two_sz) // 2], lineno))

    return specs


def load_constraints(path: Union[str, Path]) -> List[ConstraintSpec]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_constraints(f.read())
