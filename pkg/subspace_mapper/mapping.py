"""
Mapping of the valid subspace onto qubits.

The operator D = sum_m |m_*><m| sends basis vector m of the valid subspace to the
computational state with the same index, on ceil(log2 M) qubits. The reduced
Hamiltonian is D H D^dagger.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import get_settings
from .constraint import SubspaceBasis, qubit_count
from .errors import DimensionCapError, ToleranceError
from .fermion import FermionOperator, apply_operator

logger = structlog.get_logger(__name__)

PRUNE_TOL = 1e-10
SYMMETRY_TOL = 1e-8
SUBSPACE_TOL = 1e-8
NORM_TOL = 1e-10

Entry = Tuple[int, int, float]


class SubspaceMap(BaseModel):
    """Valid-subspace basis with its identity assignment m -> m_*"""

    model_config = ConfigDict(frozen=True)

    basis: SubspaceBasis
    n_qubits: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _fits(self) -> "SubspaceMap":
        if self.n_qubits != qubit_count(self.basis.dimension):
            raise ValueError(f"{self.basis.dimension} states need {qubit_count(self.basis.dimension)} qubits")
        return self

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def assignment(self, m: int) -> int:
        if not 0 <= m < self.dimension:
            raise IndexError(f"subspace index {m} out of range")
        return m

    def operator(self) -> sps.csr_matrix:
        """D as a 2^Q x 2^n sparse matrix; rows from M on stay empty"""
        embed = self.basis.matrix().tocoo()
        return sps.coo_matrix(
            (embed.data, (embed.col, embed.row)),
            shape=(1 << self.n_qubits, self.basis.fock_dimension),
        ).tocsr()


class ReducedHamiltonian(BaseModel):
    """Sparse real-symmetric matrix on Q qubits, supported on the first M states.

    ``entries`` hold both (m, m', v) and (m', m, v) for off-diagonal elements,
    in row-major order.
    """

    model_config = ConfigDict(frozen=True)

    entries: Tuple[Entry, ...]
    n_qubits: int = Field(..., ge=1)
    dimension: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _consistent(self) -> "ReducedHamiltonian":
        if self.dimension > 1 << self.n_qubits:
            raise ValueError(f"dimension {self.dimension} does not fit on {self.n_qubits} qubits")
        lookup = {}
        for m, mp, value in self.entries:
            if not (0 <= m < self.dimension and 0 <= mp < self.dimension):
                raise ValueError(f"entry ({m}, {mp}) lies outside the {self.dimension}-state subspace")
            lookup[(m, mp)] = value
        for (m, mp), value in lookup.items():
            if m != mp and lookup.get((mp, m)) != value:
                raise ValueError(f"entry ({m}, {mp}) has no symmetric partner")
        return self

    @classmethod
    def from_dense(cls, matrix: np.ndarray, n_qubits: Optional[int] = None) -> "ReducedHamiltonian":
        """Build from an M x M real-symmetric matrix"""
        matrix = np.asarray(matrix, dtype=float)
        dimension = matrix.shape[0]
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > SYMMETRY_TOL:
            raise ToleranceError("matrix is not symmetric")
        matrix = 0.5 * (matrix + matrix.T)
        entries = [
            (m, mp, float(matrix[m, mp]))
            for m in range(dimension)
            for mp in range(dimension)
            if abs(matrix[m, mp]) >= PRUNE_TOL
        ]
        return cls(
            entries=tuple(entries),
            n_qubits=n_qubits if n_qubits is not None else qubit_count(dimension),
            dimension=dimension,
        )

    def diagonal(self) -> List[Tuple[int, float]]:
        return [(m, v) for m, mp, v in self.entries if m == mp]

    def off_diagonal(self) -> List[Entry]:
        """Each unordered off-diagonal pair once, as (m, m', v) with m < m'"""
        return [(m, mp, v) for m, mp, v in self.entries if m < mp]

    def to_sparse(self) -> sps.csr_matrix:
        size = 1 << self.n_qubits
        if not self.entries:
            return sps.csr_matrix((size, size))
        rows, cols, data = zip(*self.entries)
        return sps.csr_matrix((data, (rows, cols)), shape=(size, size))

    def to_dense(self, full: bool = True) -> np.ndarray:
        """Dense matrix on all 2^Q states, or only the M x M block"""
        matrix = self.to_sparse().toarray()
        return matrix if full else matrix[: self.dimension, : self.dimension]


class MappedState(BaseModel):
    """State on the Q-qubit register"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    amplitudes: np.ndarray
    n_qubits: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _shape_and_norm(self) -> "MappedState":
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got shape {self.amplitudes.shape}")
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} is not 1")
        return self


def build_map(basis: SubspaceBasis) -> SubspaceMap:
    """Identity assignment on the fewest qubits that hold the basis"""
    subspace_map = SubspaceMap(basis=basis, n_qubits=qubit_count(basis.dimension))
    logger.info("map_built", dimension=basis.dimension, qubits=subspace_map.n_qubits)
    return subspace_map


def reduce_hamiltonian(
    op: FermionOperator,
    subspace_map: SubspaceMap,
) -> ReducedHamiltonian:
    """h_mm' = <m|H|m'> over the valid basis, pruned and checked for symmetry"""
    basis = subspace_map.basis
    if basis.n_orbitals != op.n_orbitals:
        raise ValueError(
            f"operator has {op.n_orbitals} orbitals but the subspace has {basis.n_orbitals}"
        )

    index: Dict[int, List[Tuple[int, float]]] = {}
    for m, vector in enumerate(basis.vectors):
        for fock, amplitude in vector:
            index.setdefault(fock, []).append((m, amplitude))

    size = basis.dimension
    values: Dict[Tuple[int, int], float] = {}
    for mp in range(size):
        image = apply_operator(op, basis.vector(mp))
        for fock, amplitude in image.items():
            for m, coefficient in index.get(fock, ()):
                values[(m, mp)] = values.get((m, mp), 0.0) + coefficient * amplitude

    entries = []
    for (m, mp), value in sorted(values.items()):
        if m > mp:
            continue
        partner = values.get((mp, m), 0.0)
        if abs(value - partner) > SYMMETRY_TOL:
            raise ToleranceError(
                f"reduced Hamiltonian is not symmetric at ({m}, {mp}): {value:.12g} vs {partner:.12g}"
            )
        value = 0.5 * (value + partner)
        if abs(value) < PRUNE_TOL:
            continue
        entries.append((m, mp, value))
        if m != mp:
            entries.append((mp, m, value))
    # a (m', m) value without its (m, m') partner
    for (m, mp), value in values.items():
        if m > mp and (mp, m) not in values and abs(value) > SYMMETRY_TOL:
            raise ToleranceError(f"reduced Hamiltonian is not symmetric at ({mp}, {m})")

    entries.sort(key=lambda e: (e[0], e[1]))
    reduced = ReducedHamiltonian(
        entries=tuple(entries), n_qubits=subspace_map.n_qubits, dimension=size
    )
    logger.info("hamiltonian_reduced", entries=len(entries), qubits=reduced.n_qubits)
    return reduced


def map_state(state: np.ndarray, subspace_map: SubspaceMap) -> MappedState:
    """|psi_H> = D|psi_N> for a Fock-space vector inside the valid subspace"""
    state = np.asarray(state)
    if state.shape != (subspace_map.basis.fock_dimension,):
        raise ValueError(f"expected a vector of length {subspace_map.basis.fock_dimension}")
    embed = subspace_map.basis.matrix()
    alphas = embed.T @ state
    residual = float(np.linalg.norm(state - embed @ alphas))
    if residual > SUBSPACE_TOL:
        raise ToleranceError(f"state lies outside the valid subspace (residual {residual:.3g})")
    amplitudes = np.zeros(1 << subspace_map.n_qubits, dtype=complex)
    amplitudes[: subspace_map.dimension] = alphas
    return MappedState(amplitudes=amplitudes, n_qubits=subspace_map.n_qubits)


def unmap_state(mapped: MappedState, subspace_map: SubspaceMap) -> np.ndarray:
    """D^dagger|psi_H> = sum_m alpha_m |m>"""
    if mapped.n_qubits != subspace_map.n_qubits:
        raise ValueError("state and map use different qubit counts")
    alphas = mapped.amplitudes[: subspace_map.dimension]
    return subspace_map.basis.matrix() @ alphas


def projector_check(subspace_map: SubspaceMap) -> float:
    """max residual of D^dagger D = P_N and D D^dagger = identity on the used block"""
    cap = get_settings().dense_cap
    if subspace_map.basis.fock_dimension > cap:
        raise DimensionCapError(
            f"Fock dimension {subspace_map.basis.fock_dimension} exceeds the dense cap {cap}"
        )
    d = subspace_map.operator().toarray()
    projector = subspace_map.basis.projector()
    used = np.zeros((1 << subspace_map.n_qubits,) * 2)
    used[: subspace_map.dimension, : subspace_map.dimension] = np.eye(subspace_map.dimension)
    residual = max(
        float(np.max(np.abs(d.T @ d - projector))),
        float(np.max(np.abs(d @ d.T - used))),
    )
    logger.debug("projector_checked", residual=residual)
    return residual
