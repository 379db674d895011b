"""
Dense statevector simulation and classical reference solves.
"""

from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse.linalg
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .circuit import Circuit, Gate, GateName
from .config import get_settings
from .constraint import canonical_columns
from .errors import DimensionCapError, ToleranceError
from .mapping import MappedState, ReducedHamiltonian

logger = structlog.get_logger(__name__)

NORM_TOL = 1e-10
PROBABILITY_SUM_TOL = 1e-6
EQUIVALENCE_TOL = 1e-9
DEGENERACY_TOL = 1e-8

_SQRT_HALF = 1 / np.sqrt(2)
_FIXED = {
    GateName.H: np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex),
    GateName.X: np.array([[0, 1], [1, 0]], dtype=complex),
}


class StateVector(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    amplitudes: np.ndarray
    n_qubits: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check(self) -> "StateVector":
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(f"expected {1 << self.n_qubits} amplitudes, got shape {self.amplitudes.shape}")
        norm = float(np.linalg.norm(self.amplitudes))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} is not 1")
        return self

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        amplitudes = np.zeros(1 << n_qubits, dtype=complex)
        amplitudes[index] = 1.0
        return cls(amplitudes=amplitudes, n_qubits=n_qubits)

    @classmethod
    def from_mapped(cls, state: MappedState) -> "StateVector":
        return cls(amplitudes=np.asarray(state.amplitudes, dtype=complex), n_qubits=state.n_qubits)


class ProbabilityTable(BaseModel):
    """Outcome probabilities over the 2^Q computational states.

    ``shots`` is absent in exact mode; sampled tables also keep the raw counts.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    probs: np.ndarray
    shots: Optional[int] = Field(None, ge=1)
    counts: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def _check(self) -> "ProbabilityTable":
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise ValueError("probabilities must be a non-empty vector")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        total = float(self.probs.sum())
        if abs(total - 1.0) > PROBABILITY_SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        if (self.counts is None) != (self.shots is None):
            raise ValueError("counts and shots go together")
        if self.counts is not None:
            if self.counts.shape != self.probs.shape or int(self.counts.sum()) != self.shots:
                raise ValueError("counts do not add up to the shot count")
        return self

    @property
    def n_qubits(self) -> int:
        return self.probs.size.bit_length() - 1

    @property
    def exact(self) -> bool:
        return self.shots is None


def gate_matrix(gate: Gate) -> np.ndarray:
    """2x2 matrix of a single-qubit gate"""
    if gate.name in _FIXED:
        return _FIXED[gate.name]
    half = gate.angle / 2
    c, s = np.cos(half), np.sin(half)
    if gate.name is GateName.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if gate.name is GateName.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.name is GateName.RZ:
        return np.array([[np.exp(-1j * half), 0], [0, np.exp(1j * half)]], dtype=complex)
    raise ValueError(f"{gate.name.value} is not a single-qubit gate")


def _apply(gate: Gate, array: np.ndarray) -> np.ndarray:
    """Apply ``gate`` along axis 0 of a state vector or a stack of columns"""
    indices = np.arange(array.shape[0])
    out = array.copy()
    if gate.name is GateName.CX:
        control, target = gate.qubits
        src = indices[((indices >> control) & 1 == 1) & ((indices >> target) & 1 == 0)]
        dst = src | (1 << target)
        out[src], out[dst] = array[dst], array[src]
        return out
    (q,) = gate.qubits
    u = gate_matrix(gate)
    low = indices[(indices >> q) & 1 == 0]
    high = low | (1 << q)
    out[low] = u[0, 0] * array[low] + u[0, 1] * array[high]
    out[high] = u[1, 0] * array[low] + u[1, 1] * array[high]
    return out


def _initial_index(initial: Union[str, int, None], n_qubits: int) -> int:
    if initial is None:
        return 0
    if isinstance(initial, str):
        if len(initial) != n_qubits or any(ch not in "01" for ch in initial):
            raise ValueError(f"initial bitstring {initial!r} does not match {n_qubits} qubits")
        return int(initial, 2)
    if not 0 <= initial < 1 << n_qubits:
        raise ValueError(f"initial state {initial} out of range")
    return initial


def run(circuit: Circuit, initial: Union[str, int, StateVector, None] = None) -> StateVector:
    """Apply the gates of ``circuit`` in order.

    ``initial`` is a printed bitstring (qubit 0 rightmost), a basis index or a
    state; the default is |0...0>.
    """
    if isinstance(initial, StateVector):
        if initial.n_qubits != circuit.n_qubits:
            raise ValueError("initial state and circuit use different qubit counts")
        amplitudes = initial.amplitudes.astype(complex)
    else:
        amplitudes = np.zeros(1 << circuit.n_qubits, dtype=complex)
        amplitudes[_initial_index(initial, circuit.n_qubits)] = 1.0

    for gate in circuit.gates:
        amplitudes = _apply(gate, amplitudes)
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise ToleranceError(f"norm drifted to {norm:.12g} after {gate}")
    return StateVector(amplitudes=amplitudes, n_qubits=circuit.n_qubits)


def probabilities(
    state: StateVector,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
) -> ProbabilityTable:
    """Exact |amplitude|^2, or multinomial frequencies from ``shots`` draws"""
    exact = np.abs(state.amplitudes) ** 2
    if shots is None:
        return ProbabilityTable(probs=exact)
    if shots < 1:
        raise ValueError("shots must be positive")
    rng = np.random.default_rng(get_settings().seed if seed is None else seed)
    counts = rng.multinomial(shots, exact / exact.sum())
    return ProbabilityTable(probs=counts / shots, shots=shots, counts=counts)


def unitary_of(circuit: Circuit) -> np.ndarray:
    """Dense 2^Q x 2^Q unitary, column j being the image of |j>"""
    cap = get_settings().max_unitary_qubits
    if circuit.n_qubits > cap:
        raise DimensionCapError(f"{circuit.n_qubits} qubits exceeds the unitary cap of {cap}")
    matrix = np.eye(1 << circuit.n_qubits, dtype=complex)
    for gate in circuit.gates:
        matrix = _apply(gate, matrix)
    return matrix


def equivalent(a: Circuit, b: Circuit) -> Tuple[bool, float]:
    """Whether ``a`` and ``b`` implement the same unitary up to global phase"""
    if a.n_qubits != b.n_qubits:
        raise ValueError("circuits act on different qubit counts")
    ua, ub = unitary_of(a), unitary_of(b)
    k = np.unravel_index(np.argmax(np.abs(ub)), ub.shape)
    if abs(ua[k]) < EQUIVALENCE_TOL:
        return False, float(np.max(np.abs(ua - ub)))
    phase = ua[k] / ub[k]
    phase /= abs(phase)
    residual = float(np.max(np.abs(ua - phase * ub)))
    return residual < EQUIVALENCE_TOL, residual


class EigenResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ground_energy: float
    ground_state: MappedState
    spectrum: Optional[Tuple[float, ...]] = None


def _canonical_ground(vectors: np.ndarray) -> np.ndarray:
    vector = canonical_columns(vectors)[:, 0] if vectors.shape[1] > 1 else vectors[:, 0]
    nonzero = np.flatnonzero(np.abs(vector) > 1e-12)
    if nonzero.size and vector[nonzero[0]] < 0:
        vector = -vector
    return vector / np.linalg.norm(vector)


def eigensolve(h: ReducedHamiltonian, full_spectrum: bool = False) -> EigenResult:
    """Lowest eigenvalue of the reduced Hamiltonian on its M-state support.

    Dense up to the dense cap, Lanczos (lowest algebraic) up to the sparse cap.
    A degenerate ground space is reduced to one vector by the same canonical rule
    the constraint module uses for subspace bases.
    """
    settings = get_settings()
    size = h.dimension
    block = h.to_sparse()[:size, :size]

    if size <= settings.dense_cap:
        values, vectors = scipy.linalg.eigh(block.toarray())
        ground = values[0]
        degenerate = vectors[:, np.abs(values - ground) <= DEGENERACY_TOL]
        spectrum = tuple(float(v) for v in values) if full_spectrum else None
        method = "dense"
    elif size <= settings.sparse_cap and not full_spectrum:
        if size < 3:
            raise DimensionCapError("sparse eigensolver needs at least three states")
        values, vectors = scipy.sparse.linalg.eigsh(block.tocsc(), k=1, which="SA")
        ground = values[0]
        degenerate = vectors
        spectrum = None
        method = "sparse"
    else:
        raise DimensionCapError(
            f"subspace dimension {size} exceeds the "
            f"{'dense' if full_spectrum else 'sparse'} cap"
        )

    alphas = _canonical_ground(np.real_if_close(degenerate).astype(float))
    amplitudes = np.zeros(1 << h.n_qubits, dtype=complex)
    amplitudes[:size] = alphas
    logger.info("eigensolved", method=method, dimension=size, ground_energy=float(ground))
    return EigenResult(
        ground_energy=float(ground),
        ground_state=MappedState(amplitudes=amplitudes, n_qubits=h.n_qubits),
        spectrum=spectrum,
    )


def expectation(h: ReducedHamiltonian, state: Union[StateVector, MappedState, np.ndarray]) -> float:
    """<psi|H_H|psi>"""
    amplitudes = state if isinstance(state, np.ndarray) else state.amplitudes
    if amplitudes.shape != (1 << h.n_qubits,):
        raise ValueError("state and Hamiltonian use different qubit counts")
    return float(np.real(np.vdot(amplitudes, h.to_sparse() @ amplitudes)))
