"""
Variational loop over a mapped Hamiltonian.

A hardware-efficient ansatz (RY and RZ on every qubit, then an entangling CNOT
layer) is scored through the measurement plan and tuned with Nelder-Mead.
"""

from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize

from .circuit import Circuit, Gate, cx, ry, rz, x
from .config import get_settings
from .mapping import ReducedHamiltonian
from .measure import DIAGONAL_TABLE, MeasurementPlan, Topology, build_plan, leaked_probability, measure_energy

logger = structlog.get_logger(__name__)

SIMPLEX_STEP = 0.1


class Entangler(str, Enum):
    CHAIN = "chain"
    FULL = "full"


def parameter_count(n_qubits: int, layers: int) -> int:
    return 2 * n_qubits * layers


class AnsatzSpec(BaseModel):
    """Layered RY/RZ ansatz.

    ``parameters[2 * (layer * Q + q)]`` is the RY angle of qubit ``q`` in that
    layer and the following entry its RZ angle.
    """

    model_config = ConfigDict(frozen=True)

    layers: int = Field(1, ge=1)
    entangler: Entangler = Entangler.CHAIN
    initial_bitstring: str = Field(..., min_length=1, pattern=r"^[01]+$")
    parameters: Tuple[float, ...] = ()

    @model_validator(mode="after")
    def _parameter_count(self) -> "AnsatzSpec":
        expected = parameter_count(self.n_qubits, self.layers)
        if len(self.parameters) != expected:
            raise ValueError(f"ansatz needs {expected} parameters, got {len(self.parameters)}")
        return self

    @property
    def n_qubits(self) -> int:
        return len(self.initial_bitstring)

    @classmethod
    def zeros(cls, initial_bitstring: str, layers: int = 1, entangler: Entangler = Entangler.CHAIN) -> "AnsatzSpec":
        return cls(
            layers=layers,
            entangler=entangler,
            initial_bitstring=initial_bitstring,
            parameters=(0.0,) * parameter_count(len(initial_bitstring), layers),
        )

    def with_parameters(self, parameters: Sequence[float]) -> "AnsatzSpec":
        return self.model_copy(update={"parameters": tuple(float(p) for p in parameters)})


def ansatz_circuit(spec: AnsatzSpec) -> Circuit:
    n = spec.n_qubits
    occupation = int(spec.initial_bitstring, 2)
    gates: List[Gate] = [x(q) for q in range(n) if occupation >> q & 1]
    theta = spec.parameters
    for layer in range(spec.layers):
        for q in range(n):
            base = 2 * (layer * n + q)
            gates.append(ry(q, theta[base]))
            gates.append(rz(q, theta[base + 1]))
        if spec.entangler is Entangler.CHAIN:
            gates.extend(cx(q, q + 1) for q in range(n - 1))
        else:
            gates.extend(cx(a, b) for a in range(n) for b in range(n) if a != b)
    return Circuit(n_qubits=n, gates=tuple(gates))


class Evaluator(BaseModel):
    """Exact probabilities, or ``shots`` samples per circuit from a seeded stream"""

    model_config = ConfigDict(frozen=True)

    shots: Optional[int] = Field(None, ge=1)
    seed: int = Field(default_factory=lambda: get_settings().seed, ge=0)

    @property
    def exact(self) -> bool:
        return self.shots is None


class TraceEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int
    energy: float
    best: float


class VQEResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    parameters: Tuple[float, ...]
    energy: float
    trace: Tuple[TraceEntry, ...]
    evaluations: int
    exhausted: bool
    initial_bitstring: str


class _BudgetExhausted(Exception):
    pass


def default_initial_bitstring(h: ReducedHamiltonian) -> str:
    """Computational image of the basis state with the lowest diagonal energy"""
    diagonal = np.zeros(h.dimension)
    for m, value in h.diagonal():
        diagonal[m] = value
    return format(int(np.argmin(diagonal)), f"0{h.n_qubits}b")


def padding_energy(h: ReducedHamiltonian) -> float:
    """Energy charged per unit probability on padding states (index >= M).

    Gershgorin upper bound of the M x M block, so it is never below the ground
    energy and a state that leaks off the valid subspace cannot score under it.
    """
    radius = np.zeros(h.dimension)
    for m, mp, value in h.entries:
        radius[m] += value if m == mp else abs(value)
    return float(radius.max())


def optimize(
    h: ReducedHamiltonian,
    spec: Optional[AnsatzSpec] = None,
    evaluator: Optional[Evaluator] = None,
    budget: int = 500,
    topology: Topology = Topology.STAR,
    plan: Optional[MeasurementPlan] = None,
) -> VQEResult:
    """Minimise the reconstructed energy over the ansatz parameters.

    Stops after ``budget`` energy evaluations and then reports the best point
    seen with ``exhausted`` set. On a padded register the probability found on
    padding states is charged at ``padding_energy(h)``.
    """
    if budget < 1:
        raise ValueError("budget must be at least one evaluation")
    spec = spec or AnsatzSpec.zeros(default_initial_bitstring(h))
    if spec.n_qubits != h.n_qubits:
        raise ValueError(f"ansatz has {spec.n_qubits} qubits, Hamiltonian has {h.n_qubits}")
    evaluator = evaluator or Evaluator()
    plan = plan or build_plan(h, topology)
    seeds = np.random.default_rng(evaluator.seed)
    padded = h.dimension < 1 << h.n_qubits
    charge = padding_energy(h) if padded else 0.0

    trace: List[TraceEntry] = []
    best = {"energy": np.inf, "theta": np.asarray(spec.parameters, dtype=float)}

    def objective(theta: np.ndarray) -> float:
        if len(trace) >= budget:
            raise _BudgetExhausted()
        seed = None if evaluator.exact else int(seeds.integers(0, 2**63 - 1))
        circuit = ansatz_circuit(spec.with_parameters(theta))
        measured = measure_energy(plan, circuit, shots=evaluator.shots, seed=seed)
        energy = measured.energy
        if padded:
            energy += charge * leaked_probability(plan, measured.tables, h.dimension)[DIAGONAL_TABLE]
        if energy < best["energy"]:
            best["energy"], best["theta"] = energy, np.array(theta, dtype=float)
        trace.append(TraceEntry(iteration=len(trace) + 1, energy=energy, best=best["energy"]))
        return energy

    theta0 = np.asarray(spec.parameters, dtype=float)
    simplex = np.vstack([theta0] + [theta0 + SIMPLEX_STEP * row for row in np.eye(theta0.size)])
    exhausted = False
    try:
        result = minimize(
            objective,
            theta0,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "maxfev": budget, "xatol": 1e-8, "fatol": 1e-10},
        )
        exhausted = not result.success and len(trace) >= budget
    except _BudgetExhausted:
        exhausted = True

    logger.info(
        "vqe_finished",
        energy=best["energy"],
        evaluations=len(trace),
        exhausted=exhausted,
    )
    return VQEResult(
        parameters=tuple(float(t) for t in best["theta"]),
        energy=float(best["energy"]),
        trace=tuple(trace),
        evaluations=len(trace),
        exhausted=exhausted,
        initial_bitstring=spec.initial_bitstring,
    )
