"""
Measurement plans for a reduced Hamiltonian.

Diagonal terms are read off one computational-basis measurement. Each
off-diagonal pair h_mm' (|m><m'| + |m'><m|) is measured after a circuit R that
sends |m> to (|m> + |m'>)/sqrt(2) and |m'> to (|m> - |m'>)/sqrt(2); then

    <psi|(|m><m'| + |m'><m|)|psi> = p_R(m) - p_R(m').

Pairs sharing the active set m XOR m' share the circuit.
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from itertools import groupby
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .circuit import Circuit, Gate, cx, h
from .config import get_settings
from .errors import CouplingError, MissingTableError, ToleranceError
from .mapping import ReducedHamiltonian
from .sim import ProbabilityTable, StateVector, probabilities, run, unitary_of

logger = structlog.get_logger(__name__)

R_PROPERTY_TOL = 1e-9
DIAGONAL_TABLE = "diag"


class Topology(str, Enum):
    STAR = "star"
    CHAIN = "chain"


class CouplingGraph(BaseModel):
    """Undirected hardware connectivity between qubits"""

    model_config = ConfigDict(frozen=True)

    edges: FrozenSet[Tuple[int, int]]

    @model_validator(mode="after")
    def _check(self) -> "CouplingGraph":
        for a, b in self.edges:
            if a == b or a < 0 or b < 0:
                raise ValueError(f"invalid coupling edge ({a}, {b})")
        return self

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int]]) -> "CouplingGraph":
        return cls(edges=frozenset((min(a, b), max(a, b)) for a, b in edges))

    def neighbors(self, q: int) -> List[int]:
        return sorted({b for a, b in self.edges if a == q} | {a for a, b in self.edges if b == q})


class TermPair(BaseModel):
    """Off-diagonal pair with its orientation fixed by the control bit"""

    model_config = ConfigDict(frozen=True)

    m_plain: int = Field(..., ge=0)
    m_primed: int = Field(..., ge=0)
    coefficient: float

    @model_validator(mode="after")
    def _distinct(self) -> "TermPair":
        if self.m_plain == self.m_primed:
            raise ValueError("a term pair needs two different states")
        return self

    @property
    def active_key(self) -> int:
        return self.m_plain ^ self.m_primed


def active_qubits(key: int) -> Tuple[int, ...]:
    return tuple(q for q in range(key.bit_length()) if key >> q & 1)


def group_name(key: int) -> str:
    return f"g{key:x}"


class MeasurementGroup(BaseModel):
    model_config = ConfigDict(frozen=True)

    active_set: Tuple[int, ...] = Field(..., min_length=1)
    control: int
    pairs: Tuple[TermPair, ...] = Field(..., min_length=1)
    circuit: Circuit

    @model_validator(mode="after")
    def _consistent(self) -> "MeasurementGroup":
        if tuple(sorted(set(self.active_set))) != self.active_set:
            raise ValueError("active set must be sorted and unique")
        if self.control not in self.active_set:
            raise ValueError(f"control {self.control} is not an active qubit")
        key = self.key
        for pair in self.pairs:
            if pair.active_key != key:
                raise ValueError(f"pair ({pair.m_plain}, {pair.m_primed}) does not differ on {list(self.active_set)}")
            if pair.m_plain >> self.control & 1 or not pair.m_primed >> self.control & 1:
                raise ValueError(f"pair ({pair.m_plain}, {pair.m_primed}) is not oriented by control {self.control}")
        return self

    @property
    def key(self) -> int:
        return sum(1 << q for q in self.active_set)

    @property
    def name(self) -> str:
        return group_name(self.key)


class MeasurementPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    diagonal_terms: Tuple[Tuple[int, float], ...]
    groups: Tuple[MeasurementGroup, ...]
    n_qubits: int = Field(..., ge=1)
    topology: Topology = Topology.STAR

    @model_validator(mode="after")
    def _consistent(self) -> "MeasurementPlan":
        keys = [g.key for g in self.groups]
        if keys != sorted(set(keys)):
            raise ValueError("groups must have distinct active sets in ascending order")
        limit = 1 << self.n_qubits
        for g in self.groups:
            if g.circuit.n_qubits != self.n_qubits:
                raise ValueError(f"group {g.name} circuit has the wrong width")
            for pair in g.pairs:
                if max(pair.m_plain, pair.m_primed) >= limit:
                    raise ValueError(f"group {g.name} references states beyond {self.n_qubits} qubits")
        return self

    @property
    def n_circuits(self) -> int:
        return 1 + len(self.groups)

    def diagonal_circuit(self) -> Circuit:
        return Circuit(n_qubits=self.n_qubits)

    def circuits(self) -> List[Tuple[str, Circuit]]:
        """Named measurement-basis circuits, diagonal first"""
        return [(DIAGONAL_TABLE, self.diagonal_circuit())] + [(g.name, g.circuit) for g in self.groups]


class CountBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_circuits: int
    max_circuits: int
    max_pauli: int


def choose_control(active: Sequence[int], coupling: Optional[CouplingGraph] = None) -> int:
    """Lowest active qubit, or with coupling the one with most active neighbours"""
    if coupling is None:
        return min(active)
    members = set(active)
    return max(sorted(active), key=lambda q: (len(members.intersection(coupling.neighbors(q))), -q))


def _spanning_edges(
    control: int,
    active: Sequence[int],
    coupling: Optional[CouplingGraph],
) -> List[Tuple[int, int]]:
    """(parent, child) edges of a BFS tree over the active set, in BFS order"""
    others = sorted(q for q in active if q != control)
    if coupling is None:
        chain = [control] + others
        return list(zip(chain, chain[1:]))

    members = set(active)
    seen = {control}
    queue = deque([control])
    edges = []
    while queue:
        parent = queue.popleft()
        for child in coupling.neighbors(parent):
            if child in members and child not in seen:
                seen.add(child)
                edges.append((parent, child))
                queue.append(child)
    if seen != members:
        raise CouplingError(
            f"coupling graph does not connect active qubits {sorted(members - seen)} to control {control}"
        )
    return edges


def r_circuit(
    active: Sequence[int],
    control: int,
    n_qubits: int,
    topology: Topology = Topology.STAR,
    coupling: Optional[CouplingGraph] = None,
) -> Circuit:
    """Hadamard on the control with CNOTs mirrored on either side"""
    if control not in active:
        raise ValueError(f"control {control} is not an active qubit")
    if topology is Topology.STAR:
        targets = sorted(q for q in active if q != control)
        before: List[Gate] = [cx(control, t) for t in targets]
        after = list(reversed(before))
    else:
        edges = _spanning_edges(control, active, coupling)
        before = [cx(p, c) for p, c in reversed(edges)]
        after = [cx(p, c) for p, c in edges]
    return Circuit(n_qubits=n_qubits, gates=tuple(before + [h(control)] + after))


def _orient(m: int, mp: int, value: float, control: int) -> TermPair:
    if m >> control & 1:
        m, mp = mp, m
    return TermPair(m_plain=m, m_primed=mp, coefficient=value)


def build_plan(
    h_reduced: ReducedHamiltonian,
    topology: Topology = Topology.STAR,
    coupling: Optional[CouplingGraph] = None,
) -> MeasurementPlan:
    """Group off-diagonal pairs by active set and attach one R circuit per group"""
    topology = Topology(topology)
    pairs = sorted(h_reduced.off_diagonal(), key=lambda e: (e[0] ^ e[1], e[0], e[1]))
    groups = []
    for key, members in groupby(pairs, key=lambda e: e[0] ^ e[1]):
        active = active_qubits(key)
        control = choose_control(active, coupling)
        oriented = tuple(sorted(
            (_orient(m, mp, v, control) for m, mp, v in members),
            key=lambda p: (p.m_plain, p.m_primed),
        ))
        groups.append(MeasurementGroup(
            active_set=active,
            control=control,
            pairs=oriented,
            circuit=r_circuit(active, control, h_reduced.n_qubits, topology, coupling),
        ))
    plan = MeasurementPlan(
        diagonal_terms=tuple(h_reduced.diagonal()),
        groups=tuple(groups),
        n_qubits=h_reduced.n_qubits,
        topology=topology,
    )
    logger.info("plan_built", groups=len(groups), circuits=plan.n_circuits, topology=topology.value)
    return plan


def verify_r_properties(group: MeasurementGroup) -> float:
    """Max deviation of R|m> from (|m>+|m'>)/sqrt(2) and R|m'> from (|m>-|m'>)/sqrt(2)"""
    unitary = unitary_of(group.circuit)
    scale = 1 / np.sqrt(2)
    worst = 0.0
    for pair in group.pairs:
        plus = np.zeros(unitary.shape[0], dtype=complex)
        plus[pair.m_plain] = scale
        plus[pair.m_primed] = scale
        minus = plus.copy()
        minus[pair.m_primed] = -scale
        worst = max(
            worst,
            float(np.max(np.abs(unitary[:, pair.m_plain] - plus))),
            float(np.max(np.abs(unitary[:, pair.m_primed] - minus))),
        )
    return worst


def _table(tables: Mapping[str, ProbabilityTable], name: str, size: int) -> np.ndarray:
    if name not in tables:
        raise MissingTableError(f"no probability table for circuit {name}")
    probs = tables[name].probs
    if probs.shape != (size,):
        raise MissingTableError(f"table {name} has {probs.size} entries, expected {size}")
    return probs


def reconstruct_expectation(plan: MeasurementPlan, tables: Mapping[str, ProbabilityTable]) -> float:
    """E = sum_m h_mm p(m) + sum over groups and pairs of h_mm' (p_R(m) - p_R(m'))"""
    size = 1 << plan.n_qubits
    diagonal = _table(tables, DIAGONAL_TABLE, size)
    energy = sum(value * diagonal[m] for m, value in plan.diagonal_terms)
    for group in plan.groups:
        probs = _table(tables, group.name, size)
        energy += sum(p.coefficient * (probs[p.m_plain] - probs[p.m_primed]) for p in group.pairs)
    return float(energy)


def leaked_probability(
    plan: MeasurementPlan,
    tables: Mapping[str, ProbabilityTable],
    dimension: int,
) -> Dict[str, float]:
    """Probability each table puts on padding states (index >= M)"""
    size = 1 << plan.n_qubits
    return {
        name: float(_table(tables, name, size)[dimension:].sum())
        for name, _ in plan.circuits()
    }


def count_bounds(plan: MeasurementPlan) -> CountBounds:
    bounds = CountBounds(
        n_circuits=plan.n_circuits,
        max_circuits=1 << plan.n_qubits,
        max_pauli=4 ** plan.n_qubits - 1,
    )
    if bounds.n_circuits > bounds.max_circuits:
        raise ToleranceError(f"{bounds.n_circuits} circuits exceed the bound {bounds.max_circuits}")
    return bounds


class MeasuredEnergy(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    energy: float
    tables: Dict[str, ProbabilityTable]


def measure_energy(
    plan: MeasurementPlan,
    prep: Circuit,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
    initial: Optional[StateVector] = None,
) -> MeasuredEnergy:
    """Simulate prep + each measurement circuit and reconstruct the energy.

    Circuits run concurrently; sampled tables draw from per-circuit child seeds
    so results do not depend on scheduling.
    """
    if prep.n_qubits != plan.n_qubits:
        raise ValueError(f"preparation circuit has {prep.n_qubits} qubits, plan has {plan.n_qubits}")
    named = plan.circuits()
    seed = get_settings().seed if seed is None else seed
    children = np.random.SeedSequence(seed).spawn(len(named))

    def measure(index: int) -> ProbabilityTable:
        state = run(prep.then(named[index][1]), initial)
        child_seed = int(children[index].generate_state(1)[0])
        return probabilities(state, shots=shots, seed=child_seed)

    if len(named) > 1:
        with ThreadPoolExecutor(max_workers=get_settings().workers) as pool:
            results = list(pool.map(measure, range(len(named))))
    else:
        results = [measure(0)]
    tables = {name: table for (name, _), table in zip(named, results)}
    energy = reconstruct_expectation(plan, tables)
    logger.debug("energy_measured", energy=energy, shots=shots, circuits=len(named))
    return MeasuredEnergy(energy=energy, tables=tables)
