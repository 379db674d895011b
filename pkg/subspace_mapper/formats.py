"""
Text formats written and read by the command-line tool.

Every float is printed with 12 significant digits so repeated runs produce
byte-identical files.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import structlog

from .circuit import parse_qasm, to_qasm
from .constraint import SubspaceBasis
from .errors import ParseError, validation_message
from .mapping import ReducedHamiltonian, SubspaceMap
from .measure import (
    DIAGONAL_TABLE,
    CouplingGraph,
    MeasurementGroup,
    MeasurementPlan,
    TermPair,
    Topology,
    active_qubits,
)
from .sim import ProbabilityTable
from .vqe import TraceEntry

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

REDUCED_FILE = "reduced.ham"
SUBSPACE_FILE = "subspace.txt"
MANIFEST_FILE = "plan.manifest"
REPORT_FILE = "report.json"


def fmt(value: float) -> str:
    return format(value, ".12g")


def _lines(text: str) -> Iterable[Tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def _int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"invalid integer {token!r}", lineno) from None


def _float(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"invalid number {token!r}", lineno) from None


# reduced Hamiltonian: "qubits <Q> dim <M>" then "<m> <m'> <value>" with m <= m'


def write_reduced_hamiltonian(h: ReducedHamiltonian) -> str:
    lines = [f"qubits {h.n_qubits} dim {h.dimension}"]
    lines.extend(f"{m} {mp} {fmt(v)}" for m, mp, v in h.entries if m <= mp)
    return "\n".join(lines) + "\n"


def parse_reduced_hamiltonian(text: str) -> ReducedHamiltonian:
    header: Optional[Tuple[int, int]] = None
    values: Dict[Tuple[int, int], float] = {}
    for lineno, line in _lines(text):
        tokens = line.split()
        if header is None:
            if len(tokens) != 4 or tokens[0] != "qubits" or tokens[2] != "dim":
                raise ParseError("expected header 'qubits <Q> dim <M>'", lineno)
            header = (_int(tokens[1], lineno), _int(tokens[3], lineno))
            continue
        if len(tokens) != 3:
            raise ParseError(f"expected '<m> <m'> <value>', got {line!r}", lineno)
        m, mp, value = _int(tokens[0], lineno), _int(tokens[1], lineno), _float(tokens[2], lineno)
        if m > mp:
            raise ParseError(f"entry ({m}, {mp}) must have m <= m'", lineno)
        if (m, mp) in values:
            raise ParseError(f"duplicate entry ({m}, {mp})", lineno)
        values[(m, mp)] = value
    if header is None:
        raise ParseError("empty reduced Hamiltonian file")

    entries = []
    for (m, mp), value in values.items():
        entries.append((m, mp, value))
        if m != mp:
            entries.append((mp, m, value))
    entries.sort(key=lambda e: (e[0], e[1]))
    try:
        return ReducedHamiltonian(entries=tuple(entries), n_qubits=header[0], dimension=header[1])
    except ValueError as e:
        raise ParseError(validation_message(e)) from None


def load_reduced_hamiltonian(path: PathLike) -> ReducedHamiltonian:
    return parse_reduced_hamiltonian(Path(path).read_text(encoding="utf-8"))


# subspace: "<m_*> : <amp> <fock> [; <amp> <fock> ...]"


def write_subspace(subspace_map: SubspaceMap) -> str:
    basis = subspace_map.basis
    lines = [f"# orbitals {basis.n_orbitals} qubits {subspace_map.n_qubits}"]
    for m, vector in enumerate(basis.vectors):
        terms = " ; ".join(f"{fmt(amplitude)} {fock}" for fock, amplitude in vector)
        lines.append(f"{subspace_map.assignment(m)} : {terms}")
    return "\n".join(lines) + "\n"


def parse_subspace(text: str, n_orbitals: Optional[int] = None) -> SubspaceBasis:
    """Basis vectors in file order; the orbital count comes from the header comment when not given"""
    vectors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            tokens = line[1:].split()
            if n_orbitals is None and len(tokens) >= 2 and tokens[0] == "orbitals":
                n_orbitals = _int(tokens[1], lineno)
            continue
        if not line:
            continue
        index, sep, body = line.partition(":")
        if not sep:
            raise ParseError("expected '<m> : <amp> <fock> ...'", lineno)
        if _int(index.strip(), lineno) != len(vectors):
            raise ParseError(f"basis index {index.strip()} out of order", lineno)
        vector = []
        for chunk in body.split(";"):
            parts = chunk.split()
            if len(parts) != 2:
                raise ParseError(f"expected '<amp> <fock>', got {chunk.strip()!r}", lineno)
            vector.append((_int(parts[1], lineno), _float(parts[0], lineno)))
        vectors.append(tuple(vector))
    if n_orbitals is None:
        n_orbitals = max((fock.bit_length() for v in vectors for fock, _ in v), default=0)
    try:
        return SubspaceBasis(vectors=tuple(vectors), n_orbitals=n_orbitals)
    except ValueError as e:
        raise ParseError(validation_message(e)) from None


# CSV outputs


def probability_csv(table: ProbabilityTable) -> str:
    width = table.n_qubits
    sampled = table.counts is not None
    lines = ["bitstring,probability,counts" if sampled else "bitstring,probability"]
    for index, p in enumerate(table.probs):
        row = f"{format(index, f'0{width}b')},{fmt(float(p))}"
        if sampled:
            row += f",{int(table.counts[index])}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def spectrum_csv(values: Sequence[float]) -> str:
    return "index,eigenvalue\n" + "".join(f"{i},{fmt(v)}\n" for i, v in enumerate(values))


def trace_csv(trace: Sequence[TraceEntry]) -> str:
    return "iter,energy\n" + "".join(f"{t.iteration},{fmt(t.energy)}\n" for t in trace)


def dissociation_csv(rows: Sequence[Tuple[float, float]]) -> str:
    return "distance,energy\n" + "".join(f"{fmt(d)},{fmt(e)}\n" for d, e in rows)


# coupling graph: one "q1 q2" edge per line


def parse_coupling(text: str) -> CouplingGraph:
    edges = []
    for lineno, line in _lines(text):
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"expected 'q1 q2', got {line!r}", lineno)
        a, b = _int(tokens[0], lineno), _int(tokens[1], lineno)
        if a == b or a < 0 or b < 0:
            raise ParseError(f"invalid coupling edge {line!r}", lineno)
        edges.append((a, b))
    return CouplingGraph.from_edges(edges)


def load_coupling(path: PathLike) -> CouplingGraph:
    return parse_coupling(Path(path).read_text(encoding="utf-8"))


# measurement plan directory


def qasm_filename(name: str) -> str:
    return f"circ_{name}.qasm"


def write_manifest(plan: MeasurementPlan, dimension: int) -> str:
    lines = [
        f"topology {plan.topology.value} qubits {plan.n_qubits} dim {dimension} circuits {plan.n_circuits}",
        f"diag terms={len(plan.diagonal_terms)}",
    ]
    for group in plan.groups:
        pairs = ",".join(f"{p.m_plain}:{p.m_primed}" for p in group.pairs)
        lines.append(f"group {group.key:x} control={group.control} pairs={pairs}")
    return "\n".join(lines) + "\n"


class PlanGenerator:
    """Renders a measurement plan into the files of a plan directory"""

    @staticmethod
    def generate_files(plan: MeasurementPlan, h: ReducedHamiltonian) -> Dict[str, str]:
        files = {
            MANIFEST_FILE: write_manifest(plan, h.dimension),
            REDUCED_FILE: write_reduced_hamiltonian(h),
        }
        for name, circuit in plan.circuits():
            files[qasm_filename(name)] = to_qasm(circuit)
        return files


def save_files(files: Dict[str, str], output_dir: PathLike) -> List[str]:
    """Write ``files`` under ``output_dir`` in name order"""
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)
    saved = []
    for filename in sorted(files):
        file_path = output_path / filename
        file_path.write_text(files[filename], encoding="utf-8")
        saved.append(str(file_path))
    logger.debug("files_saved", directory=str(output_path), count=len(saved))
    return saved


def _manifest_field(token: str, key: str, lineno: int) -> str:
    name, sep, value = token.partition("=")
    if name != key or not sep:
        raise ParseError(f"expected {key}=..., got {token!r}", lineno)
    return value


def load_plan(directory: PathLike) -> Tuple[MeasurementPlan, ReducedHamiltonian]:
    """Rebuild a plan from its manifest, reduced Hamiltonian and circuit files"""
    directory = Path(directory)
    for required in (MANIFEST_FILE, REDUCED_FILE):
        if not (directory / required).is_file():
            raise ParseError(f"{directory / required} not found")
    h = load_reduced_hamiltonian(directory / REDUCED_FILE)
    coefficients = {(m, mp): v for m, mp, v in h.entries}

    topology = Topology.STAR
    groups: List[MeasurementGroup] = []
    seen_pairs = set()
    header_seen = False
    for lineno, line in _lines((directory / MANIFEST_FILE).read_text(encoding="utf-8")):
        tokens = line.split()
        if tokens[0] == "topology":
            if len(tokens) < 6 or tokens[2] != "qubits" or tokens[4] != "dim":
                raise ParseError("expected 'topology <t> qubits <Q> dim <M> ...'", lineno)
            try:
                topology = Topology(tokens[1])
            except ValueError:
                raise ParseError(f"unknown topology {tokens[1]!r}", lineno) from None
            if (_int(tokens[3], lineno), _int(tokens[5], lineno)) != (h.n_qubits, h.dimension):
                raise ParseError("manifest does not match the reduced Hamiltonian", lineno)
            header_seen = True
        elif tokens[0] == "diag":
            continue
        elif tokens[0] == "group":
            if len(tokens) != 4:
                raise ParseError("expected 'group <hex> control=<q> pairs=<m:m',...>'", lineno)
            try:
                key = int(tokens[1], 16)
            except ValueError:
                raise ParseError(f"invalid active-set key {tokens[1]!r}", lineno) from None
            control = _int(_manifest_field(tokens[2], "control", lineno), lineno)
            pairs = []
            for item in _manifest_field(tokens[3], "pairs", lineno).split(","):
                plain, sep, primed = item.partition(":")
                if not sep:
                    raise ParseError(f"invalid pair {item!r}", lineno)
                m, mp = _int(plain, lineno), _int(primed, lineno)
                if (m, mp) not in coefficients:
                    raise ParseError(f"pair ({m}, {mp}) has no Hamiltonian entry", lineno)
                seen_pairs.add((min(m, mp), max(m, mp)))
                pairs.append(TermPair(m_plain=m, m_primed=mp, coefficient=coefficients[(m, mp)]))
            circuit_path = directory / qasm_filename(f"g{key:x}")
            if not circuit_path.is_file():
                raise ParseError(f"{circuit_path} not found", lineno)
            try:
                groups.append(MeasurementGroup(
                    active_set=active_qubits(key),
                    control=control,
                    pairs=tuple(pairs),
                    circuit=parse_qasm(circuit_path.read_text(encoding="utf-8")),
                ))
            except ValueError as e:
                raise ParseError(validation_message(e), lineno) from None
        else:
            raise ParseError(f"unknown manifest line {line!r}", lineno)

    if not header_seen:
        raise ParseError("manifest has no topology header")
    expected = {(m, mp) for m, mp, _ in h.off_diagonal()}
    if seen_pairs != expected:
        raise ParseError(f"manifest covers {len(seen_pairs)} of {len(expected)} off-diagonal pairs")
    if not (directory / qasm_filename(DIAGONAL_TABLE)).is_file():
        raise ParseError(f"{directory / qasm_filename(DIAGONAL_TABLE)} not found")

    try:
        plan = MeasurementPlan(
            diagonal_terms=tuple(h.diagonal()),
            groups=tuple(sorted(groups, key=lambda g: g.key)),
            n_qubits=h.n_qubits,
            topology=topology,
        )
    except ValueError as e:
        raise ParseError(validation_message(e)) from None
    logger.info("plan_loaded", directory=str(directory), circuits=plan.n_circuits)
    return plan, h
