#!/usr/bin/env python3
"""
CLI Tool for subspace-mapper
Maps fermionic Hamiltonians onto constraint-reduced qubit registers and builds
the measurement circuits for them
"""

import argparse
import asyncio
import re
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from prometheus_client import CollectorRegistry, Summary, write_to_textfile
from pydantic import BaseModel, Field
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from . import __version__
from .circuit import parse_qasm
from .config import get_settings
from .constraint import (
    ConstraintKind,
    ConstraintSpec,
    intersect_constraints,
    load_constraints,
    sector_qubits,
)
from .errors import DimensionCapError, SubspaceMapperError, ToleranceError, validation_message
from .fermion import FermionOperator, count_pauli_strings, load_fermion_operator
from .formats import (
    REPORT_FILE,
    SUBSPACE_FILE,
    REDUCED_FILE,
    PlanGenerator,
    dissociation_csv,
    fmt,
    load_coupling,
    load_plan,
    load_reduced_hamiltonian,
    probability_csv,
    save_files,
    spectrum_csv,
    trace_csv,
    write_reduced_hamiltonian,
    write_subspace,
)
from .log import configure_logging
from .mapping import ReducedHamiltonian, SubspaceMap, build_map, projector_check, reduce_hamiltonian
from .measure import (
    Topology,
    build_plan,
    count_bounds,
    leaked_probability,
    measure_energy,
    r_circuit,
    verify_r_properties,
)
from .sim import eigensolve, equivalent
from .vqe import AnsatzSpec, Entangler, Evaluator, default_initial_bitstring, optimize

console = Console()
err_console = Console(stderr=True)

VERIFY_TOL = 1e-9


class RunReport(BaseModel):
    """Summary of one mapping run, written as report.json"""

    hamiltonian: str
    constraints: Optional[str] = None
    subspace_dimension: int
    qubits_before: int
    qubits_after: int
    predicted_qubits: Optional[int] = Field(None, description="Binomial sector formula, when it applies")
    pauli_terms_before: int
    reduced_entries: int
    n_circuits: int
    max_circuits: int
    max_pauli: int
    projector_residual: Optional[float] = None
    timings_ms: Dict[str, float] = Field(default_factory=dict)
    energies: Dict[str, float] = Field(default_factory=dict)

    def summary_line(self) -> str:
        return (
            f"Q_before={self.qubits_before} Q_after={self.qubits_after} "
            f"terms={self.pauli_terms_before} circuits={self.n_circuits}"
        )


class StageTimer:
    """Wall-clock time per pipeline stage, exportable as Prometheus text"""

    def __init__(self):
        self.timings: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(1000 * (time.perf_counter() - start), 3)

    def export(self, path: str) -> None:
        registry = CollectorRegistry()
        summary = Summary(
            "subspace_mapper_stage_seconds",
            "Wall time of a pipeline stage",
            ["stage"],
            registry=registry,
        )
        for name, ms in self.timings.items():
            summary.labels(stage=name).observe(ms / 1000)
        write_to_textfile(path, registry)


def _is_reduced_file(path: str) -> bool:
    with open(path, "r", encoding="utf-8") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if line:
                return line.startswith("qubits")
    return False


def _predicted_qubits(specs: List[ConstraintSpec], n_orbitals: int) -> Optional[int]:
    counts = {}
    for spec in specs:
        if spec.kind in (ConstraintKind.NUMBER_UP, ConstraintKind.NUMBER_DOWN) and len(spec.allowed) == 1:
            counts[spec.kind] = int(spec.allowed[0])
    if len(counts) != 2 or n_orbitals % 2:
        return None
    return sector_qubits(n_orbitals, counts[ConstraintKind.NUMBER_UP], counts[ConstraintKind.NUMBER_DOWN])


def _map_pipeline(
    hamiltonian: str,
    constraints: Optional[str],
    orbitals: Optional[int],
    timer: StageTimer,
) -> Tuple[FermionOperator, List[ConstraintSpec], SubspaceMap, ReducedHamiltonian]:
    with timer.stage("parse"):
        op = load_fermion_operator(hamiltonian, n_orbitals=orbitals)
        specs = load_constraints(constraints) if constraints else []
    with timer.stage("subspace"):
        basis = intersect_constraints(specs, op.n_orbitals)
    with timer.stage("reduce"):
        subspace_map = build_map(basis)
        reduced = reduce_hamiltonian(op, subspace_map)
    return op, specs, subspace_map, reduced


def _load_reduced(args, timer: StageTimer) -> ReducedHamiltonian:
    if _is_reduced_file(args.input):
        with timer.stage("parse"):
            return load_reduced_hamiltonian(args.input)
    return _map_pipeline(args.input, args.constraints, getattr(args, "orbitals", None), timer)[3]


async def cmd_map(args, timer: StageTimer):
    """Build the valid subspace and the reduced Hamiltonian"""
    op, specs, subspace_map, reduced = _map_pipeline(args.hamiltonian, args.constraints, args.orbitals, timer)

    with timer.stage("plan"):
        plan = build_plan(reduced, Topology(args.topology))
        bounds = count_bounds(plan)
    with timer.stage("pauli_count"):
        pauli_terms = count_pauli_strings(op)

    residual = None
    with timer.stage("projector_check"):
        try:
            residual = projector_check(subspace_map)
        except DimensionCapError as e:
            err_console.print(f"[yellow]⚠️  projector check skipped: {escape(str(e))}")
    if residual is not None and residual > 1e-10:
        raise ToleranceError(f"D^dagger D differs from the subspace projector by {residual:.3g}")

    energies = {}
    with timer.stage("eigensolve"):
        try:
            energies["ground"] = eigensolve(reduced).ground_energy
        except DimensionCapError as e:
            err_console.print(f"[yellow]⚠️  ground energy skipped: {escape(str(e))}")

    report = RunReport(
        hamiltonian=args.hamiltonian,
        constraints=args.constraints,
        subspace_dimension=subspace_map.dimension,
        qubits_before=op.n_orbitals,
        qubits_after=subspace_map.n_qubits,
        predicted_qubits=_predicted_qubits(specs, op.n_orbitals),
        pauli_terms_before=pauli_terms,
        reduced_entries=len(reduced.entries),
        n_circuits=bounds.n_circuits,
        max_circuits=bounds.max_circuits,
        max_pauli=bounds.max_pauli,
        projector_residual=residual,
        timings_ms=dict(timer.timings),
        energies=energies,
    )
    files = {
        SUBSPACE_FILE: write_subspace(subspace_map),
        REDUCED_FILE: write_reduced_hamiltonian(reduced),
        REPORT_FILE: report.model_dump_json(indent=2) + "\n",
    }
    saved = save_files(files, args.out)

    console.print(report.summary_line(), soft_wrap=True, highlight=False)
    console.print(f"[green]✅ Files saved to: {args.out}")
    for file_path in saved:
        console.print(f"  📄 {file_path}", highlight=False)
    return 0


async def cmd_group(args, timer: StageTimer):
    """Partition a reduced Hamiltonian into measurement circuits"""
    with timer.stage("parse"):
        reduced = load_reduced_hamiltonian(args.reduced)
        coupling = load_coupling(args.coupling) if args.coupling else None
    with timer.stage("plan"):
        plan = build_plan(reduced, Topology(args.topology), coupling)
        bounds = count_bounds(plan)
    files = PlanGenerator.generate_files(plan, reduced)
    save_files(files, args.out)

    table = Table(title="Measurement circuits")
    table.add_column("Circuit", style="cyan", no_wrap=True)
    table.add_column("Active qubits", style="green")
    table.add_column("Control")
    table.add_column("Pairs", justify="right")
    table.add_row("diag", "-", "-", str(len(plan.diagonal_terms)))
    for group in plan.groups:
        table.add_row(group.name, ",".join(map(str, group.active_set)), str(group.control), str(len(group.pairs)))
    console.print(table)
    console.print(
        f"circuits={bounds.n_circuits} max_circuits={bounds.max_circuits} max_pauli={bounds.max_pauli}",
        soft_wrap=True,
        highlight=False,
    )
    console.print("[blue]Circuit count includes the diagonal circuit")
    return 0


async def cmd_measure(args, timer: StageTimer):
    """Estimate the energy of a prepared state from the plan's circuits"""
    with timer.stage("parse"):
        plan, reduced = load_plan(args.plan)
        prep = parse_qasm(Path(args.prep).read_text(encoding="utf-8"))
    seed = args.seed if args.seed is not None else get_settings().seed
    with timer.stage("measure"):
        measured = await asyncio.to_thread(measure_energy, plan, prep, args.shots, seed)
    leaked = leaked_probability(plan, measured.tables, reduced.dimension)

    if args.out:
        save_files({f"probs_{name}.csv": probability_csv(t) for name, t in measured.tables.items()}, args.out)
    console.print(f"energy={fmt(measured.energy)}", soft_wrap=True, highlight=False)
    mode = "exact" if args.shots is None else f"shots={args.shots} seed={seed}"
    console.print(f"[blue]mode: {mode}")
    for name, value in leaked.items():
        if value > 0:
            console.print(f"[yellow]⚠️  {name}: probability {fmt(value)} on unused states")
    return 0


def _distance(path: Path) -> float:
    numbers = re.findall(r"\d+(?:\.\d+)?", path.stem)
    if not numbers:
        raise SubspaceMapperError(f"no distance in file name {path.name}")
    return float(numbers[-1])


async def cmd_eig(args, timer: StageTimer):
    """Ground energy (and optionally the spectrum) by classical diagonalisation"""
    if args.batch:
        paths = sorted(Path(args.batch).glob("*.ham"))
        if not paths:
            raise SubspaceMapperError(f"no .ham files in {args.batch}")
        limit = asyncio.Semaphore(get_settings().workers)

        async def solve(path: Path) -> Tuple[float, float]:
            async with limit:
                reduced = await asyncio.to_thread(
                    lambda: _map_pipeline(str(path), args.constraints, None, StageTimer())[3]
                )
                result = await asyncio.to_thread(eigensolve, reduced)
            return _distance(path), result.ground_energy

        with timer.stage("batch"):
            rows = await asyncio.gather(*(solve(p) for p in paths))
        text = dissociation_csv(sorted(rows))
        if args.out:
            save_files({"dissociation.csv": text}, args.out)
        console.print(text, end="", soft_wrap=True, highlight=False)
        return 0

    if not args.input:
        raise SubspaceMapperError("eig needs an input file or --batch")
    reduced = _load_reduced(args, timer)
    with timer.stage("eigensolve"):
        result = eigensolve(reduced, full_spectrum=args.spectrum)
    console.print(f"ground_energy={fmt(result.ground_energy)}", soft_wrap=True, highlight=False)
    if result.spectrum is not None:
        text = spectrum_csv(result.spectrum)
        if args.out:
            save_files({"spectrum.csv": text}, args.out)
        else:
            console.print(text, end="", soft_wrap=True, highlight=False)
    return 0


async def cmd_vqe(args, timer: StageTimer):
    """Variational search for the ground state through the measurement plan"""
    reduced = _load_reduced(args, timer)
    initial = args.initial or default_initial_bitstring(reduced)
    spec = AnsatzSpec.zeros(initial, layers=args.layers, entangler=Entangler(args.entangler))
    seed = args.seed if args.seed is not None else get_settings().seed
    evaluator = Evaluator(shots=args.shots, seed=seed)
    with timer.stage("vqe"):
        result = await asyncio.to_thread(
            optimize, reduced, spec, evaluator, args.budget, Topology(args.topology)
        )

    if args.out:
        save_files({"trace.csv": trace_csv(result.trace)}, args.out)
    console.print(f"energy={fmt(result.energy)}", soft_wrap=True, highlight=False)
    console.print(f"evaluations={result.evaluations} exhausted={str(result.exhausted).lower()}", highlight=False)
    console.print("theta=" + ",".join(fmt(t) for t in result.parameters), soft_wrap=True, highlight=False)
    return 0


async def cmd_pauli_count(args, timer: StageTimer):
    """Naive Pauli-string count, one circuit per string"""
    if _is_reduced_file(args.input):
        reduced = load_reduced_hamiltonian(args.input)
        bounds = count_bounds(build_plan(reduced))
        console.print(f"qubits={reduced.n_qubits} max_pauli={bounds.max_pauli}", highlight=False)
        return 0
    with timer.stage("pauli_count"):
        op = load_fermion_operator(args.input)
        count = count_pauli_strings(op)
    console.print(f"pauli_strings={count}", highlight=False)
    return 0


async def cmd_verify_circuits(args, timer: StageTimer):
    """Check every group circuit against the rotation it must perform"""
    with timer.stage("parse"):
        plan, _ = load_plan(args.plan)

    def check(group) -> Tuple[float, float]:
        other = Topology.CHAIN if plan.topology is Topology.STAR else Topology.STAR
        alternative = r_circuit(group.active_set, group.control, plan.n_qubits, other)
        return verify_r_properties(group), equivalent(group.circuit, alternative)[1]

    with timer.stage("verify"):
        results = await asyncio.gather(*(asyncio.to_thread(check, g) for g in plan.groups))

    table = Table(title="Circuit verification")
    table.add_column("Circuit", style="cyan", no_wrap=True)
    table.add_column("R residual", justify="right")
    table.add_column("Topology residual", justify="right")
    worst = 0.0
    for group, (r_residual, eq_residual) in zip(plan.groups, results):
        table.add_row(group.name, f"{r_residual:.3g}", f"{eq_residual:.3g}")
        worst = max(worst, r_residual, eq_residual)
    console.print(table)
    if worst > VERIFY_TOL:
        raise ToleranceError(f"circuit verification failed: residual {worst:.3g}")
    console.print(f"[green]✅ {len(plan.groups)} group circuit(s) verified")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subspace-mapper",
        description="Constraint-reduced qubit mapping for fermionic Hamiltonians",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  subspace-mapper map fixtures/h2_sto3g_0.75.ham fixtures/h2_sector_1_1.constraints --out out/
  subspace-mapper group out/reduced.ham --topology chain --out plan/
  subspace-mapper measure plan/ fixtures/h2_mapped_prep.qasm --shots 100000 --seed 7
  subspace-mapper eig --batch curves/ --constraints fixtures/h2_sector_1_1.constraints
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Override SUBSPACE_MAPPER_LOG_LEVEL")
    parser.add_argument("--metrics", help="Write stage timings in Prometheus text format to this file")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    map_parser = subparsers.add_parser("map", help="Map a Hamiltonian onto the constrained subspace")
    map_parser.add_argument("hamiltonian", help="Fermionic Hamiltonian file")
    map_parser.add_argument("constraints", nargs="?", help="Constraint file")
    map_parser.add_argument("--orbitals", type=int, help="Spin-orbital count if larger than referenced")
    map_parser.add_argument("--topology", choices=[t.value for t in Topology], default="star")
    map_parser.add_argument("--out", "-o", required=True, help="Output directory")
    map_parser.set_defaults(func=cmd_map)

    group_parser = subparsers.add_parser("group", help="Build measurement circuits for a reduced Hamiltonian")
    group_parser.add_argument("reduced", help="Reduced Hamiltonian file")
    group_parser.add_argument("--topology", choices=[t.value for t in Topology], default="star")
    group_parser.add_argument("--coupling", help="Coupling edge list, one 'q1 q2' per line")
    group_parser.add_argument("--out", "-o", required=True, help="Plan directory")
    group_parser.set_defaults(func=cmd_group)

    measure_parser = subparsers.add_parser("measure", help="Measure a prepared state's energy")
    measure_parser.add_argument("plan", help="Plan directory written by 'group'")
    measure_parser.add_argument("prep", help="State-preparation circuit (OpenQASM 2.0)")
    measure_parser.add_argument("--shots", type=int, help="Sample this many shots per circuit (default: exact)")
    measure_parser.add_argument("--seed", type=int, help="Sampling seed")
    measure_parser.add_argument("--out", "-o", help="Directory for per-circuit probability CSVs")
    measure_parser.set_defaults(func=cmd_measure)

    eig_parser = subparsers.add_parser("eig", help="Classical ground energy")
    eig_parser.add_argument("input", nargs="?", help="Reduced or fermionic Hamiltonian file")
    eig_parser.add_argument("--constraints", help="Constraint file for fermionic input")
    eig_parser.add_argument("--batch", help="Directory of .ham files; emits distance,energy CSV")
    eig_parser.add_argument("--spectrum", action="store_true", help="Also compute the full spectrum")
    eig_parser.add_argument("--out", "-o", help="Output directory")
    eig_parser.set_defaults(func=cmd_eig)

    vqe_parser = subparsers.add_parser("vqe", help="Variational ground-state search")
    vqe_parser.add_argument("input", help="Reduced or fermionic Hamiltonian file")
    vqe_parser.add_argument("--constraints", help="Constraint file for fermionic input")
    vqe_parser.add_argument("--layers", type=int, default=1)
    vqe_parser.add_argument("--entangler", choices=[e.value for e in Entangler], default="chain")
    vqe_parser.add_argument("--initial", help="Initial bitstring (default: lowest diagonal entry)")
    vqe_parser.add_argument("--budget", type=int, default=500, help="Maximum energy evaluations")
    vqe_parser.add_argument("--topology", choices=[t.value for t in Topology], default="star")
    vqe_parser.add_argument("--shots", type=int, help="Shots per circuit (default: exact)")
    vqe_parser.add_argument("--seed", type=int, help="Sampling seed")
    vqe_parser.add_argument("--out", "-o", help="Directory for trace.csv")
    vqe_parser.set_defaults(func=cmd_vqe)

    pauli_parser = subparsers.add_parser("pauli-count", help="Jordan-Wigner string count or 4^Q-1 bound")
    pauli_parser.add_argument("input", help="Fermionic or reduced Hamiltonian file")
    pauli_parser.set_defaults(func=cmd_pauli_count)

    verify_parser = subparsers.add_parser("verify-circuits", help="Verify the circuits of a plan directory")
    verify_parser.add_argument("plan", help="Plan directory written by 'group'")
    verify_parser.set_defaults(func=cmd_verify_circuits)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    timer = StageTimer()
    try:
        settings = get_settings()
        configure_logging(args.log_level or settings.log_level, settings.log_config)
        code = asyncio.run(args.func(args, timer))
    except SubspaceMapperError as e:
        err_console.print(f"[red]❌ {escape(str(e))}")
        return e.exit_code
    except ValueError as e:
        err_console.print(f"[red]❌ {escape(validation_message(e))}")
        return 2
    except OSError as e:
        err_console.print(f"[red]❌ {escape(str(e))}")
        return 2
    except KeyboardInterrupt:
        err_console.print("\n[yellow]⚠️  Operation cancelled")
        return 1
    except Exception as e:
        err_console.print(f"[red]❌ Unexpected error: {escape(str(e))}")
        return 1

    if args.metrics:
        timer.export(args.metrics)
    return code


if __name__ == "__main__":
    sys.exit(main())
