# tests/test_cli.py
import json
import re
import shutil

import pytest

from subspace_mapper import __version__
from subspace_mapper.cli import main
from subspace_mapper.log import configure_logging
from tests.fixtures.h2_reference import ENERGY_TOL, WORKED_EXAMPLE_ENERGY

HAMILTONIAN = "h2_sto3g_0.75.ham"
SECTOR = "h2_sector_1_1.constraints"


@pytest.fixture(autouse=True)
def restore_logging():
    """main() binds log handlers to the captured stderr; rebind once capture ends"""
    yield
    configure_logging("WARNING")


def invoke(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def value(text: str, key: str) -> float:
    match = re.search(rf"{key}=(\S+)", text)
    assert match, text
    return float(match.group(1))


@pytest.fixture
def mapped(tmp_path, fixtures_dir, capsys):
    out = tmp_path / "out"
    code, _, _ = invoke(capsys, "map", fixtures_dir / HAMILTONIAN, fixtures_dir / SECTOR, "--out", out)
    assert code == 0
    return out


@pytest.fixture
def plan_dir(tmp_path, mapped, capsys):
    plan = tmp_path / "plan"
    code, _, _ = invoke(capsys, "group", mapped / "reduced.ham", "--out", plan)
    assert code == 0
    return plan


class TestMap:
    def test_summary_line(self, tmp_path, fixtures_dir, capsys):
        code, out, _ = invoke(capsys, "map", fixtures_dir / HAMILTONIAN, fixtures_dir / SECTOR, "--out", tmp_path)
        assert code == 0
        assert "Q_before=4 Q_after=2 terms=14 circuits=2" in out

    def test_output_files(self, mapped):
        assert sorted(p.name for p in mapped.iterdir()) == ["reduced.ham", "report.json", "subspace.txt"]
        report = json.loads((mapped / "report.json").read_text())
        assert report["subspace_dimension"] == 4
        assert report["predicted_qubits"] == 2
        assert report["max_circuits"] == 4
        assert report["projector_residual"] < 1e-10
        assert report["energies"]["ground"] == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=ENERGY_TOL)
        assert set(report["timings_ms"]) >= {"parse", "subspace", "reduce", "plan"}

    def test_sugar_constraints_give_same_map(self, tmp_path, fixtures_dir, mapped, capsys):
        out = tmp_path / "sugar"
        invoke(capsys, "map", fixtures_dir / HAMILTONIAN, fixtures_dir / "h2_neutral_singlet.constraints", "--out", out)
        assert (out / "reduced.ham").read_text() == (mapped / "reduced.ham").read_text()

    def test_repeat_runs_are_byte_identical(self, tmp_path, fixtures_dir, mapped, capsys):
        again = tmp_path / "again"
        invoke(capsys, "map", fixtures_dir / HAMILTONIAN, fixtures_dir / SECTOR, "--out", again)
        for name in ("reduced.ham", "subspace.txt"):
            assert (again / name).read_bytes() == (mapped / name).read_bytes()

    def test_without_constraints(self, tmp_path, fixtures_dir, capsys):
        code, out, _ = invoke(capsys, "map", fixtures_dir / HAMILTONIAN, "--out", tmp_path)
        assert code == 0
        assert "Q_before=4 Q_after=4 terms=14 circuits=2" in out

    def test_singlet_subspace(self, tmp_path, fixtures_dir, capsys):
        code, out, _ = invoke(capsys, "map", fixtures_dir / HAMILTONIAN, fixtures_dir / "h2_singlet.constraints", "--out", tmp_path)
        assert code == 0
        assert "Q_after=2" in out
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["subspace_dimension"] == 3
        assert report["predicted_qubits"] is None

    def test_enlarged_fock_space(self, tmp_path, fixtures_dir, capsys):
        code, out, _ = invoke(
            capsys, "map", fixtures_dir / HAMILTONIAN, fixtures_dir / SECTOR, "--orbitals", 6, "--out", tmp_path
        )
        assert code == 0
        assert "Q_before=6 Q_after=4" in out

    def test_infeasible_constraints(self, tmp_path, fixtures_dir, capsys):
        constraints = tmp_path / "bad.constraints"
        constraints.write_text("number_up allowed=2\ntotal_number allowed=1\n")
        code, _, err = invoke(capsys, "map", fixtures_dir / HAMILTONIAN, constraints, "--out", tmp_path / "out")
        assert code == 3
        assert "empty valid subspace" in err
        assert not (tmp_path / "out").exists()

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.ham"
        bad.write_text("0.5 [0^ 0\n")
        code, _, err = invoke(capsys, "map", bad, "--out", tmp_path / "out")
        assert code == 2
        assert "line 1" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, _ = invoke(capsys, "map", tmp_path / "missing.ham", "--out", tmp_path / "out")
        assert code == 2


class TestGroupAndMeasure:
    def test_group(self, tmp_path, mapped, capsys):
        code, out, _ = invoke(capsys, "group", mapped / "reduced.ham", "--out", tmp_path / "plan")
        assert code == 0
        assert "circuits=2 max_circuits=4 max_pauli=15" in out
        assert sorted(p.name for p in (tmp_path / "plan").iterdir()) == [
            "circ_diag.qasm", "circ_g3.qasm", "plan.manifest", "reduced.ham",
        ]

    def test_group_with_coupling(self, tmp_path, mapped, fixtures_dir, capsys):
        code, _, _ = invoke(
            capsys, "group", mapped / "reduced.ham", "--topology", "chain",
            "--coupling", fixtures_dir / "line_coupling.txt", "--out", tmp_path / "plan",
        )
        assert code == 0
        assert "topology chain" in (tmp_path / "plan" / "plan.manifest").read_text()

    def test_exact_energy(self, plan_dir, fixtures_dir, capsys):
        code, out, _ = invoke(capsys, "measure", plan_dir, fixtures_dir / "h2_mapped_prep.qasm")
        assert code == 0
        assert value(out, "energy") == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=ENERGY_TOL)
        assert "mode: exact" in out

    def test_sampled_energy_and_tables(self, tmp_path, plan_dir, fixtures_dir, capsys):
        argv = ["measure", plan_dir, fixtures_dir / "h2_mapped_prep.qasm", "--shots", 50000, "--seed", 7]
        code, out, _ = invoke(capsys, *argv, "--out", tmp_path / "probs")
        assert code == 0
        assert value(out, "energy") == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=0.01)
        assert sorted(p.name for p in (tmp_path / "probs").iterdir()) == ["probs_diag.csv", "probs_g3.csv"]
        assert (tmp_path / "probs" / "probs_diag.csv").read_text().startswith("bitstring,probability,counts\n")
        _, again, _ = invoke(capsys, *argv)
        assert value(again, "energy") == value(out, "energy")

    def test_prep_width_mismatch(self, plan_dir, fixtures_dir, capsys):
        code, _, err = invoke(capsys, "measure", plan_dir, fixtures_dir / "h2_ground_prep.qasm")
        assert code == 2
        assert "preparation circuit" in err

    def test_verify_circuits(self, plan_dir, capsys):
        code, out, _ = invoke(capsys, "verify-circuits", plan_dir)
        assert code == 0
        assert "1 group circuit(s) verified" in out

    def test_verify_rejects_wrong_circuit(self, plan_dir, capsys):
        (plan_dir / "circ_g3.qasm").write_text("OPENQASM 2.0;\nqreg q[2];\nh q[0];\n")
        code, _, err = invoke(capsys, "verify-circuits", plan_dir)
        assert code == 4
        assert "verification failed" in err


class TestEig:
    def test_reduced_input(self, mapped, capsys):
        code, out, _ = invoke(capsys, "eig", mapped / "reduced.ham")
        assert code == 0
        assert value(out, "ground_energy") == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=ENERGY_TOL)

    def test_fermionic_input(self, fixtures_dir, capsys):
        code, out, _ = invoke(capsys, "eig", fixtures_dir / HAMILTONIAN, "--constraints", fixtures_dir / SECTOR)
        assert code == 0
        assert value(out, "ground_energy") == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=ENERGY_TOL)

    def test_spectrum(self, tmp_path, mapped, capsys):
        code, _, _ = invoke(capsys, "eig", mapped / "reduced.ham", "--spectrum", "--out", tmp_path / "eig")
        assert code == 0
        lines = (tmp_path / "eig" / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "index,eigenvalue"
        assert len(lines) == 5

    def test_batch(self, tmp_path, fixtures_dir, capsys):
        curve = tmp_path / "curve"
        curve.mkdir()
        shutil.copy(fixtures_dir / HAMILTONIAN, curve / "h2_1.0.ham")
        shutil.copy(fixtures_dir / HAMILTONIAN, curve / "h2_0.75.ham")
        code, out, _ = invoke(capsys, "eig", "--batch", curve, "--constraints", fixtures_dir / SECTOR)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "distance,energy"
        assert [line.split(",")[0] for line in lines[1:]] == ["0.75", "1"]
        for line in lines[1:]:
            assert float(line.split(",")[1]) == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=ENERGY_TOL)

    def test_needs_input(self, capsys):
        code, _, err = invoke(capsys, "eig")
        assert code == 1
        assert "--batch" in err


class TestVqeAndCounts:
    def test_vqe(self, tmp_path, mapped, capsys):
        code, out, _ = invoke(capsys, "vqe", mapped / "reduced.ham", "--budget", 500, "--out", tmp_path / "vqe")
        assert code == 0
        assert value(out, "energy") == pytest.approx(WORKED_EXAMPLE_ENERGY, abs=1e-3)
        assert (tmp_path / "vqe" / "trace.csv").read_text().startswith("iter,energy\n1,")
        assert "theta=" in out

    def test_vqe_budget(self, mapped, capsys):
        code, out, _ = invoke(capsys, "vqe", mapped / "reduced.ham", "--budget", 3)
        assert code == 0
        assert "evaluations=3 exhausted=true" in out

    def test_pauli_count_fermionic(self, fixtures_dir, capsys):
        code, out, _ = invoke(capsys, "pauli-count", fixtures_dir / HAMILTONIAN)
        assert code == 0
        assert "pauli_strings=14" in out

    def test_pauli_count_reduced(self, mapped, capsys):
        code, out, _ = invoke(capsys, "pauli-count", mapped / "reduced.ham")
        assert code == 0
        assert "qubits=2 max_pauli=15" in out


class TestGlobalOptions:
    def test_metrics_file(self, tmp_path, fixtures_dir, capsys):
        metrics = tmp_path / "metrics.prom"
        code, _, _ = invoke(capsys, "--metrics", metrics, "pauli-count", fixtures_dir / HAMILTONIAN)
        assert code == 0
        text = metrics.read_text()
        assert 'subspace_mapper_stage_seconds_count{stage="pauli_count"} 1.0' in text

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_bad_environment(self, monkeypatch, fixtures_dir, capsys):
        monkeypatch.setenv("SUBSPACE_MAPPER_DENSE_CAP", "zero")
        code, _, err = invoke(capsys, "pauli-count", fixtures_dir / HAMILTONIAN)
        assert code == 2
        assert "invalid environment configuration" in err
