# tests/test_mapping.py
import numpy as np
import pytest

from subspace_mapper.config import get_settings
from subspace_mapper.constraint import (
    ConstraintKind,
    ConstraintSpec,
    SubspaceBasis,
    intersect_constraints,
    load_constraints,
)
from subspace_mapper.errors import DimensionCapError, ToleranceError
from subspace_mapper.fermion import FermionOperator, load_fermion_operator, operator_matrix
from subspace_mapper.mapping import (
    MappedState,
    ReducedHamiltonian,
    SubspaceMap,
    build_map,
    map_state,
    projector_check,
    reduce_hamiltonian,
    unmap_state,
)
from subspace_mapper.sim import eigensolve
from tests.fixtures.h2_reference import (
    CC_PVTZ_SINGLET_ENERGY,
    SECTOR_DIAGONAL,
    SECTOR_OCCUPATIONS,
    SECTOR_OFF_DIAGONAL,
    TWO_ELECTRON_TOL,
)
from tests.fixtures.random_instances import random_hermitian_operator, random_state, random_symmetric


def embedded(basis: SubspaceBasis, rng: np.random.Generator) -> np.ndarray:
    """Random normalised Fock-space vector inside span(basis)"""
    return basis.matrix() @ random_state(rng, basis.dimension)


class TestSubspaceMap:
    def test_h2_sector_uses_two_qubits(self, h2_sector_map):
        assert h2_sector_map.dimension == 4
        assert h2_sector_map.n_qubits == 2
        assert [v[0][0] for v in h2_sector_map.basis.vectors] == SECTOR_OCCUPATIONS

    def test_assignment_is_identity(self, h2_sector_map):
        assert [h2_sector_map.assignment(m) for m in range(4)] == [0, 1, 2, 3]
        with pytest.raises(IndexError):
            h2_sector_map.assignment(4)

    @pytest.mark.parametrize("n_states, qubits", [(1, 1), (2, 1), (3, 2), (5, 3), (6, 3), (16, 4)])
    def test_qubit_counts(self, n_states, qubits):
        assert build_map(SubspaceBasis.from_states(range(n_states), 4)).n_qubits == qubits

    def test_wrong_qubit_count_rejected(self):
        with pytest.raises(ValueError):
            SubspaceMap(basis=SubspaceBasis.from_states(range(4), 3), n_qubits=3)

    def test_operator_shape(self, h2_sector_map):
        d = h2_sector_map.operator()
        assert d.shape == (4, 16)
        for m, occupation in enumerate(SECTOR_OCCUPATIONS):
            assert d[m, occupation] == 1.0

    @pytest.mark.parametrize("states, n_orbitals", [([1, 2, 4], 3), (list(range(9)), 6)])
    def test_operator_pads_unused_rows(self, states, n_orbitals):
        subspace_map = build_map(SubspaceBasis.from_states(states, n_orbitals))
        d = subspace_map.operator().toarray()
        assert d.shape == (1 << subspace_map.n_qubits, 1 << n_orbitals)
        assert not d[len(states):].any()
        for m, state in enumerate(states):
            assert d[m, state] == 1.0


class TestProjector:
    def test_h2_sector(self, h2_sector_map):
        assert projector_check(h2_sector_map) < 1e-12

    def test_singlet_subspace(self, fixtures_dir):
        basis = intersect_constraints(load_constraints(fixtures_dir / "h2_singlet.constraints"), 4)
        assert projector_check(build_map(basis)) < 1e-10

    def test_padded_register(self):
        # three states on two qubits leave |11> unused
        subspace_map = build_map(SubspaceBasis.from_states([1, 2, 4], 3))
        assert projector_check(subspace_map) < 1e-12

    def test_dense_cap(self, monkeypatch, h2_sector_map):
        monkeypatch.setenv("SUBSPACE_MAPPER_DENSE_CAP", "8")
        get_settings.cache_clear()
        with pytest.raises(DimensionCapError):
            projector_check(h2_sector_map)


class TestReducedHamiltonian:
    def test_h2_entries(self, h2_reduced):
        assert h2_reduced.n_qubits == 2
        assert h2_reduced.dimension == 4
        diagonal = dict(h2_reduced.diagonal())
        for m, value in enumerate(SECTOR_DIAGONAL):
            assert diagonal[m] == pytest.approx(value, abs=TWO_ELECTRON_TOL)
        off = {(m, mp): v for m, mp, v in h2_reduced.off_diagonal()}
        assert set(off) == set(SECTOR_OFF_DIAGONAL)
        for key, value in SECTOR_OFF_DIAGONAL.items():
            assert off[key] == pytest.approx(value, abs=TWO_ELECTRON_TOL)

    def test_entries_are_symmetric_and_row_major(self, h2_reduced):
        assert list(h2_reduced.entries) == sorted(h2_reduced.entries, key=lambda e: (e[0], e[1]))
        dense = h2_reduced.to_dense()
        np.testing.assert_array_equal(dense, dense.T)

    def test_identity_operator(self, h2_sector_map):
        reduced = reduce_hamiltonian(FermionOperator.identity(2.5, 4), h2_sector_map)
        np.testing.assert_allclose(reduced.to_dense(), 2.5 * np.eye(4))

    def test_full_space_equals_fock_matrix(self, rng):
        op = random_hermitian_operator(rng, 4)
        reduced = reduce_hamiltonian(op, build_map(SubspaceBasis.full_space(4)))
        assert reduced.n_qubits == 4
        np.testing.assert_allclose(reduced.to_dense(), operator_matrix(op).toarray(), atol=1e-10)

    def test_matches_projected_matrix(self, rng, fixtures_dir):
        op = random_hermitian_operator(rng, 4)
        basis = intersect_constraints(load_constraints(fixtures_dir / "h2_singlet.constraints"), 4)
        reduced = reduce_hamiltonian(op, build_map(basis))
        columns = basis.dense()
        expected = columns.T @ operator_matrix(op).toarray() @ columns
        np.testing.assert_allclose(reduced.to_dense(full=False), expected, atol=1e-10)

    def test_padded_sector_matches_projected_matrix(self, rng):
        # 9 states on 4 qubits
        op = random_hermitian_operator(rng, 6)
        specs = [
            ConstraintSpec(kind=ConstraintKind.NUMBER_UP, allowed=(1,)),
            ConstraintSpec(kind=ConstraintKind.NUMBER_DOWN, allowed=(1,)),
        ]
        basis = intersect_constraints(specs, 6)
        reduced = reduce_hamiltonian(op, build_map(basis))
        assert (reduced.dimension, reduced.n_qubits) == (9, 4)
        columns = basis.dense()
        expected = columns.T @ operator_matrix(op).toarray() @ columns
        np.testing.assert_allclose(reduced.to_dense(full=False), expected, atol=1e-10)
        assert not reduced.to_dense()[9:].any()

    def test_orbital_mismatch(self, h2_sector_map):
        with pytest.raises(ValueError, match="orbitals"):
            reduce_hamiltonian(FermionOperator.identity(1.0, 2), h2_sector_map)

    def test_from_dense(self, rng):
        matrix = random_symmetric(rng, 5, density=0.5)
        reduced = ReducedHamiltonian.from_dense(matrix)
        assert reduced.n_qubits == 3
        np.testing.assert_allclose(reduced.to_dense(full=False), matrix)
        assert reduced.to_dense().shape == (8, 8)

    def test_from_dense_rejects_asymmetric(self):
        with pytest.raises(ToleranceError):
            ReducedHamiltonian.from_dense(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_entries_validated(self):
        with pytest.raises(ValueError, match="symmetric partner"):
            ReducedHamiltonian(entries=((0, 1, 1.0),), n_qubits=1, dimension=2)
        with pytest.raises(ValueError, match="outside"):
            ReducedHamiltonian(entries=((2, 2, 1.0),), n_qubits=1, dimension=2)

    def test_spectrum_contained_in_fock_spectrum(self, h2_operator, h2_reduced):
        reduced = np.linalg.eigvalsh(h2_reduced.to_dense(full=False))
        full = np.linalg.eigvalsh(operator_matrix(h2_operator).toarray())
        for value in reduced:
            assert np.min(np.abs(full - value)) < 1e-10


class TestStateMapping:
    def test_round_trip(self, rng, h2_sector_map):
        state = embedded(h2_sector_map.basis, rng)
        mapped = map_state(state, h2_sector_map)
        assert mapped.n_qubits == 2
        np.testing.assert_allclose(unmap_state(mapped, h2_sector_map), state, atol=1e-12)

    def test_amplitudes_land_on_assigned_states(self, h2_sector_map):
        state = np.zeros(16)
        state[0b1001] = 1.0
        mapped = map_state(state, h2_sector_map)
        np.testing.assert_allclose(mapped.amplitudes, [0, 0, 1, 0])

    def test_padding_stays_empty(self, rng):
        subspace_map = build_map(SubspaceBasis.from_states([1, 2, 4], 3))
        mapped = map_state(embedded(subspace_map.basis, rng), subspace_map)
        assert mapped.amplitudes[3] == 0

    def test_state_outside_subspace(self, h2_sector_map):
        state = np.zeros(16)
        state[0b0001] = 1.0
        with pytest.raises(ToleranceError, match="outside the valid subspace"):
            map_state(state, h2_sector_map)

    def test_wrong_length(self, h2_sector_map):
        with pytest.raises(ValueError):
            map_state(np.ones(8) / np.sqrt(8), h2_sector_map)

    def test_expectation_preserved(self, rng, h2_operator, h2_sector_map, h2_reduced):
        state = embedded(h2_sector_map.basis, rng)
        mapped = map_state(state, h2_sector_map)
        fock = np.vdot(state, operator_matrix(h2_operator) @ state).real
        qubit = np.vdot(mapped.amplitudes, h2_reduced.to_dense() @ mapped.amplitudes).real
        assert qubit == pytest.approx(fock, abs=1e-10)

    def test_expectation_preserved_in_singlet_subspace(self, rng, fixtures_dir):
        op = random_hermitian_operator(rng, 4)
        specs = [
            ConstraintSpec(kind=ConstraintKind.TOTAL_NUMBER, allowed=(2,)),
            ConstraintSpec(kind=ConstraintKind.S_SQUARED, allowed=(0,)),
        ]
        subspace_map = build_map(intersect_constraints(specs, 4))
        reduced = reduce_hamiltonian(op, subspace_map)
        state = embedded(subspace_map.basis, rng)
        mapped = map_state(state, subspace_map)
        fock = np.vdot(state, operator_matrix(op) @ state).real
        qubit = np.vdot(mapped.amplitudes, reduced.to_dense() @ mapped.amplitudes).real
        assert qubit == pytest.approx(fock, abs=1e-10)

    def test_mapped_state_checks_norm(self):
        with pytest.raises(ValueError, match="norm"):
            MappedState(amplitudes=np.array([1.0, 1.0]), n_qubits=1)


@pytest.mark.optional
class TestMolecularFixtures:
    def test_lih_sector(self, extra_fixture):
        op = load_fermion_operator(extra_fixture("lih_sto3g.ham"))
        specs = [
            ConstraintSpec(kind=ConstraintKind.NUMBER_UP, allowed=(2,)),
            ConstraintSpec(kind=ConstraintKind.NUMBER_DOWN, allowed=(2,)),
        ]
        subspace_map = build_map(intersect_constraints(specs, op.n_orbitals))
        assert (op.n_orbitals, subspace_map.dimension, subspace_map.n_qubits) == (12, 225, 8)
        assert reduce_hamiltonian(op, subspace_map).n_qubits == 8

    @pytest.mark.parametrize("n_up, n_down, qubits", [(1, 1, 10), (2, 0, 9)])
    def test_cc_pvtz_qubit_counts(self, extra_fixture, n_up, n_down, qubits):
        op = load_fermion_operator(extra_fixture("h2_ccpvtz.ham"))
        assert op.n_orbitals == 56
        specs = [
            ConstraintSpec(kind=ConstraintKind.NUMBER_UP, allowed=(n_up,)),
            ConstraintSpec(kind=ConstraintKind.NUMBER_DOWN, allowed=(n_down,)),
        ]
        assert build_map(intersect_constraints(specs, 56)).n_qubits == qubits

    def test_cc_pvtz_singlet_energy(self, extra_fixture):
        op = load_fermion_operator(extra_fixture("h2_ccpvtz.ham"))
        specs = [
            ConstraintSpec(kind=ConstraintKind.NUMBER_UP, allowed=(1,)),
            ConstraintSpec(kind=ConstraintKind.NUMBER_DOWN, allowed=(1,)),
        ]
        reduced = reduce_hamiltonian(op, build_map(intersect_constraints(specs, op.n_orbitals)))
        assert eigensolve(reduced).ground_energy == pytest.approx(CC_PVTZ_SINGLET_ENERGY, abs=1e-8)
