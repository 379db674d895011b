# tests/conftest.py
import os
from pathlib import Path

import numpy as np
import pytest

from subspace_mapper.config import get_settings
from subspace_mapper.constraint import intersect_constraints, load_constraints
from subspace_mapper.fermion import FermionOperator, load_fermion_operator
from subspace_mapper.log import configure_logging
from subspace_mapper.mapping import ReducedHamiltonian, build_map, reduce_hamiltonian

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
EXTRA_FIXTURES_ENV = "SUBSPACE_MAPPER_EXTRA_FIXTURES"


def pytest_configure(config):
    config.addinivalue_line(
        "markers", f"optional: needs a molecular fixture from ${EXTRA_FIXTURES_ENV}"
    )


@pytest.fixture(scope="session", autouse=True)
def quiet_logging():
    """Route structlog through stdlib logging so nothing lands on stdout."""
    configure_logging("WARNING")


@pytest.fixture(autouse=True)
def fresh_settings():
    """Settings are cached per process; tests that patch the env need a reload."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def extra_fixture():
    """Path to an optional fixture, skipping the test when it is not supplied."""

    def resolve(name: str) -> Path:
        root = os.getenv(EXTRA_FIXTURES_ENV)
        if not root or not (Path(root) / name).is_file():
            pytest.skip(f"{name} not available (set {EXTRA_FIXTURES_ENV})")
        return Path(root) / name

    return resolve


@pytest.fixture(scope="session")
def h2_operator() -> FermionOperator:
    return load_fermion_operator(FIXTURES / "h2_sto3g_0.75.ham")


@pytest.fixture(scope="session")
def h2_sector_map():
    specs = load_constraints(FIXTURES / "h2_sector_1_1.constraints")
    return build_map(intersect_constraints(specs, 4))


@pytest.fixture(scope="session")
def h2_reduced(h2_operator, h2_sector_map) -> ReducedHamiltonian:
    return reduce_hamiltonian(h2_operator, h2_sector_map)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
