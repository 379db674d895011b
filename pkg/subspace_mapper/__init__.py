"""
Subspace Mapper
Maps constrained fermionic problems onto a minimal-qubit space, compiles the
measurement circuits for the mapped Hamiltonian and verifies the pipeline with an
embedded statevector simulator.
"""

__version__ = "1.0.0"
