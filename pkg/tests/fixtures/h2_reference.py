# tests/fixtures/h2_reference.py
"""Published reference values for H2 / STO-3G at 0.75 Angstrom.

Values carry five decimals, so comparisons against them allow for the rounding
of the transcribed Hamiltonian coefficients.
"""

# (bra, ket, value) in the printed four-orbital listing. Inside the two-electron
# sector the labels read directly; elsewhere they read as hole labels
# (leftmost character orbital 0, "0" occupied).
MATRIX_ELEMENTS = [
    ("0000", "0000", 0.90148),
    ("0001", "0001", -0.45524),
    ("0010", "0010", -0.45524),
    ("0011", "0011", -1.11615),
    ("1100", "0011", 0.18177),
    ("0100", "0100", 0.33374),
    ("0101", "0101", -0.54278),
    ("0110", "0110", -0.36101),
    ("1001", "0110", -0.18177),
    ("0111", "0111", -0.54171),
    ("1000", "1000", 0.33374),
    ("0110", "1001", -0.18177),
    ("1001", "1001", -0.36101),
    ("1010", "1010", -0.54278),
    ("1011", "1011", -0.54171),
    ("0011", "1100", 0.18177),
    ("1100", "1100", 0.43884),
    ("1101", "1101", 0.22430),
    ("1110", "1110", 0.22430),
    ("1111", "1111", 0.70557),
]

# one unit in the fifth decimal, inclusive: float sums land a hair past it
ROUNDING_SLACK = 1e-12
TWO_ELECTRON_TOL = 1e-5 + ROUNDING_SLACK
OTHER_SECTOR_TOL = 5e-5 + ROUNDING_SLACK

# Jordan-Wigner expansion, qubit q = spin-orbital q
PAULI_COEFFICIENTS = {
    "I": -0.10973,
    "Z0": 0.16988,
    "Z1": 0.16988,
    "Z2": -0.21886,
    "Z3": -0.21886,
    "Z0 Z1": 0.16821,
    "Z0 Z2": 0.12005,
    "Z0 Z3": 0.16549,
    "Z1 Z2": 0.16549,
    "Z1 Z3": 0.12005,
    "Z2 Z3": 0.17395,
    "X0 X1 Y2 Y3": -0.04544,
    "X0 Y1 Y2 X3": 0.04544,
    "Y0 X1 X2 Y3": 0.04544,
    "Y0 Y1 X2 X3": -0.04544,
}
PAULI_TOL = 2e-5 + ROUNDING_SLACK
NON_IDENTITY_STRINGS = 14

# (1, 1) sector: occupations 0011, 0110, 1001, 1100 become m = 0..3
SECTOR_OCCUPATIONS = [0b0011, 0b0110, 0b1001, 0b1100]
SECTOR_DIAGONAL = [-1.11615, -0.36101, -0.36101, 0.43884]
SECTOR_OFF_DIAGONAL = {(0, 3): 0.18177, (1, 2): -0.18177}

# state cos(0.115)|0011> - sin(0.115)|1100>
PREP_ANGLE = 0.23
DIAGONAL_PROBS = {0b0011: 0.98683, 0b1100: 0.01316}
# after the rotation whose control is qubit 3: plain 0011, primed 1100
ROTATED_PROBS = {0b0011: 0.38601, 0b1100: 0.61399}
WORKED_EXAMPLE_ENERGY = -1.13712
ENERGY_TOL = 1e-4

CC_PVTZ_SINGLET_ENERGY = -1.1723366673753
