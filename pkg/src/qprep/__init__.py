"""qprep: initial-state preparation toolkit for quantum phase estimation.

Compresses and encodes sum-of-Slater and matrix-product states, estimates
fault-tolerant Toffoli/qubit costs, computes and samples energy
distributions, and analyzes QPE outcome, leakage, and refining statistics.
"""

__version__ = "0.1.0"
