"""Measuring qubits with the tetrahedral SIC-POVM.

A single qubit is measured with four rank-1 effects whose Bloch vectors form
a regular tetrahedron. For m qubits we measure each one separately, which
gives a product POVM with 4**m outcomes.
"""

import numpy as np

from avqst import (born_probabilities, haar_random_pure, make_rng, product_povm, qubit_sic_povm,
                   sample_outcome, validate_povm)
from avqst.quantum import projector

rng = make_rng(2024)
sic = qubit_sic_povm()

# pairwise overlaps tr(Pi_x Pi_y): 1/4 on the diagonal, 1/12 elsewhere
gram = np.einsum("aij,bji->ab", sic.effects, sic.effects).real
print("SIC overlaps:\n", np.round(gram, 4))
print("sum of effects equals I:", np.allclose(sic.effects.sum(axis=0), np.eye(2)))

# two-qubit product POVM: outcome index x = x_0 + 4 * x_1
povm = product_povm(sic, 2)
print(f"\n{povm.label}: {povm.n_outcomes} effects of size {povm.dim}, problems: {validate_povm(povm)}")

psi = haar_random_pure(4, rng)
rho = projector(psi)
p = born_probabilities(rho, povm)
print("Born probabilities of a random pure state:", np.round(p, 3))

# empirical frequencies approach the Born rule
n = 20000
freq = np.bincount(sample_outcome(rho, povm, rng, size=n), minlength=16) / n
print(f"max |freq - p| after {n} shots: {np.abs(freq - p).max():.4f}")
