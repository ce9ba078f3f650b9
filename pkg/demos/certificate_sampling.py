"""Where the width threshold m >= n+1 enters: certificate matrix sampling.

The inactive-neuron argument runs through the matrices
M_j = -sum_i z_i A_ij (x_i; 1)(x_i; 1)^T + lambda_j I: whenever some M_j is
nonsingular at a critical point, neuron j's weight-bias vector must vanish.
Simultaneous singularity of all m matrices forces the coefficient vector
lambda into an n-dimensional image inside R^m.  With m >= n+1 and randomly
sampled distinct coefficients that is a measure-zero event; with m <= n it
is not, and an explicit adversarial pattern defeats every matrix at once.
"""

import numpy as np

from requland.datasets import gen_random
from requland.landscape import (
    certificate_matrices_zA,
    certificate_matrix_adversarial,
    certificate_matrix_monte_carlo,
    overdetermined_no_solution,
)
from requland.numkit import min_singular_value
from requland.optimize import sample_lambda

ds = gen_random(n=5, d=3, seed=5)

# Overparameterized: m = 6 > n.  Heavy-tailed (z, A) sampling hunts for a
# simultaneous singularity and never finds one.
lam6 = sample_lambda(6, 1e-2, seed=0)
worst = certificate_matrix_monte_carlo(ds, 6, lam6, trials=1000, seed=0)
print(f"m=6 > n=5: min over 1000 trials of max_j sigma_min(M_j) = {worst:.3e}  (> 0)")

# Square case m = n: the identity activation pattern with z_j tuned to each
# sample's lifted norm zeroes one eigenvalue of every M_j simultaneously.
lam5 = sample_lambda(5, 1e-2, seed=0)
z, A = certificate_matrix_adversarial(ds, lam5)
sigmas = [min_singular_value(M) for M in certificate_matrices_zA(ds, z, A, lam5)]
print(f"m=n=5 adversarial: sigma_min(M_j) = {np.array2string(np.asarray(sigmas), precision=2)}")
print("  -> every certificate matrix singular at once; the width hypothesis is load-bearing")

# The linear-algebra core of the threshold: a random lambda in R^m almost
# surely misses the row space of any n x m matrix once m >= n + 1.
rng = np.random.default_rng(0)
res = [overdetermined_no_solution(rng.standard_normal((5, 6)), lam=rng.standard_normal(6))
       for _ in range(200)]
print(f"\nrow-space miss distance over 200 random 5x6 systems: min {min(res):.3e}")
assert worst > 0.0 and max(sigmas) < 1e-10 and min(res) > 1e-10
