"""Dense symmetric eigenvalues, singular values, and padded 1-D convolution.

Matrices are plain 2-D float ndarrays and eigenvalue spectra are 1-D ndarrays
sorted ascending.  Everything here is small and dense; LAPACK via numpy does
the heavy lifting.
"""

from __future__ import annotations

import numpy as np

# A matrix counts as nonsingular when sigma_min exceeds this relative floor.
NONSING_RTOL = 1e-8


def as_matrix(A) -> np.ndarray:
    """Coerce to a 2-D float array, rejecting anything else."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={A.ndim}")
    if A.size == 0:
        raise ValueError("empty matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def frobenius(A) -> float:
    return float(np.linalg.norm(np.asarray(A, dtype=float)))


def sym_eigvals(A, sym_tol: float = 1e-10) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending.

    The input must be square and symmetric up to ``sym_tol * (1 + ||A||_F)``;
    the measured asymmetry is reported otherwise.  The symmetrized matrix
    (A + A^T)/2 is what actually gets factored, so tiny representation noise
    cannot push eigenvalues off the real line.
    """
    A = as_matrix(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"sym_eigvals needs a square matrix, got {n}x{m}")
    asym = float(np.max(np.abs(A - A.T)))
    if asym > sym_tol * (1.0 + frobenius(A)):
        raise ValueError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} exceeds "
            f"tolerance {sym_tol:.1e} * (1 + ||A||_F)"
        )
    return np.linalg.eigvalsh(0.5 * (A + A.T))


def min_singular_value(A) -> float:
    """Smallest singular value of a 2-D matrix (square or rectangular)."""
    A = as_matrix(A)
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def is_nonsingular(A, rtol: float = NONSING_RTOL) -> bool:
    """Certify nonsingularity: sigma_min(A) > rtol * (1 + ||A||_F).

    The relative floor keeps the verdict meaningful across scales; an exactly
    singular matrix perturbed at machine precision still fails the test.
    """
    A = as_matrix(A)
    return min_singular_value(A) > rtol * (1.0 + frobenius(A))


def _as_vector(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def conv_padded(alpha, beta) -> np.ndarray:
    """Padded 1-D convolution producing all len(alpha)+len(beta)-1 outputs.

    Output j (1-based) is sum_i alpha[i] * beta_padded[i + j - 1] where beta
    is zero-padded by len(alpha)-1 on each side.  Equivalently this is full
    convolution of the reversed filter with beta:

        conv_padded((1, 2), (3, 4)) == (6, 11, 4)
    """
    alpha = _as_vector(alpha, "alpha")
    beta = _as_vector(beta, "beta")
    return np.convolve(alpha[::-1], beta, mode="full")


def conv_matrix(v, d_z: int) -> np.ndarray:
    """Banded matrix V with V @ z == conv_padded(v, z) for every z of length d_z.

    V has shape (d_v + d_z - 1, d_z).  Built entry by entry from the defining
    sum, deliberately not via numpy's convolve, so the matrix route and the
    direct route stay independent checks of each other.
    """
    v = _as_vector(v, "v")
    if int(d_z) != d_z or d_z < 1:
        raise ValueError(f"d_z must be a positive integer, got {d_z!r}")
    d_z = int(d_z)
    d_v = v.size
    V = np.zeros((d_v + d_z - 1, d_z))
    for j in range(d_v + d_z - 1):
        for c in range(d_z):
            i = c + d_v - 1 - j
            if 0 <= i < d_v:
                V[j, c] = v[i]
    return V
