"""Certificates and sampling harnesses for critical-point structure.

At a near-critical point of the block-regularized objective every head block
is balanced (|a_j| matches the joint weight-bias norm) and annihilates its
certificate matrix:  M_j (w_j; b_j) = 0, where

    M_j = -sgn(a_j) sum_i l'_i y_i 1{pre_ij >= 0} (x_i; 1)(x_i; 1)^T + lam_j I.

A nonsingular M_j therefore forces block j to vanish.  certify() audits the
chain that follows -- nonsingular certificate matrix => inactive block =>
(once every loss derivative clears the criterion threshold) zero training
error -- and renders a verdict rather than a bare pass.  The sampling
harnesses stress what the chain rests on: certificate_matrix_monte_carlo
draws coefficient/sign configurations hunting for one with every matrix
singular, which in the overparameterized regime with distinct lam would
require lam to hit a measure-zero row-space condition (the failure
overdetermined_no_solution quantifies); at m = n the explicit adversarial
configuration from certificate_matrix_adversarial does make every matrix
singular, showing the overparameterization hypothesis is load-bearing.
"""

from __future__ import annotations

import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .models import DeepConvNet, QuadraticNet, net_to_flat
from .numkit import min_singular_value
from .objective import (
    FlatObjective,
    ObjectiveConfig,
    loss_deriv,
    margins,
    neuron_block_norms,
    training_error,
    value_and_gradient,
)


class NotCriticalError(RuntimeError):
    """certify() was called away from criticality; the message carries the
    measured gradient norm.  Certificates at non-critical points would be
    vacuous, so this is an error rather than a report field."""


class CertificateContradiction(RuntimeError):
    """A certified implication failed at a near-critical point.  This cannot
    happen at a genuine critical point, so it flags a defect in either the
    optimizer output or the certificate computation -- never ignore it."""


def _head_features(net, ds: Dataset) -> np.ndarray:
    """Inputs seen by the head layer: the data itself, or the last hidden
    state for a conv stack."""
    return net.head_inputs(ds.X) if isinstance(net, DeepConvNet) else ds.X


def build_M_matrices(net, ds: Dataset, cfg: ObjectiveConfig) -> np.ndarray:
    """Certificate matrices M_j, one per head block, shape (m, p+1, p+1).

    For the squared-hinge-of-preactivation head the active-set indicator is
    1{pre_ij >= 0}; the quadratic head has no indicator (its activation is
    smooth), so the same sum runs over every sample and all blocks share one
    matrix up to the sign of a_j and the lam_j shift.  For a conv stack the
    lifted features are the last hidden states rather than the raw inputs.
    """
    F = _head_features(net, ds)
    lifted = np.hstack([F, np.ones((F.shape[0], 1))])
    lp = loss_deriv(cfg.loss, margins(net, ds))
    coef = lp * ds.y
    if isinstance(net, QuadraticNet):
        ind = np.ones((F.shape[0], net.m))
    else:
        ind = (F @ net.W.T + net.b >= 0.0).astype(float)
    sgn = np.sign(net.a)
    p = lifted.shape[1]
    out = np.empty((net.m, p, p))
    for j in range(net.m):
        weighted = lifted * (coef * ind[:, j])[:, None]
        out[j] = -sgn[j] * (weighted.T @ lifted) + cfg.lam[j] * np.eye(p)
    return out


@dataclass
class CertificateReport:
    """Everything certify() measures at a terminal point.

    balance_residuals holds the signed per-block values
    |a_j| - sqrt(||w_j||^2 + b_j^2); inactive lists blocks with every
    component magnitude below tol; m_sigma_min holds sigma_min(M_j).
    Verdicts: "ok" (inactive block found, criterion met, error zero),
    "margin-failure" (inactive block found but some loss derivative is
    above the criterion threshold -- an escape move is recommended), and
    "bad-lambda-suspect", used exactly when every certificate matrix is
    numerically singular, the signature of coefficients lam that defeat
    the certificate (equal entries, or an adversarial row-space hit).
    """

    balance_residuals: np.ndarray
    inactive: list
    m_sigma_min: np.ndarray
    margin: float
    training_error: float
    max_loss_deriv: float
    epsilon: float
    grad_norm: float
    tol: float
    verdict: str

    def to_dict(self) -> dict:
        return {
            "balance_residuals": [float(v) for v in self.balance_residuals],
            "inactive": [int(j) for j in self.inactive],
            "m_sigma_min": [float(v) for v in self.m_sigma_min],
            "margin": float(self.margin),
            "training_error": float(self.training_error),
            "max_loss_deriv": float(self.max_loss_deriv),
            "epsilon": float(self.epsilon),
            "grad_norm": float(self.grad_norm),
            "tol": float(self.tol),
            "verdict": self.verdict,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CertificateReport":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(
            balance_residuals=np.asarray(raw["balance_residuals"], dtype=float),
            inactive=[int(j) for j in raw["inactive"]],
            m_sigma_min=np.asarray(raw["m_sigma_min"], dtype=float),
            margin=float(raw["margin"]),
            training_error=float(raw["training_error"]),
            max_loss_deriv=float(raw["max_loss_deriv"]),
            epsilon=float(raw["epsilon"]),
            grad_norm=float(raw["grad_norm"]),
            tol=float(raw["tol"]),
            verdict=str(raw["verdict"]),
        )

    def one_line(self) -> str:
        return (
            f"verdict={self.verdict} error={self.training_error:.4f} "
            f"margin={self.margin:.6g} inactive={len(self.inactive)} "
            f"max_deriv={self.max_loss_deriv:.6g} eps={self.epsilon:.6g} "
            f"grad={self.grad_norm:.3e}"
        )


def certify(net, ds: Dataset, cfg: ObjectiveConfig, tol: float | None = None,
            grad_tol: float = 1e-5) -> CertificateReport:
    """Audit a terminal point and return the full CertificateReport.

    Requires near-criticality: ||grad|| < grad_tol * (1 + |loss|), else
    NotCriticalError.  tol defaults to 0.1 * min(lam): inactive blocks show
    sigma_min(M_j) = lam_j, so the threshold must sit below min(lam) yet
    far above the numerical noise floor of a converged run.

    Raises CertificateContradiction if some certificate matrix is
    nonsingular yet no block is inactive, or if the criterion threshold is
    met with an inactive block present yet the training error is nonzero.
    """
    if tol is None:
        tol = 0.1 * float(np.min(cfg.lam))
    loss, g = value_and_gradient(net, ds, cfg)
    gn = float(np.linalg.norm(g))
    if not gn < grad_tol * (1.0 + abs(loss)):
        raise NotCriticalError(
            f"gradient norm {gn:.6e} exceeds {grad_tol:.1e} * (1 + |{loss:.6e}|)"
        )

    abs_a = np.abs(net.a)
    w_norms = np.linalg.norm(net.W, axis=1)
    abs_b = np.abs(net.b)
    residuals = abs_a - np.sqrt(w_norms**2 + abs_b**2)
    inactive = [
        int(j)
        for j in range(net.m)
        if abs_a[j] < tol and w_norms[j] < tol and abs_b[j] < tol
    ]
    sigma = np.array([min_singular_value(M) for M in build_M_matrices(net, ds, cfg)])
    marg = float(np.min(ds.y * net.value(ds.X)))
    err = training_error(net, ds)
    lp = loss_deriv(cfg.loss, margins(net, ds))
    worst = float(np.max(lp))
    eps = cfg.loss.epsilon

    if bool(np.all(sigma <= tol)):
        verdict = "bad-lambda-suspect"
    elif not inactive:
        raise CertificateContradiction(
            f"sigma_min(M_j) up to {sigma.max():.3e} > tol {tol:.3e} "
            "yet every block is active at a near-critical point"
        )
    elif worst < eps:
        if err != 0.0:
            raise CertificateContradiction(
                f"criterion met (max loss derivative {worst:.6g} < {eps:.6g}) "
                f"with an inactive block, yet training error is {err:.4f}"
            )
        verdict = "ok"
    else:
        verdict = "margin-failure"

    return CertificateReport(
        balance_residuals=residuals,
        inactive=inactive,
        m_sigma_min=sigma,
        margin=marg,
        training_error=err,
        max_loss_deriv=worst,
        epsilon=eps,
        grad_norm=gn,
        tol=tol,
        verdict=verdict,
    )


@dataclass
class ProbeResult:
    estimate: float
    direction: np.ndarray  # unit (u; v) achieving the estimate
    lam_j: float

    @property
    def passed(self) -> bool:
        """At a genuine local minimum the sampled supremum stays below
        lam_j; a violating direction is a certified descent move."""
        return self.estimate < self.lam_j


def perturbation_probe(net, ds: Dataset, cfg: ObjectiveConfig, j: int,
                       samples: int = 512, seed: int = 0) -> ProbeResult:
    """Sampled supremum of |sum_i l'_i (-y_i) (u.f_i + v)_+^2| over unit (u, v).

    Block j must be inactive: repointing an inactive block along (u, v) at
    amplitude delta changes the loss by delta^3 (lam_j - drive) + o(delta^3),
    so any direction driving past lam_j certifies descent.  The sample set
    mixes random unit directions with the lifted data directions (f_i; 1),
    which activate their own sample and are the natural extremal candidates.
    """
    bn = neuron_block_norms(net)
    if bn[j] > 1e-8:
        raise ValueError(f"block {j} is not inactive (norm {bn[j]:.3e})")
    F = _head_features(net, ds)
    lp = loss_deriv(cfg.loss, margins(net, ds))
    coef = lp * (-ds.y)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, F.shape[1] + 1))
    lifted = np.hstack([F, np.ones((F.shape[0], 1))])
    dirs = np.vstack([dirs, lifted, -lifted])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    act = np.maximum(F @ dirs[:, :-1].T + dirs[:, -1], 0.0) ** 2
    drives = np.abs(coef @ act)
    best = int(np.argmax(drives))
    return ProbeResult(float(drives[best]), dirs[best], float(cfg.lam[j]))


def perturbation_stability(net, ds: Dataset, cfg: ObjectiveConfig,
                           radius: float = 1e-3, trials: int = 1000,
                           seed: int = 0) -> float:
    """Smallest loss change over random perturbations of the given radius.

    A nonnegative return certifies that no sampled direction descends --
    the Monte-Carlo signature of a local minimum.  Directions are uniform
    on the sphere of the full parameter space.
    """
    fob = FlatObjective(net, ds, cfg)
    theta = net_to_flat(net)
    base = fob.value(theta)
    rng = np.random.default_rng(seed)
    worst = np.inf
    for _ in range(trials):
        u = rng.standard_normal(theta.size)
        u *= radius / np.linalg.norm(u)
        worst = min(worst, fob.value(theta + u) - base)
    return float(worst)


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("REQULAND_WORKERS", "").strip()
        workers = int(env) if env else min(4, os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def certificate_matrices_zA(ds: Dataset, z, A, lam) -> np.ndarray:
    """M_j(z, A) = -sum_i z_i A_ij (x_i;1)(x_i;1)^T + lam_j I, shape (m, d+1, d+1)."""
    z = np.asarray(z, dtype=float)
    A = np.asarray(A, dtype=float)
    lam = np.asarray(lam, dtype=float)
    lifted = np.hstack([ds.X, np.ones((ds.n, 1))])
    p = lifted.shape[1]
    out = np.empty((lam.size, p, p))
    for j in range(lam.size):
        weighted = lifted * (z * A[:, j])[:, None]
        out[j] = -(weighted.T @ lifted) + lam[j] * np.eye(p)
    return out


def _mc_trial(ds: Dataset, lam, seed_pair) -> float:
    rng = np.random.default_rng(np.random.SeedSequence(seed_pair))
    n = ds.n
    # Heavy-tailed mix: Cauchy draws stress near-singular regimes that
    # bounded sampling would essentially never reach.
    z = np.where(rng.random(n) < 0.5, rng.standard_normal(n), rng.standard_cauchy(n))
    A = rng.integers(-1, 2, size=(n, lam.size)).astype(float)
    sig = [min_singular_value(M) for M in certificate_matrices_zA(ds, z, A, lam)]
    return float(max(sig))


def certificate_matrix_monte_carlo(ds: Dataset, m: int, lam, trials: int = 1000,
                                   seed: int = 0, workers: int | None = None) -> float:
    """Min over trials of max_j sigma_min(M_j(z, A)) for sampled (z, A).

    With m >= n+1 and pairwise-distinct lam the return value is positive:
    making every M_j singular simultaneously would require lam to solve an
    overdetermined linear system whose solution set has measure zero.  With
    m <= n that protection is gone (a warning says so), and the adversarial
    configuration below shows the failure is real, not just unproven.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.size != m:
        raise ValueError(f"lam has {lam.size} entries, expected m={m}")
    if np.unique(lam).size != m:
        raise ValueError("lam entries must be pairwise distinct")
    if m <= ds.n:
        warnings.warn(
            f"m={m} <= n={ds.n}: the nonsingularity guarantee needs m >= n+1; "
            "all-singular configurations exist in this regime",
            stacklevel=2,
        )
    workers = _resolve_workers(workers)
    if workers == 1:
        vals = [_mc_trial(ds, lam, (seed, t)) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(lambda t: _mc_trial(ds, lam, (seed, t)), range(trials)))
    return float(min(vals))


def certificate_matrix_adversarial(ds: Dataset, lam):
    """Explicit (z, A) with every M_j singular, for the square case m = n.

    A is the identity pattern, so M_j = -z_j (x_j;1)(x_j;1)^T + lam_j I is a
    rank-one update whose spectrum is {lam_j} plus lam_j - z_j ||(x_j;1)||^2;
    choosing z_j = lam_j / ||(x_j;1)||^2 zeroes that eigenvalue for every j.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.size != ds.n:
        raise ValueError(f"square case needs m = n, got m={lam.size} n={ds.n}")
    lifted_sq = np.sum(ds.X**2, axis=1) + 1.0
    z = lam / lifted_sq
    A = np.eye(ds.n)
    return z, A


def overdetermined_no_solution(A, lam=None, seed: int = 0) -> float:
    """Least-squares distance from lam to the row space of A (n x m, m >= n+1).

    Simultaneous singularity of every certificate matrix would force
    lam_j = sum_i A_ij alpha_i for some alpha, i.e. lam in the row space of
    A -- at most n dimensions inside R^m, so randomly drawn lam misses it
    with probability 1 and the residual is positive.  lam=None draws a
    standard normal lam with the given seed.
    """
    A = np.asarray(A, dtype=float)
    n, m = A.shape
    if m < n + 1:
        raise ValueError(f"need m >= n+1 columns, got shape {A.shape}")
    if lam is None:
        lam = np.random.default_rng(seed).standard_normal(m)
    lam = np.asarray(lam, dtype=float)
    alpha, *_ = np.linalg.lstsq(A.T, lam, rcond=None)
    return float(np.linalg.norm(A.T @ alpha - lam))


@dataclass
class DeepBalanceReport:
    """Scaling identities measured at a conv-net terminal point.

    head_cubic = sum_j lam_j |a_j|^3 and weight_cubic = sum_j lam_j u_j^3
    (u_j the joint weight-bias norm) must agree; each filter must satisfy
    lam_c (||v_k||^2 - 1) ||v_k||^2 = coupling = 2 sum_j lam_j ||w_j||^2 u_j.
    Residuals are relative: |lhs - rhs| / (1 + max(|lhs|, |rhs|)).

    case (classified from filter norms with a snap band): 1 when some
    filter is numerically zero, 2 when every filter sits at unit norm (the
    zero-network configuration), 3 otherwise -- the generic minimum, where
    all filter norms exceed 1 and agree with each other.
    """

    head_cubic: float
    weight_cubic: float
    filter_terms: np.ndarray
    coupling: float
    head_residual: float
    filter_residuals: np.ndarray
    filter_norms: np.ndarray
    case: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.head_residual < self.tol and bool(
            np.all(self.filter_residuals < self.tol)
        )


def deep_balance_check(net: DeepConvNet, cfg: ObjectiveConfig, tol: float = 1e-4,
                       case_band: float = 1e-4) -> DeepBalanceReport:
    u = np.sqrt(np.sum(net.W**2, axis=1) + net.b**2)
    head_cubic = float(np.sum(cfg.lam * np.abs(net.a) ** 3))
    weight_cubic = float(np.sum(cfg.lam * u**3))
    coupling = 2.0 * float(np.sum(cfg.lam * np.sum(net.W**2, axis=1) * u))
    norms = np.array([np.linalg.norm(v) for v in net.filters])
    terms = np.array([cfg.lam_c * (nv**2 - 1.0) * nv**2 for nv in norms])

    def rel(lhs, rhs):
        return abs(lhs - rhs) / (1.0 + max(abs(lhs), abs(rhs)))

    if norms.size and float(np.min(norms)) <= case_band:
        case = 1
    elif norms.size == 0 or float(np.max(np.abs(norms - 1.0))) <= case_band:
        case = 2
    else:
        case = 3
    return DeepBalanceReport(
        head_cubic=head_cubic,
        weight_cubic=weight_cubic,
        filter_terms=terms,
        coupling=coupling,
        head_residual=rel(head_cubic, weight_cubic),
        filter_residuals=np.array([rel(t, coupling) for t in terms]),
        filter_norms=norms,
        case=case,
        tol=tol,
    )


def hidden_injectivity_check(net: DeepConvNet, ds: Dataset, tol: float = 1e-12):
    """(ok, offending pair or None): are the last hidden states pairwise distinct?

    Nonzero filters make every conv layer injective (full-rank banded
    matrix) and the strictly increasing activation preserves that, so
    distinct inputs must stay distinct; a collision therefore means either
    duplicated inputs or a degenerate filter.  A filter with norm <= tol
    violates the precondition outright.
    """
    for k, v in enumerate(net.filters):
        nv = float(np.linalg.norm(v))
        if nv <= tol:
            raise ValueError(f"filter {k} has norm {nv:.3e} <= tol {tol:.3e}")
    H = net.head_inputs(ds.X)
    for i in range(ds.n):
        for j in range(i + 1, ds.n):
            if float(np.linalg.norm(H[i] - H[j])) <= tol:
                return False, (i, j)
    return True, None
