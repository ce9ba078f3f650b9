"""Classification objectives: margin losses, cubic regularizers, gradients.

The empirical objective is sum_i loss(-y_i f(x_i)) plus a per-neuron cubic
regularizer (1/3) sum_j lam_j (|a_j|^3 + 2 (||w_j||^2 + b_j^2)^(3/2)); deep
nets add (lam_c/4) sum_k (||v_k||^2 - 1)^2 to anchor filter norms near 1.

Both supported losses are nonnegative, non-decreasing, and twice continuously
differentiable, and each has an activation threshold eps with
loss'(z) >= eps whenever z >= 0, so a max derivative below eps certifies that
every margin is strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .models import (
    DeepConvNet,
    QuadraticNet,
    SingleLayerReQUNet,
    leaky_relu,
    leaky_relu_prime,
    net_from_flat,
    net_to_flat,
    requ,
    requ_prime,
)
from .numkit import conv_matrix

_LN2 = float(np.log(2.0))

LOSS_NAMES = ("logistic", "smooth_hinge")


@dataclass(frozen=True)
class LossKind:
    """Margin loss selector; p is the smooth-hinge exponent (ignored otherwise)."""

    name: str
    p: int = 3

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ValueError(f"unknown loss {self.name!r}; expected one of {LOSS_NAMES}")
        if self.name == "smooth_hinge" and (int(self.p) != self.p or self.p < 3):
            raise ValueError(f"smooth hinge needs an integer exponent p >= 3, got {self.p}")

    @property
    def epsilon(self) -> float:
        """Threshold with loss'(z) >= epsilon for all z >= 0."""
        return 1.0 / (2.0 * _LN2) if self.name == "logistic" else float(self.p)


def logistic() -> LossKind:
    return LossKind("logistic")


def smooth_hinge(p: int = 3) -> LossKind:
    return LossKind("smooth_hinge", p)


def loss_value(kind: LossKind, z):
    """log2(1 + e^z) or max(1 + z, 0)^p; stable far into both tails."""
    z = np.asarray(z, dtype=float)
    if kind.name == "logistic":
        return np.logaddexp(0.0, z) / _LN2
    return np.maximum(1.0 + z, 0.0) ** kind.p


def loss_deriv(kind: LossKind, z):
    z = np.asarray(z, dtype=float)
    if kind.name == "logistic":
        return expit(z) / _LN2
    return kind.p * np.maximum(1.0 + z, 0.0) ** (kind.p - 1)


def epsilon_for(kind: LossKind) -> float:
    return kind.epsilon


@dataclass
class ObjectiveConfig:
    loss: LossKind
    lam: np.ndarray  # (m,) positive per-neuron regularization weights
    lam_c: float = 0.0  # filter-anchor weight, only read for deep nets

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("lam must be a 1-D vector with one entry per neuron")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("all regularization weights must be positive and finite")
        if not np.isfinite(self.lam_c) or self.lam_c < 0:
            raise ValueError(f"lam_c must be nonnegative, got {self.lam_c}")
        self.lam = lam

    def require_distinct_lam(self) -> None:
        if np.unique(self.lam).size != self.lam.size:
            raise ValueError("this construction needs pairwise distinct lam_j")

    def check_m(self, net) -> None:
        if self.lam.size != net.m:
            raise ValueError(f"lam has {self.lam.size} entries but the net has {net.m} neurons")


def head_block_norms(net) -> np.ndarray:
    """Per-neuron sqrt(||w_j||^2 + b_j^2)."""
    return np.sqrt(np.sum(net.W**2, axis=1) + net.b**2)


def regularizer_single(net, lam) -> float:
    lam = np.asarray(lam, dtype=float)
    u = head_block_norms(net)
    return float(np.sum(lam * (np.abs(net.a) ** 3 + 2.0 * u**3)) / 3.0)


def regularizer_deep(net: DeepConvNet, lam, lam_c: float) -> float:
    conv = sum((float(v @ v) - 1.0) ** 2 for v in net.filters)
    return regularizer_single(net, lam) + 0.25 * lam_c * conv


def margins(net, ds) -> np.ndarray:
    """Loss arguments z_i = -y_i f(x_i)."""
    return -ds.y * net.value(ds.X)


def empirical_loss(net, ds, cfg: ObjectiveConfig) -> float:
    cfg.check_m(net)
    data = float(np.sum(loss_value(cfg.loss, margins(net, ds))))
    if isinstance(net, DeepConvNet):
        return data + regularizer_deep(net, cfg.lam, cfg.lam_c)
    return data + regularizer_single(net, cfg.lam)


def training_error(net, ds) -> float:
    """Fraction misclassified; an exactly-zero output never matches its label."""
    return float(np.mean(np.sign(net.value(ds.X)) != ds.y))


def max_loss_deriv(net, ds, cfg: ObjectiveConfig) -> float:
    return float(np.max(loss_deriv(cfg.loss, margins(net, ds))))


def epsilon_criterion(net, ds, cfg: ObjectiveConfig):
    """(satisfied, max loss derivative): below epsilon forces all margins > 0."""
    worst = max_loss_deriv(net, ds, cfg)
    return worst < cfg.loss.epsilon, worst


def _head_gradient(net, F, y, cfg, squared: bool):
    """Gradient blocks (da, dW, db), d(loss)/d(head input), and the data term.

    F is the matrix of head inputs (the features x_i, or h^(l-1) for deep
    nets).  squared selects the plain square activation over requ.
    """
    pre = F @ net.W.T + net.b
    phi = np.square(pre) if squared else requ(pre)
    phi_p = 2.0 * pre if squared else requ_prime(pre)
    f = phi @ net.a
    z = -y * f
    g = -loss_deriv(cfg.loss, z) * y  # d(data term)/d f_i

    u = head_block_norms(net)
    da = phi.T @ g + cfg.lam * np.abs(net.a) * net.a
    S = g[:, None] * phi_p  # (n, m)
    dW = (S.T @ F) * net.a[:, None] + 2.0 * cfg.lam[:, None] * u[:, None] * net.W
    db = S.sum(axis=0) * net.a + 2.0 * cfg.lam * u * net.b
    dF = (S * net.a[None, :]) @ net.W
    return da, dW, db, dF, float(np.sum(loss_value(cfg.loss, z)))


def value_and_gradient(net, ds, cfg: ObjectiveConfig):
    """(empirical_loss, flat gradient) sharing one forward pass."""
    cfg.check_m(net)
    X, y = ds.X, ds.y

    if isinstance(net, (SingleLayerReQUNet, QuadraticNet)):
        squared = isinstance(net, QuadraticNet)
        da, dW, db, _, data = _head_gradient(net, X, y, cfg, squared)
        return data + regularizer_single(net, cfg.lam), np.concatenate([da, dW.ravel(), db])

    # Deep net: forward pass keeping preactivations, then backprop.
    H = X
    pres, states = [], [H]
    for v in net.filters:
        P = H @ conv_matrix(v, H.shape[1]).T
        H = leaky_relu(P, net.slope)
        pres.append(P)
        states.append(H)

    da, dW, db, dH, data = _head_gradient(net, states[-1], y, cfg, squared=False)

    dfilters = []
    for k in range(len(net.filters) - 1, -1, -1):
        v, P, H_prev = net.filters[k], pres[k], states[k]
        dpre = dH * leaky_relu_prime(P, net.slope)
        s = v.size
        Hp = np.pad(H_prev, ((0, 0), (s - 1, s - 1)))
        dv = np.array(
            [np.sum(dpre * Hp[:, i : i + dpre.shape[1]]) for i in range(s)]
        )
        dv += cfg.lam_c * (float(v @ v) - 1.0) * v
        dfilters.append(dv)
        dH = dpre @ conv_matrix(v, H_prev.shape[1])
    dfilters.reverse()

    value = data + regularizer_deep(net, cfg.lam, cfg.lam_c)
    return value, np.concatenate([da, dW.ravel(), db, *dfilters])


def gradient(net, ds, cfg: ObjectiveConfig) -> np.ndarray:
    """Flat gradient of empirical_loss in the standard parameter layout."""
    return value_and_gradient(net, ds, cfg)[1]


def neuron_block_norms(net) -> np.ndarray:
    """Per-neuron sqrt(a_j^2 + ||w_j||^2 + b_j^2), the full block magnitude."""
    return np.sqrt(net.a**2 + np.sum(net.W**2, axis=1) + net.b**2)


class FlatObjective:
    """Loss and gradient evaluated directly on flat parameter vectors.

    Same mathematics as empirical_loss / gradient, but with shapes frozen at
    construction so the training loop skips per-call network rebuilding and
    validation.  The generic entry points stay the reference implementation;
    tests pin this class against them.
    """

    def __init__(self, like, ds, cfg: ObjectiveConfig):
        cfg.check_m(like)
        self.X, self.y = ds.X, ds.y
        self.lam, self.lam_c, self.loss = cfg.lam, cfg.lam_c, cfg.loss
        self.m, self.width = like.W.shape
        self.squared = isinstance(like, QuadraticNet)
        self.deep = isinstance(like, DeepConvNet)
        self.filter_sizes = [v.size for v in like.filters] if self.deep else []
        self.slope = like.slope if self.deep else None
        if self.deep:
            # Index template for each layer's banded conv matrix V[j, c] = v[i].
            self.conv_idx = []
            dim = like.input_dim
            for s in self.filter_sizes:
                rows, cols, vi = [], [], []
                for j in range(dim + s - 1):
                    for c in range(dim):
                        i = c + s - 1 - j
                        if 0 <= i < s:
                            rows.append(j)
                            cols.append(c)
                            vi.append(i)
                self.conv_idx.append((dim, np.array(rows), np.array(cols), np.array(vi)))
                dim += s - 1

    def split(self, theta):
        m, w = self.m, self.width
        a = theta[:m]
        W = theta[m : m + m * w].reshape(m, w)
        b = theta[m + m * w : m * (w + 2)]
        filts = []
        pos = m * (w + 2)
        for s in self.filter_sizes:
            filts.append(theta[pos : pos + s])
            pos += s
        return a, W, b, filts

    def _conv_mat(self, k, v):
        dim, rows, cols, vi = self.conv_idx[k]
        V = np.zeros((dim + v.size - 1, dim))
        V[rows, cols] = v[vi]
        return V

    def value_and_grad(self, theta):
        a, W, b, filts = self.split(theta)
        X, y, lam = self.X, self.y, self.lam

        pres, states = [], [X]
        H = X
        for k, v in enumerate(filts):
            P = H @ self._conv_mat(k, v).T
            H = np.where(P >= 0.0, P, self.slope * P)
            pres.append(P)
            states.append(H)

        F = states[-1]
        pre = F @ W.T + b
        act = pre if self.squared else np.maximum(pre, 0.0)
        phi = act * act
        phi_p = 2.0 * act
        f = phi @ a
        z = -y * f
        lp = loss_deriv(self.loss, z)
        data = float(np.sum(loss_value(self.loss, z)))

        u = np.sqrt(np.sum(W * W, axis=1) + b * b)
        absa = np.abs(a)
        reg = float(np.sum(lam * (absa**3 + 2.0 * u**3)) / 3.0)
        g = -lp * y
        da = phi.T @ g + lam * absa * a
        S = g[:, None] * phi_p
        dW = (S.T @ F) * a[:, None] + 2.0 * lam[:, None] * u[:, None] * W
        db = S.sum(axis=0) * a + 2.0 * lam * u * b

        if not self.deep:
            return data + reg, np.concatenate([da, dW.ravel(), db])

        dH = (S * a[None, :]) @ W
        dfilts = [None] * len(filts)
        for k in range(len(filts) - 1, -1, -1):
            v, P, H_prev = filts[k], pres[k], states[k]
            dpre = dH * np.where(P >= 0.0, 1.0, self.slope)
            s = v.size
            Hp = np.pad(H_prev, ((0, 0), (s - 1, s - 1)))
            dv = np.array([np.sum(dpre * Hp[:, i : i + dpre.shape[1]]) for i in range(s)])
            sq = float(v @ v)
            dv += self.lam_c * (sq - 1.0) * v
            reg += 0.25 * self.lam_c * (sq - 1.0) ** 2
            dfilts[k] = dv
            if k > 0:
                dH = dpre @ self._conv_mat(k, v)

        return data + reg, np.concatenate([da, dW.ravel(), db, *dfilts])

    def value(self, theta):
        a, W, b, filts = self.split(theta)
        H = self.X
        for k, v in enumerate(filts):
            P = H @ self._conv_mat(k, v).T
            H = np.where(P >= 0.0, P, self.slope * P)
        pre = H @ W.T + b
        act = pre if self.squared else np.maximum(pre, 0.0)
        f = (act * act) @ a
        data = float(np.sum(loss_value(self.loss, -self.y * f)))
        u = np.sqrt(np.sum(W * W, axis=1) + b * b)
        reg = float(np.sum(self.lam * (np.abs(a) ** 3 + 2.0 * u**3)) / 3.0)
        for v in filts:
            reg += 0.25 * self.lam_c * (float(v @ v) - 1.0) ** 2
        return data + reg


def loss_from_flat(like, ds, cfg: ObjectiveConfig):
    """Closure theta -> empirical_loss for optimizers and difference checks."""

    def fn(theta):
        return empirical_loss(net_from_flat(like, theta), ds, cfg)

    return fn


def finite_diff_check(net, ds, cfg: ObjectiveConfig, step: float = 1e-6) -> float:
    """Max relative gap between the analytic gradient and central differences."""
    fn = loss_from_flat(net, ds, cfg)
    theta = net_to_flat(net)
    g = gradient(net, ds, cfg)
    fd = np.empty_like(theta)
    for i in range(theta.size):
        h = step * (1.0 + abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        fd[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return float(np.max(np.abs(g - fd) / (1.0 + np.abs(g))))


def coercivity_lower_bound(theta_norm: float, lam_min: float, m: int) -> float:
    """Cubic floor lam_min / (3 sqrt(2 m)) * ||theta||^3 for single-layer nets.

    Follows from the power-mean inequality applied to the 2m squared block
    norms; the data term only adds on top.
    """
    return lam_min / (3.0 * np.sqrt(2.0 * m)) * theta_norm**3


def coercivity_gap(net, ds, cfg: ObjectiveConfig) -> float:
    """empirical_loss minus its coercivity floor; negative means violation."""
    theta_norm = float(np.linalg.norm(net_to_flat(net)))
    bound = coercivity_lower_bound(theta_norm, float(np.min(cfg.lam)), net.m)
    return empirical_loss(net, ds, cfg) - bound
