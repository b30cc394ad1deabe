"""Inner precoder optimization: successive concave minorization with a
closed-form maximizer.

The loop works entirely in the reduced variable space (dimension
n_users*n_rx, independent of the BS array size).  Each iteration builds a
tight concave quadratic minorant of the reduced weighted sum rate at the
current iterate and jumps to its unique maximizer, which solves a small
linear system.  The produced objective sequence is nondecreasing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .metrics import OpCounter, PHASE_W_UPDATE
from .model import AuxPrecoderSet, PrecoderSet, SystemConfig
from .rates import logdet_hermitian, noise_scale, recover_precoder


@dataclass(frozen=True)
class ScaIntermediates:
    """Expansion-point quantities of one minorization step.

    ``x_hat[k]`` is the effective signal H_bar_k F_k, ``y_hat[k]`` the
    interference-plus-scaled-noise covariance, ``a_hat[k]`` the curvature
    matrix of the quadratic minorant (Hermitian PSD after clipping), and
    ``b_hat[k]`` the linear-term coefficient X_hat^H Y_hat^{-1}.  ``mu`` is
    the nonnegative power-coupling scalar, and ``rate`` the reduced weighted
    sum rate at the expansion point (free by-product of the build).
    """

    x_hat: tuple[np.ndarray, ...]
    y_hat: tuple[np.ndarray, ...]
    a_hat: tuple[np.ndarray, ...]
    b_hat: tuple[np.ndarray, ...]
    mu: float
    rate: float


@dataclass(frozen=True)
class PrecoderSolve:
    """Result of one inner precoder optimization."""

    precoders: PrecoderSet
    aux: AuxPrecoderSet
    n_iters: int
    rate_history: tuple[float, ...]


def matched_filter_init(cfg: SystemConfig) -> AuxPrecoderSet:
    """Default start: unit blocks of the stacked identity, so the recovered
    precoder is the matched filter H_k^H (first n_streams columns)."""
    eye = np.eye(cfg.n_stack, dtype=complex)
    blocks = tuple(eye[:, k * cfg.n_rx: k * cfg.n_rx + cfg.n_streams].copy()
                   for k in range(cfg.n_users))
    return AuxPrecoderSet(f=blocks)


def _clip_psd(m: np.ndarray) -> np.ndarray:
    """Hermitian part with negative eigenvalues (rounding noise) zeroed."""
    sym = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    if vals[0] >= 0.0:
        return sym
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T


def build_intermediates(f: AuxPrecoderSet, h_stack: np.ndarray, cfg: SystemConfig,
                        counter: OpCounter | None = None) -> ScaIntermediates:
    """Expansion-point quantities at the aux precoder ``f``."""
    h_bar = h_stack @ h_stack.conj().T
    if counter is not None:
        counter.add_matmul(PHASE_W_UPDATE, cfg.n_stack, h_stack.shape[1], cfg.n_stack)
    return _build_intermediates(h_bar, f, cfg, counter)


def _build_intermediates(h_bar: np.ndarray, f: AuxPrecoderSet, cfg: SystemConfig,
                         counter: OpCounter | None) -> ScaIntermediates:
    n_rx, n_users = cfg.n_rx, cfg.n_users
    # One pass of H_bar F_j serves both the noise scale and every user's
    # signal/interference blocks.
    lifted = [h_bar @ f_j for f_j in f.f]
    scale = sum(float(np.real(np.sum(f_j.conj() * hf_j)))
                for f_j, hf_j in zip(f.f, lifted))
    if counter is not None:
        for f_j in f.f:
            counter.add_matmul(PHASE_W_UPDATE, cfg.n_stack, cfg.n_stack, f_j.shape[1])
            counter.add(PHASE_W_UPDATE, cfg.n_stack * f_j.shape[1])
    if scale <= 0.0:
        raise ValueError("degenerate precoder: every aux block vanishes on the channel range")
    sigma_eff = cfg.noise_power / cfg.power_bs * scale

    x_hat, y_hat, a_hat, b_hat = [], [], [], []
    mu = 0.0
    rate = 0.0
    for k in range(n_users):
        rows = slice(k * n_rx, (k + 1) * n_rx)
        products = [hf_j[rows] for hf_j in lifted]
        if counter is not None:
            for f_j in f.f:
                counter.add_matmul(PHASE_W_UPDATE, n_rx, f_j.shape[1], n_rx)
        interference = sigma_eff * np.eye(n_rx, dtype=complex)
        for j, p in enumerate(products):
            if j != k:
                interference += p @ p.conj().T
        x_k = products[k]
        y_inv = np.linalg.inv(0.5 * (interference + interference.conj().T))
        total_inv = np.linalg.inv(0.5 * (interference + interference.conj().T) + x_k @ x_k.conj().T)
        if counter is not None:
            counter.add_inverse(PHASE_W_UPDATE, n_rx)
            counter.add_inverse(PHASE_W_UPDATE, n_rx)
            counter.add_matmul(PHASE_W_UPDATE, n_rx, x_k.shape[1], n_rx)
            counter.add_inverse(PHASE_W_UPDATE, n_rx)   # eigenvalue clipping of a_hat
        a_k = _clip_psd(y_inv - total_inv)
        b_k = x_k.conj().T @ y_inv
        if counter is not None:
            counter.add_matmul(PHASE_W_UPDATE, x_k.shape[1], n_rx, n_rx)
        x_hat.append(x_k)
        y_hat.append(interference)
        a_hat.append(a_k)
        b_hat.append(b_k)
        mu += cfg.weights[k] * float(np.real(np.trace(a_k)))
        gain = b_k @ x_k
        if counter is not None:
            counter.add_matmul(PHASE_W_UPDATE, x_k.shape[1], n_rx, x_k.shape[1])
            counter.add_inverse(PHASE_W_UPDATE, x_k.shape[1])
        rate += cfg.weights[k] * logdet_hermitian(np.eye(x_k.shape[1]) + gain)
    mu *= cfg.noise_power / cfg.power_bs
    return ScaIntermediates(x_hat=tuple(x_hat), y_hat=tuple(y_hat),
                            a_hat=tuple(a_hat), b_hat=tuple(b_hat),
                            mu=mu, rate=rate)


def minorant_value(f: AuxPrecoderSet, inter: ScaIntermediates,
                   h_stack: np.ndarray, cfg: SystemConfig) -> float:
    """Weighted concave quadratic minorant built at ``inter``, evaluated at ``f``.

    Equals the reduced weighted sum rate when ``f`` is the expansion point
    and never exceeds it elsewhere.
    """
    h_bar = h_stack @ h_stack.conj().T
    scale = noise_scale(h_bar, f)
    n_rx = cfg.n_rx
    total = 0.0
    for k in range(cfg.n_users):
        rows = slice(k * n_rx, (k + 1) * n_rx)
        gain = inter.b_hat[k] @ inter.x_hat[k]
        g_k = logdet_hermitian(np.eye(gain.shape[0]) + gain)
        g_k -= float(np.real(np.trace(gain)))
        g_k += 2.0 * float(np.real(np.trace(inter.b_hat[k] @ (h_bar[rows] @ f.f[k]))))
        a_k = inter.a_hat[k]
        for f_j in f.f:
            p = h_bar[rows] @ f_j
            g_k -= float(np.real(np.trace(p.conj().T @ (a_k @ p))))
        g_k -= cfg.noise_power / cfg.power_bs * float(np.real(np.trace(a_k))) * scale
        total += cfg.weights[k] * g_k
    return total


def _closed_form_step(inter: ScaIntermediates, h_bar: np.ndarray, cfg: SystemConfig,
                      counter: OpCounter | None) -> AuxPrecoderSet:
    """Maximizer of the weighted minorant: solves (mu I + A_tilde H_bar) F = B_tilde."""
    n, n_rx, n_d = cfg.n_stack, cfg.n_rx, cfg.n_streams
    a_tilde = np.zeros((n, n), dtype=complex)
    b_tilde = np.zeros((n, cfg.n_users * n_d), dtype=complex)
    for k in range(cfg.n_users):
        rows = slice(k * n_rx, (k + 1) * n_rx)
        cols = slice(k * n_d, (k + 1) * n_d)
        a_tilde[rows, rows] = cfg.weights[k] * inter.a_hat[k].conj().T
        b_tilde[rows, cols] = cfg.weights[k] * inter.b_hat[k].conj().T
    system = inter.mu * np.eye(n) + a_tilde @ h_bar
    if counter is not None:
        counter.add_matmul(PHASE_W_UPDATE, n, n, n)
        counter.add_inverse(PHASE_W_UPDATE, n)
        counter.add_matmul(PHASE_W_UPDATE, n, n, b_tilde.shape[1])
    try:
        solution = np.linalg.solve(system, b_tilde)
    except np.linalg.LinAlgError:
        warnings.warn("singular minorant system, falling back to least squares",
                      RuntimeWarning, stacklevel=2)
        solution, *_ = np.linalg.lstsq(system, b_tilde, rcond=None)
    blocks = tuple(solution[:, k * n_d:(k + 1) * n_d].copy() for k in range(cfg.n_users))
    return AuxPrecoderSet(f=blocks)


def sca_update(f_prev: AuxPrecoderSet, h_stack: np.ndarray, cfg: SystemConfig,
               counter: OpCounter | None = None) -> AuxPrecoderSet:
    """One minorize-maximize step from ``f_prev``; never decreases the
    reduced weighted sum rate (up to rounding)."""
    h_bar = h_stack @ h_stack.conj().T
    inter = _build_intermediates(h_bar, f_prev, cfg, counter)
    return _closed_form_step(inter, h_bar, cfg, counter)


def solve_precoder(f0: AuxPrecoderSet, h_stack: np.ndarray, cfg: SystemConfig,
                   counter: OpCounter | None = None,
                   h_bar: np.ndarray | None = None) -> PrecoderSolve:
    """Run the inner loop from ``f0`` until the relative rate improvement
    drops below ``cfg.sca_tol`` or ``cfg.sca_max_iters`` is hit.

    Returns the recovered physical precoders (power constraint tight), the
    final aux precoder, the iteration count, and the rate history.  Pass a
    precomputed ``h_bar`` (= H H^H) to skip rebuilding it.
    """
    if h_bar is None:
        h_bar = h_stack @ h_stack.conj().T
        if counter is not None:
            counter.add_matmul(PHASE_W_UPDATE, cfg.n_stack, h_stack.shape[1], cfg.n_stack)
    inter = _build_intermediates(h_bar, f0, cfg, counter)
    history = [inter.rate]
    f = f0
    n_iters = 0
    while n_iters < cfg.sca_max_iters:
        f_new = _closed_form_step(inter, h_bar, cfg, counter)
        inter_new = _build_intermediates(h_bar, f_new, cfg, counter)
        n_iters += 1
        history.append(inter_new.rate)
        improvement = history[-1] - history[-2]
        f, inter = f_new, inter_new
        if improvement < cfg.sca_tol * max(abs(history[-2]), 1e-12):
            break
    precoders = recover_precoder(h_stack, f, cfg, counter)
    return PrecoderSolve(precoders=precoders, aux=f, n_iters=n_iters,
                         rate_history=tuple(history))


def refit_aux(h_stack: np.ndarray, w: PrecoderSet, cfg: SystemConfig,
              counter: OpCounter | None = None,
              h_bar: np.ndarray | None = None) -> AuxPrecoderSet:
    """Aux precoder whose recovery reproduces (at least) the rates of ``w``
    on the channel ``h_stack``.

    Solves (H H^H) F = H W, which projects each precoder onto the channel
    row space; the discarded component carries no signal, so the recovered
    full-power precoder can only do better.  Used to warm start the inner
    loop across outer iterations without breaking monotonicity.
    """
    if h_bar is None:
        h_bar = h_stack @ h_stack.conj().T
        if counter is not None:
            counter.add_matmul(PHASE_W_UPDATE, cfg.n_stack, h_stack.shape[1], cfg.n_stack)
    rhs = np.concatenate([h_stack @ w_k for w_k in w.w], axis=1)
    if counter is not None:
        for w_k in w.w:
            counter.add_matmul(PHASE_W_UPDATE, cfg.n_stack, h_stack.shape[1], w_k.shape[1])
        counter.add_inverse(PHASE_W_UPDATE, cfg.n_stack)
        counter.add_matmul(PHASE_W_UPDATE, cfg.n_stack, cfg.n_stack, rhs.shape[1])
    try:
        solution = np.linalg.solve(h_bar, rhs)
    except np.linalg.LinAlgError:
        solution, *_ = np.linalg.lstsq(h_bar, rhs, rcond=None)
    n_d = cfg.n_streams
    blocks = tuple(solution[:, k * n_d:(k + 1) * n_d].copy() for k in range(cfg.n_users))
    aux = AuxPrecoderSet(f=blocks)
    if aux.frob_norm() <= 0.0 or not np.all(np.isfinite(solution.view(float))):
        return matched_filter_init(cfg)
    return aux
