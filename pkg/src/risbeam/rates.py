"""Objective evaluation: per-user rates, weighted sum rate, and the
low-dimensional reformulation that shares its optimum.

All log-determinants go through a Cholesky factorization of the Hermitian
argument (never an explicit determinant), and interference covariances are
accumulated from the small per-user products H_k W_j so the cost stays
linear in the number of BS antennas.
"""

from __future__ import annotations

import numpy as np

from .channel import stack_channels
from .metrics import OpCounter, PHASE_W_UPDATE
from .model import AuxPrecoderSet, ChannelSet, PrecoderSet, SystemConfig


def _sym(m: np.ndarray) -> np.ndarray:
    """Hermitian part; guards Cholesky against rounding drift."""
    return 0.5 * (m + m.conj().T)


def logdet_hermitian(m: np.ndarray) -> float:
    """log det of a Hermitian positive definite matrix via Cholesky."""
    chol = np.linalg.cholesky(_sym(m))
    return float(2.0 * np.sum(np.log(np.real(np.diag(chol)))))


def _check_finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a.view(float))):
            raise ValueError("non-finite entries in channel or precoder")


def _user_gram_terms(h_k: np.ndarray, w: tuple[np.ndarray, ...], k: int,
                     counter: OpCounter | None, phase: str) -> tuple[np.ndarray, np.ndarray]:
    """Signal-plus-interference and interference-only covariances at user k."""
    n_rx = h_k.shape[0]
    full = np.zeros((n_rx, n_rx), dtype=complex)
    own = None
    for j, w_j in enumerate(w):
        e_j = h_k @ w_j
        gram = e_j @ e_j.conj().T
        if counter is not None:
            counter.add_matmul(phase, n_rx, h_k.shape[1], w_j.shape[1])
            counter.add_matmul(phase, n_rx, w_j.shape[1], n_rx)
        full += gram
        if j == k:
            own = gram
    return full, full - own


def user_rate(ch: ChannelSet, theta, w: PrecoderSet, k: int, noise: float) -> float:
    """Achievable rate of user k in nats/s/Hz, interference treated as noise."""
    h_k = ch.direct[k] + (ch.ris_user[k] * np.asarray(
        getattr(theta, "theta", theta))[np.newaxis, :]) @ ch.bs_ris
    _check_finite(h_k, *w.w)
    full, interf = _user_gram_terms(h_k, w.w, k, None, PHASE_W_UPDATE)
    eye = noise * np.eye(h_k.shape[0])
    return logdet_hermitian(eye + full) - logdet_hermitian(eye + interf)


def wsr_of_stack(h_stack: np.ndarray, w: PrecoderSet, cfg: SystemConfig,
                 counter: OpCounter | None = None,
                 phase: str = PHASE_W_UPDATE) -> float:
    """Weighted sum rate evaluated on a prebuilt stacked channel."""
    _check_finite(h_stack, *w.w)
    eye = cfg.noise_power * np.eye(cfg.n_rx)
    total = 0.0
    for k in range(cfg.n_users):
        h_k = h_stack[k * cfg.n_rx:(k + 1) * cfg.n_rx]
        full, interf = _user_gram_terms(h_k, w.w, k, counter, phase)
        if counter is not None:
            counter.add_inverse(phase, cfg.n_rx)
            counter.add_inverse(phase, cfg.n_rx)
        total += cfg.weights[k] * (logdet_hermitian(eye + full) - logdet_hermitian(eye + interf))
    return total


def wsr(ch: ChannelSet, theta, w: PrecoderSet, cfg: SystemConfig) -> float:
    """Weighted sum rate at the given phases and precoders (nats/s/Hz)."""
    return wsr_of_stack(stack_channels(ch, theta), w, cfg)


def _reduced_gram(h_stack: np.ndarray) -> np.ndarray:
    """H H^H of the stacked channel, the only channel statistic the reduced
    problem needs."""
    return h_stack @ h_stack.conj().T


def noise_scale(h_bar: np.ndarray, f: AuxPrecoderSet) -> float:
    """Sum over users of tr(F_k^H (H H^H) F_k), i.e. ||H^H F||_F^2."""
    total = 0.0
    for f_k in f.f:
        total += float(np.real(np.sum(f_k.conj() * (h_bar @ f_k))))
    return total


def equivalent_rate_terms(h_bar: np.ndarray, f: AuxPrecoderSet, cfg: SystemConfig,
                          counter: OpCounter | None = None,
                          phase: str = PHASE_W_UPDATE) -> float:
    """Reduced-problem weighted sum rate from a precomputed H H^H."""
    scale = noise_scale(h_bar, f)
    if counter is not None:
        n = cfg.n_stack
        for f_k in f.f:
            counter.add_matmul(phase, n, n, f_k.shape[1])
            counter.add(phase, n * f_k.shape[1])
    if scale <= 0.0:
        raise ValueError("degenerate precoder: every aux block vanishes on the channel range")
    sigma_eff = cfg.noise_power / cfg.power_bs * scale
    eye = sigma_eff * np.eye(cfg.n_rx)
    total = 0.0
    for k in range(cfg.n_users):
        rows = slice(k * cfg.n_rx, (k + 1) * cfg.n_rx)
        full = np.zeros((cfg.n_rx, cfg.n_rx), dtype=complex)
        own = None
        for j, f_j in enumerate(f.f):
            x = h_bar[rows] @ f_j
            gram = x @ x.conj().T
            if counter is not None:
                counter.add_matmul(phase, cfg.n_rx, cfg.n_stack, f_j.shape[1])
                counter.add_matmul(phase, cfg.n_rx, f_j.shape[1], cfg.n_rx)
            full += gram
            if j == k:
                own = gram
        if counter is not None:
            counter.add_inverse(phase, cfg.n_rx)
            counter.add_inverse(phase, cfg.n_rx)
        total += cfg.weights[k] * (logdet_hermitian(eye + full)
                                   - logdet_hermitian(eye + full - own))
    return total


def equivalent_rate(h_stack: np.ndarray, f: AuxPrecoderSet, cfg: SystemConfig,
                    counter: OpCounter | None = None,
                    phase: str = PHASE_W_UPDATE) -> float:
    """Weighted sum rate of the reduced, power-normalized formulation.

    Matches :func:`wsr` evaluated at :func:`recover_precoder` output, and is
    invariant to a global rescaling of the aux precoders.
    """
    _check_finite(h_stack, *f.f)
    if counter is not None:
        counter.add_matmul(phase, cfg.n_stack, h_stack.shape[1], cfg.n_stack)
    return equivalent_rate_terms(_reduced_gram(h_stack), f, cfg, counter, phase)


def recover_precoder(h_stack: np.ndarray, f: AuxPrecoderSet, cfg: SystemConfig,
                     counter: OpCounter | None = None) -> PrecoderSet:
    """Map aux precoders back to physical ones: W_k = sqrt(xi) H^H F_k.

    The common factor xi spends the full power budget, so the returned set
    meets the power constraint with equality.
    """
    h_herm = h_stack.conj().T
    candidates = [h_herm @ f_k for f_k in f.f]
    if counter is not None:
        for f_k in f.f:
            counter.add_matmul(PHASE_W_UPDATE, cfg.n_tx, cfg.n_stack, f_k.shape[1])
    total = sum(float(np.sum(np.abs(c) ** 2)) for c in candidates)
    if total <= 0.0:
        raise ValueError("degenerate precoder: H^H F is zero")
    xi = cfg.power_bs / total
    if counter is not None:
        counter.add(PHASE_W_UPDATE, sum(c.size for c in candidates))
    return PrecoderSet(w=tuple(np.sqrt(xi) * c for c in candidates))
