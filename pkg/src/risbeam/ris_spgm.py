"""Phase-shift optimization: closed-form gradient, scaled projected gradient
step, and backtracking step-size searches.

The gradient follows the complex-gradient convention
grad f = (df/dRe + j df/dIm) / 2, so a real-axis central difference of the
objective approximates twice the real part of a gradient entry.  The scaled
step normalizes each gradient entry to unit modulus, which makes the step
size directly comparable to the phase displacement and lets a very loose
sufficient-increase test accept almost immediately.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import stack_channels
from .metrics import OpCounter, PHASE_LINE_SEARCH, PHASE_THETA_GRADIENT
from .model import (AuxPrecoderSet, ChannelSet, PhaseVector, PrecoderSet,
                    SystemConfig, UnsupportedConfigError, theta_array)
from .rates import equivalent_rate, wsr_of_stack

_FREEZE_EPS = 1e-300    # gradient entries below this modulus are frozen
_PROJ_EPS = 1e-12       # projection inputs below this modulus keep the old phase


@dataclass(frozen=True)
class GradientWorkspace:
    """Per-user intermediates of the efficient gradient evaluation.

    ``e[k, j]`` holds H_k W_j, ``m[k, j]`` its Gram matrix, and ``n[k, j]``
    the cross product H_k W_j W_j^H.  ``z``/``z_tilde`` are the
    signal-plus-noise and interference-plus-noise covariances (Hermitian
    positive definite) and ``j_full``/``j_tilde`` the matching channel-times-
    covariance products.
    """

    e: np.ndarray         # (K, K, n_rx, n_streams)
    m: np.ndarray         # (K, K, n_rx, n_rx)
    n: np.ndarray         # (K, K, n_rx, n_tx)
    z: np.ndarray         # (K, n_rx, n_rx)
    z_tilde: np.ndarray   # (K, n_rx, n_rx)
    j_full: np.ndarray    # (K, n_rx, n_tx)
    j_tilde: np.ndarray   # (K, n_rx, n_tx)


def gradient_workspace(h_stack: np.ndarray, w: PrecoderSet, cfg: SystemConfig,
                       counter: OpCounter | None = None) -> GradientWorkspace:
    """Build the small per-user products the gradient is assembled from."""
    k_users, n_rx, n_tx, n_d = cfg.n_users, cfg.n_rx, cfg.n_tx, cfg.n_streams
    e = np.empty((k_users, k_users, n_rx, n_d), dtype=complex)
    m = np.empty((k_users, k_users, n_rx, n_rx), dtype=complex)
    n = np.empty((k_users, k_users, n_rx, n_tx), dtype=complex)
    for k in range(k_users):
        h_k = h_stack[k * n_rx:(k + 1) * n_rx]
        for j, w_j in enumerate(w.w):
            e[k, j] = h_k @ w_j
            m[k, j] = e[k, j] @ e[k, j].conj().T
            n[k, j] = e[k, j] @ w_j.conj().T
            if counter is not None:
                counter.add_matmul(PHASE_THETA_GRADIENT, n_rx, n_tx, n_d)
                counter.add_matmul(PHASE_THETA_GRADIENT, n_rx, n_d, n_rx)
                counter.add_matmul(PHASE_THETA_GRADIENT, n_rx, n_d, n_tx)
    noise_eye = cfg.noise_power * np.eye(n_rx)
    z = m.sum(axis=1) + noise_eye
    j_full = n.sum(axis=1)
    own = np.arange(k_users)
    z_tilde = z - m[own, own]
    j_tilde = j_full - n[own, own]
    return GradientWorkspace(e=e, m=m, n=n, z=z, z_tilde=z_tilde,
                             j_full=j_full, j_tilde=j_tilde)


def grad_wsr_theta(ch: ChannelSet, theta, w: PrecoderSet, cfg: SystemConfig,
                   h_stack: np.ndarray | None = None,
                   counter: OpCounter | None = None) -> np.ndarray:
    """Complex gradient of the weighted sum rate with respect to the phases.

    Pass ``h_stack`` when the stacked composite channel at ``theta`` is
    already available; otherwise it is rebuilt here.
    """
    if h_stack is None:
        h_stack = stack_channels(ch, theta, counter, PHASE_THETA_GRADIENT)
    ws = gradient_workspace(h_stack, w, cfg, counter)
    g_herm = ch.bs_ris.conj().T
    grad = np.zeros(cfg.n_ris, dtype=complex)
    for k in range(cfg.n_users):
        sym_z = 0.5 * (ws.z[k] + ws.z[k].conj().T)
        sym_zt = 0.5 * (ws.z_tilde[k] + ws.z_tilde[k].conj().T)
        delta = np.linalg.solve(sym_z, ws.j_full[k]) - np.linalg.solve(sym_zt, ws.j_tilde[k])
        outer = delta @ g_herm
        if counter is not None:
            counter.add_inverse(PHASE_THETA_GRADIENT, cfg.n_rx)
            counter.add_matmul(PHASE_THETA_GRADIENT, cfg.n_rx, cfg.n_rx, cfg.n_tx)
            counter.add_inverse(PHASE_THETA_GRADIENT, cfg.n_rx)
            counter.add_matmul(PHASE_THETA_GRADIENT, cfg.n_rx, cfg.n_rx, cfg.n_tx)
            counter.add_matmul(PHASE_THETA_GRADIENT, cfg.n_rx, cfg.n_tx, cfg.n_ris)
            counter.add(PHASE_THETA_GRADIENT, cfg.n_rx * cfg.n_ris)
        grad += cfg.weights[k] * np.einsum("rn,rn->n", ch.ris_user[k].conj(), outer)
    return grad


def scaling_matrix(grad: np.ndarray) -> np.ndarray:
    """Diagonal of the gradient-normalizing scaling, as a real vector.

    Entries are 1/|grad_n|; coordinates with (numerically) zero gradient are
    frozen by a zero scale instead of an infinite one.
    """
    mags = np.abs(grad)
    return np.divide(1.0, mags, out=np.zeros_like(mags), where=mags >= _FREEZE_EPS)


def project_unit_modulus(v: np.ndarray, fallback: PhaseVector) -> PhaseVector:
    """Radial projection onto the unit-modulus set.

    Entries with vanishing modulus keep the corresponding phase of
    ``fallback`` (the previous iterate), where the projection is set-valued.
    """
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    safe = np.where(mags > _PROJ_EPS, mags, 1.0)
    projected = np.where(mags > _PROJ_EPS, v / safe, fallback.theta)
    return PhaseVector(projected)


def spg_step(theta: PhaseVector, grad: np.ndarray, xi: np.ndarray,
             alpha: float) -> PhaseVector:
    """Scaled projected gradient step with step size ``alpha``."""
    if not alpha > 0:
        raise ValueError("step size must be positive")
    return project_unit_modulus(theta.theta + alpha * (xi * grad), theta)


@dataclass(frozen=True)
class LineSearchResult:
    """Outcome of one backtracking search.

    ``stalled`` means no candidate was accepted within the step budget; the
    returned phases are then the unchanged input and ``h_stack`` is None.
    """

    theta: PhaseVector
    alpha: float
    steps: int
    stalled: bool
    rate: float
    h_stack: np.ndarray | None


def _initial_alpha(r_current: float) -> float:
    return 1.0 / r_current if r_current > 0 else 1.0


def _backtrack(theta: PhaseVector, direction: np.ndarray, cfg: SystemConfig,
               r_current: float,
               score: Callable[[PhaseVector], tuple[float, np.ndarray | None]],
               accept: Callable[[float, np.ndarray, float], bool]) -> LineSearchResult:
    """Shrink the step until ``accept`` passes or the budget runs out."""
    if not np.any(direction):
        # Frozen direction: the step cannot move, accept the iterate as is.
        return LineSearchResult(theta=theta, alpha=_initial_alpha(r_current),
                                steps=1, stalled=False, rate=r_current, h_stack=None)
    alpha = _initial_alpha(r_current)
    base = theta.theta
    for step in range(1, cfg.ls_max_steps + 1):
        candidate = project_unit_modulus(base + alpha * direction, theta)
        rate, h_cand = score(candidate)
        displacement = candidate.theta - base
        if accept(rate, displacement, alpha):
            return LineSearchResult(theta=candidate, alpha=alpha, steps=step,
                                    stalled=False, rate=rate, h_stack=h_cand)
        alpha *= cfg.ls_shrink
    return LineSearchResult(theta=theta, alpha=alpha, steps=cfg.ls_max_steps,
                            stalled=True, rate=r_current, h_stack=None)


def line_search_proposed(ch: ChannelSet, w: PrecoderSet, theta: PhaseVector,
                         grad: np.ndarray, xi: np.ndarray, cfg: SystemConfig,
                         r_current: float,
                         counter: OpCounter | None = None) -> LineSearchResult:
    """Scaled-step search with the loose sufficient-increase rule.

    Starts at step size 1/r_current and accepts the first candidate whose
    rate beats the current one by at least beta/(2 n_ris) times the squared
    phase displacement.
    """
    def score(candidate: PhaseVector) -> tuple[float, np.ndarray]:
        h_cand = stack_channels(ch, candidate, counter, PHASE_LINE_SEARCH)
        return wsr_of_stack(h_cand, w, cfg, counter, PHASE_LINE_SEARCH), h_cand

    slope = cfg.ls_beta / (2.0 * cfg.n_ris)

    def accept(rate: float, displacement: np.ndarray, alpha: float) -> bool:
        return rate >= r_current + slope * float(np.sum(np.abs(displacement) ** 2))

    return _backtrack(theta, xi * grad, cfg, r_current, score, accept)


def line_search_armijo(ch: ChannelSet, w: PrecoderSet, theta: PhaseVector,
                       grad: np.ndarray, cfg: SystemConfig, r_current: float,
                       counter: OpCounter | None = None) -> LineSearchResult:
    """Unscaled projected-gradient search with the Armijo-Goldstein rule.

    Acceptance requires the rate to exceed the first-order prediction minus
    the squared displacement over twice the step size, the classical
    sufficient-increase test along the projection arc.  It holds for any
    step size below the reciprocal curvature bound, so the backtracking
    terminates.  Baseline use only.
    """
    def score(candidate: PhaseVector) -> tuple[float, np.ndarray]:
        h_cand = stack_channels(ch, candidate, counter, PHASE_LINE_SEARCH)
        return wsr_of_stack(h_cand, w, cfg, counter, PHASE_LINE_SEARCH), h_cand

    def accept(rate: float, displacement: np.ndarray, alpha: float) -> bool:
        predicted = 2.0 * float(np.real(np.vdot(grad, displacement)))
        curvature = float(np.sum(np.abs(displacement) ** 2)) / (2.0 * alpha)
        return rate >= r_current + predicted - curvature

    return _backtrack(theta, grad.copy(), cfg, r_current, score, accept)


def line_search_equivalent(ch: ChannelSet, f: AuxPrecoderSet, theta: PhaseVector,
                           grad: np.ndarray, xi: np.ndarray, cfg: SystemConfig,
                           r_current: float,
                           counter: OpCounter | None = None) -> LineSearchResult:
    """Scaled-step search scored on the reduced objective at fixed aux
    precoders; used by the baseline that keeps the low-dimensional
    formulation for the phase update."""
    def score(candidate: PhaseVector) -> tuple[float, np.ndarray]:
        h_cand = stack_channels(ch, candidate, counter, PHASE_LINE_SEARCH)
        return equivalent_rate(h_cand, f, cfg, counter, PHASE_LINE_SEARCH), h_cand

    slope = cfg.ls_beta / (2.0 * cfg.n_ris)

    def accept(rate: float, displacement: np.ndarray, alpha: float) -> bool:
        return rate >= r_current + slope * float(np.sum(np.abs(displacement) ** 2))

    return _backtrack(theta, xi * grad, cfg, r_current, score, accept)


# ---------------------------------------------------------------------------
# Single-antenna-user specializations (batched over candidate phase vectors).
# ---------------------------------------------------------------------------

def _require_miso(cfg: SystemConfig, what: str) -> None:
    if cfg.n_rx != 1 or cfg.n_streams != 1:
        raise UnsupportedConfigError(f"{what} requires single-antenna users (n_rx = n_streams = 1)")


def _miso_arrays(ch: ChannelSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u_rows = np.concatenate(ch.ris_user, axis=0)   # (K, n_ris)
    d_rows = np.concatenate(ch.direct, axis=0)     # (K, n_tx)
    return u_rows, d_rows, ch.bs_ris


def _grad_orig_miso_batch(thetas: np.ndarray, u_rows: np.ndarray, d_rows: np.ndarray,
                          g: np.ndarray, w_cols: np.ndarray, weights: np.ndarray,
                          noise: float) -> np.ndarray:
    """Original-objective gradient for a batch of phase vectors.

    ``thetas`` is (B, n_ris), ``w_cols`` is (n_tx, K); returns (B, n_ris).
    """
    gw = g @ w_cols                                    # (n_ris, K)
    dw = d_rows @ w_cols                               # (K, K)
    e = np.einsum("bn,kn,nj->bkj", thetas, u_rows, gw) + dw
    power = np.abs(e) ** 2
    z_full = power.sum(axis=2) + noise                 # (B, K)
    own = np.einsum("bkk->bk", power)
    z_part = z_full - own
    v_full = np.einsum("bkj,nj->bkn", e, gw.conj())
    e_own = np.einsum("bkk->bk", e)
    v_part = v_full - e_own[:, :, np.newaxis] * gw.conj().T[np.newaxis, :, :]
    ratio = v_full / z_full[:, :, np.newaxis] - v_part / z_part[:, :, np.newaxis]
    return np.einsum("k,kn,bkn->bn", weights, u_rows.conj(), ratio)


def _grad_equiv_miso_batch(thetas: np.ndarray, u_rows: np.ndarray, d_rows: np.ndarray,
                           g: np.ndarray, f_cols: np.ndarray, weights: np.ndarray,
                           noise_over_power: float) -> np.ndarray:
    """Reduced-objective gradient for a batch of phase vectors.

    ``f_cols`` is the (K, K) matrix whose columns are the per-user aux
    precoders.  Returns (B, n_ris).
    """
    h = np.einsum("bn,kn,nt->bkt", thetas, u_rows, g) + d_rows   # (B, K, n_tx)
    h_bar = np.einsum("bkt,bjt->bkj", h, h.conj())               # (B, K, K)
    s = h_bar @ f_cols                                           # s[b,k,j] = hbar_k f_j
    c_cols = u_rows.conj().T @ f_cols                            # (n_ris, K)
    hh_f = np.einsum("bmt,mj->bjt", h.conj(), f_cols)            # H^H f_j, (B, K, n_tx)
    r_cols = np.einsum("nt,bjt->bjn", g.conj(), hh_f.conj())     # conj(G H^H f_j)
    noise_grad = np.einsum("nm,bmn->bn", c_cols, r_cols)         # sum_m c_m * r_m
    quad = np.einsum("km,bkm->b", f_cols.conj(), s)              # sum_m f_m^H Hbar f_m
    total_noise = noise_over_power * np.real(quad)               # (B,)

    sig = np.abs(s) ** 2
    den_full = sig.sum(axis=2) + total_noise[:, np.newaxis]      # (B, K)
    own_sig = np.einsum("bkk->bk", sig)
    den_part = den_full - own_sig

    term_c = np.einsum("nj,bkj->bkn", c_cols, s.conj())          # sum_j conj(s_kj) c_j
    term_r = np.einsum("bkj,bjn->bkn", s, r_cols)                # sum_j s_kj r_j
    q_cols = np.einsum("nt,bkt->bkn", g.conj(), h)               # conj(G) h_k^T
    num_full = q_cols * term_c + u_rows.conj()[np.newaxis] * term_r \
        + noise_over_power * noise_grad[:, np.newaxis, :]

    s_own = np.einsum("bkk->bk", s)
    own_term = (q_cols * s_own.conj()[:, :, np.newaxis] * c_cols.T[np.newaxis]
                + u_rows.conj()[np.newaxis] * s_own[:, :, np.newaxis] * r_cols)
    num_part = num_full - own_term

    ratio = num_full / den_full[:, :, np.newaxis] - num_part / den_part[:, :, np.newaxis]
    return np.einsum("k,bkn->bn", weights, ratio)


def grad_equiv_theta_miso(ch: ChannelSet, theta, f: AuxPrecoderSet,
                          cfg: SystemConfig,
                          counter: OpCounter | None = None) -> np.ndarray:
    """Complex gradient of the reduced objective (fixed aux precoders) with
    respect to the phases, for single-antenna users."""
    _require_miso(cfg, "the reduced-objective phase gradient")
    u_rows, d_rows, g = _miso_arrays(ch)
    f_cols = np.concatenate(f.f, axis=1)
    t = theta_array(theta)[np.newaxis, :]
    if counter is not None:
        k, ns, nt = cfg.n_users, cfg.n_ris, cfg.n_tx
        counter.add(PHASE_THETA_GRADIENT, 2 * k * ns * nt + 3 * k * k * ns + 2 * k * k * nt)
    out = _grad_equiv_miso_batch(t, u_rows, d_rows, g, f_cols,
                                 cfg.weight_array(),
                                 cfg.noise_power / cfg.power_bs)
    return out[0]


def estimate_lipschitz(ch: ChannelSet, fixed, cfg: SystemConfig,
                       n_samples: int, which: str, seed: int,
                       chunk: int = 512) -> float:
    """Empirical Lipschitz constant of the selected phase gradient.

    Draws ``n_samples`` independent pairs of uniform unit-modulus phase
    vectors and returns the largest ratio of gradient difference to point
    difference.  ``which`` selects the objective: "original" keeps the
    physical precoders (a PrecoderSet) fixed, "equivalent" keeps the aux
    precoders (an AuxPrecoderSet) fixed and needs single-antenna users.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 sample pairs")
    if which not in ("original", "equivalent"):
        raise ValueError(f"unknown objective {which!r}")
    rng = np.random.default_rng(seed)

    if which == "equivalent":
        _require_miso(cfg, "the equivalent-objective estimator")
        if not isinstance(fixed, AuxPrecoderSet):
            raise TypeError("equivalent objective requires an AuxPrecoderSet")
        u_rows, d_rows, g = _miso_arrays(ch)
        f_cols = np.concatenate(fixed.f, axis=1)

        def grad_batch(thetas: np.ndarray) -> np.ndarray:
            return _grad_equiv_miso_batch(thetas, u_rows, d_rows, g, f_cols,
                                          cfg.weight_array(),
                                          cfg.noise_power / cfg.power_bs)
    else:
        if not isinstance(fixed, PrecoderSet):
            raise TypeError("original objective requires a PrecoderSet")
        if cfg.n_rx == 1 and cfg.n_streams == 1:
            u_rows, d_rows, g = _miso_arrays(ch)
            w_cols = np.concatenate(fixed.w, axis=1)

            def grad_batch(thetas: np.ndarray) -> np.ndarray:
                return _grad_orig_miso_batch(thetas, u_rows, d_rows, g, w_cols,
                                             cfg.weight_array(), cfg.noise_power)
        else:
            def grad_batch(thetas: np.ndarray) -> np.ndarray:
                return np.stack([grad_wsr_theta(ch, t, fixed, cfg) for t in thetas])

    best = 0.0
    remaining = n_samples
    while remaining > 0:
        take = min(chunk, remaining)
        remaining -= take
        # Interleaved pair draw: a prefix of the sample budget reuses the
        # exact same pairs, so the estimate is monotone in n_samples.
        pairs = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(take, 2, cfg.n_ris)))
        first, second = pairs[:, 0, :], pairs[:, 1, :]
        diff = np.linalg.norm(first - second, axis=1)
        grads = grad_batch(first) - grad_batch(second)
        valid = diff > 1e-12
        if np.any(valid):
            ratios = np.linalg.norm(grads[valid], axis=1) / diff[valid]
            best = max(best, float(ratios.max()))
    return best
