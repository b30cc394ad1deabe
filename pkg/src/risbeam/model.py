"""Core domain types, unit conversions, and validation.

All internal computation uses linear units (watts); dBm appears only at the
configuration boundary.  Rates are in nats/s/Hz throughout; a display-only
bits conversion lives in the experiment harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UnsupportedConfigError(ValueError):
    """Raised when an algorithm is asked to run on a configuration it does not support."""


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters for one problem instance.

    Powers are linear watts.  ``weights`` are the per-user priority weights;
    the solvers accept any positive weights but :func:`validate_config`
    reports a violation when they do not sum to one.
    """

    n_tx: int               # BS antennas
    n_ris: int              # RIS reflecting elements
    n_users: int            # users served simultaneously
    n_rx: int               # receive antennas per user
    n_streams: int          # data streams per user (<= n_rx)
    power_bs: float         # total BS power budget, watts
    noise_power: float      # receiver noise power, watts
    weights: tuple[float, ...]
    sca_tol: float = 1e-4       # inner precoder loop relative-improvement stop
    sca_max_iters: int = 100
    ao_tol: float = 1e-5        # outer loop WSR-improvement stop
    ls_shrink: float = 0.5      # step-size backtracking factor, in (0, 1)
    ls_beta: float = 1e-7       # slope parameter of the step acceptance rule
    ls_max_steps: int = 60
    ao_max_iters: int = 500

    @property
    def n_stack(self) -> int:
        """Rows of the stacked multiuser channel (n_users * n_rx)."""
        return self.n_users * self.n_rx

    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a dBm power figure to linear watts."""
    if not np.isfinite(p_dbm):
        raise ValueError(f"power must be finite, got {p_dbm}")
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    """Convert linear watts to dBm."""
    if not (np.isfinite(p_watts) and p_watts > 0):
        raise ValueError(f"power must be positive and finite, got {p_watts}")
    return 10.0 * np.log10(p_watts) + 30.0


def validate_config(cfg: SystemConfig) -> list[str]:
    """Check every SystemConfig invariant; return the full list of violations.

    An empty list means the configuration is valid.  The solvers themselves
    never require the weights to be normalized; that check is reported here
    so experiment inputs can be linted.
    """
    errors: list[str] = []
    for name in ("n_tx", "n_ris", "n_users", "n_rx", "n_streams",
                 "sca_max_iters", "ls_max_steps", "ao_max_iters"):
        value = getattr(cfg, name)
        if not (isinstance(value, (int, np.integer)) and value > 0):
            errors.append(f"{name} must be a positive integer, got {value!r}")
    if cfg.n_streams > cfg.n_rx:
        errors.append("n_streams exceeds n_rx")
    if cfg.n_rx > cfg.n_tx:
        errors.append("n_rx exceeds n_tx")
    if not cfg.power_bs > 0:
        errors.append(f"power_bs must be positive, got {cfg.power_bs}")
    if not cfg.noise_power > 0:
        errors.append(f"noise_power must be positive, got {cfg.noise_power}")
    if len(cfg.weights) != cfg.n_users:
        errors.append(f"weights must have n_users={cfg.n_users} entries, got {len(cfg.weights)}")
    if any(w <= 0 for w in cfg.weights):
        errors.append("weights must all be strictly positive")
    elif abs(sum(cfg.weights) - 1.0) > 1e-9:
        errors.append("weights must sum to 1")
    if not 0.0 < cfg.ls_shrink < 1.0:
        errors.append(f"ls_shrink must lie in (0, 1), got {cfg.ls_shrink}")
    if not cfg.ls_beta > 0:
        errors.append(f"ls_beta must be positive, got {cfg.ls_beta}")
    for name in ("sca_tol", "ao_tol"):
        value = getattr(cfg, name)
        if not (np.isfinite(value) and value >= 0):
            errors.append(f"{name} must be a nonnegative finite real, got {value}")
    return errors


@dataclass(frozen=True)
class PhaseVector:
    """RIS phase-shift vector on the unit-modulus torus.

    Every entry must have modulus one (tolerance 1e-12).  Construction via
    :meth:`from_angles` is exact up to floating point rounding.
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=complex)
        object.__setattr__(self, "theta", theta)
        if theta.ndim != 1:
            raise ValueError("theta must be a 1-D complex vector")
        if not np.all(np.abs(np.abs(theta) - 1.0) <= 1e-12):
            worst = float(np.max(np.abs(np.abs(theta) - 1.0)))
            raise ValueError(f"phase vector entries must be unit modulus (worst deviation {worst:.3e})")

    @classmethod
    def from_angles(cls, phases: np.ndarray) -> "PhaseVector":
        return cls(np.exp(1j * np.asarray(phases, dtype=float)))

    def __len__(self) -> int:
        return self.theta.shape[0]


def theta_array(theta) -> np.ndarray:
    """Accept a PhaseVector or a raw complex vector and return the ndarray.

    Low-level channel and rate routines take raw vectors so that objective
    values can be probed off the unit-modulus set (finite differences).
    """
    if isinstance(theta, PhaseVector):
        return theta.theta
    return np.asarray(theta, dtype=complex)


@dataclass(frozen=True)
class ChannelSet:
    """One channel realization: BS-RIS, RIS-user, and direct BS-user links.

    Shapes: ``bs_ris`` is (n_ris, n_tx), each ``ris_user[k]`` is
    (n_rx, n_ris), each ``direct[k]`` is (n_rx, n_tx).
    """

    bs_ris: np.ndarray
    ris_user: tuple[np.ndarray, ...]
    direct: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "ris_user", tuple(self.ris_user))
        object.__setattr__(self, "direct", tuple(self.direct))

    @property
    def n_users(self) -> int:
        return len(self.ris_user)


def validate_channels(ch: ChannelSet, cfg: SystemConfig) -> list[str]:
    """Check channel dimensions against the config and entry finiteness."""
    errors: list[str] = []
    if ch.bs_ris.shape != (cfg.n_ris, cfg.n_tx):
        errors.append(f"bs_ris shape {ch.bs_ris.shape} != {(cfg.n_ris, cfg.n_tx)}")
    if len(ch.ris_user) != cfg.n_users or len(ch.direct) != cfg.n_users:
        errors.append("per-user channel lists must have n_users entries")
    for k, (u, d) in enumerate(zip(ch.ris_user, ch.direct)):
        if u.shape != (cfg.n_rx, cfg.n_ris):
            errors.append(f"ris_user[{k}] shape {u.shape} != {(cfg.n_rx, cfg.n_ris)}")
        if d.shape != (cfg.n_rx, cfg.n_tx):
            errors.append(f"direct[{k}] shape {d.shape} != {(cfg.n_rx, cfg.n_tx)}")
    arrays = [ch.bs_ris, *ch.ris_user, *ch.direct]
    if not all(np.all(np.isfinite(a.view(float))) for a in arrays):
        errors.append("channel entries must all be finite")
    return errors


@dataclass(frozen=True)
class PrecoderSet:
    """Physical transmit precoders, one (n_tx, n_streams) matrix per user."""

    w: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(self.w))

    def total_power(self) -> float:
        return float(sum(np.sum(np.abs(wk) ** 2) for wk in self.w))


def validate_precoders(prec: PrecoderSet, cfg: SystemConfig) -> list[str]:
    """Check shapes and the total transmit power budget (relative 1e-9)."""
    errors: list[str] = []
    if len(prec.w) != cfg.n_users:
        errors.append("precoder list must have n_users entries")
    for k, wk in enumerate(prec.w):
        if wk.shape != (cfg.n_tx, cfg.n_streams):
            errors.append(f"w[{k}] shape {wk.shape} != {(cfg.n_tx, cfg.n_streams)}")
    power = prec.total_power()
    if power > cfg.power_bs * (1.0 + 1e-9):
        errors.append(f"total power {power:.6g} exceeds budget {cfg.power_bs:.6g}")
    return errors


@dataclass(frozen=True)
class AuxPrecoderSet:
    """Low-dimensional precoder variables of the reduced problem.

    Each block ``f[k]`` has shape (n_users * n_rx, n_streams).  At least one
    block must be nonzero for the reduced objective to be well defined.
    """

    f: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))

    def frob_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(np.abs(fk) ** 2) for fk in self.f)))


def validate_aux(aux: AuxPrecoderSet, cfg: SystemConfig) -> list[str]:
    errors: list[str] = []
    if len(aux.f) != cfg.n_users:
        errors.append("aux precoder list must have n_users entries")
    for k, fk in enumerate(aux.f):
        if fk.shape != (cfg.n_stack, cfg.n_streams):
            errors.append(f"f[{k}] shape {fk.shape} != {(cfg.n_stack, cfg.n_streams)}")
    if aux.frob_norm() == 0.0:
        errors.append("all aux precoder blocks are zero")
    return errors


@dataclass
class SolveTrace:
    """Per-iteration record of one solver run.

    ``wsr_per_outer_iter`` holds the weighted sum rate (nats/s/Hz) after each
    outer iteration and is nondecreasing up to 1e-9 absolute slack for the
    iterative variants.  ``complex_mult_count`` is the cumulative number of
    complex multiplications charged by the instrumented solver (0 when the
    run was not instrumented).
    """

    wsr_per_outer_iter: list[float] = field(default_factory=list)
    step_sizes: list[float] = field(default_factory=list)
    line_search_steps: list[int] = field(default_factory=list)
    sca_iters: list[int] = field(default_factory=list)
    complex_mult_count: int = 0
    wall_time_sec: float = 0.0
    # Per-iteration snapshots backing the trace files.
    cmul_per_outer_iter: list[int] = field(default_factory=list)
    elapsed_per_outer_iter: list[float] = field(default_factory=list)

    @property
    def n_outer_iters(self) -> int:
        return len(self.wsr_per_outer_iter)
