"""Random channel generation and composite-channel assembly.

Large-scale fading follows the 3GPP path-loss formulas (LoS and NLoS).  The
BS-RIS and RIS-user links are Rician with factor kappa; the direct BS-user
link is Rayleigh.  Path loss is converted to a linear *attenuation*
L = 10**(-PL_dB/10) and sqrt(L) scales amplitudes on every link.

Randomness comes from numpy's default PCG64 generator seeded with a 64-bit
integer; complex Gaussians are drawn as two independent N(0, 1/2) components
(real block first, then imaginary).  Identical seeds reproduce channel sets
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import OpCounter, PHASE_CHANNEL_STACK
from .model import ChannelSet, SystemConfig, theta_array

CHANNEL_FILE_VERSION = 1


@dataclass(frozen=True)
class GeometryConfig:
    """Node placement (meters, 2-D) and small-scale fading parameters.

    ``rician_k`` is the linear Rician factor shared by the BS-RIS and
    RIS-user links.  ``ris_user_los`` selects which path-loss formula the
    RIS-user link uses (LoS by default, since a Rician link implies a
    line-of-sight component).
    """

    bs_pos: tuple[float, float]
    ris_pos: tuple[float, float]
    user_center: tuple[float, float]
    user_radius: float
    rician_k: float
    ris_user_los: bool = True

    def __post_init__(self):
        if self.user_radius < 0:
            raise ValueError("user_radius must be nonnegative")
        if self.rician_k < 0:
            raise ValueError("rician_k must be nonnegative")


@dataclass(frozen=True)
class SteeringAngles:
    """Angular parameters of the line-of-sight array responses (radians)."""

    bs_ris_aod: float
    bs_ris_aoa: float
    ris_user_aod: tuple[float, ...]
    ris_user_aoa: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ris_user_aod", tuple(self.ris_user_aod))
        object.__setattr__(self, "ris_user_aoa", tuple(self.ris_user_aoa))
        values = (self.bs_ris_aod, self.bs_ris_aoa, *self.ris_user_aod, *self.ris_user_aoa)
        if not all(np.isfinite(v) for v in values):
            raise ValueError("steering angles must be finite")


def path_loss_db(distance_m: float, los: bool) -> float:
    """3GPP path loss in dB at the given distance."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    if los:
        return 35.6 + 22.0 * np.log10(distance_m)
    return 32.6 + 36.7 * np.log10(distance_m)


def path_loss_linear(distance_m: float, los: bool) -> float:
    """Linear power attenuation 10**(-PL_dB/10); always in (0, 1) beyond 1 m."""
    return 10.0 ** (-path_loss_db(distance_m, los) / 10.0)


def steering_vector(n: int, angle: float) -> np.ndarray:
    """Half-wavelength ULA response: entry m is exp(j*pi*m*sin(angle))."""
    if n < 1:
        raise ValueError("array size must be at least 1")
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def sample_user_positions(geo: GeometryConfig, n_users: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform positions in the disk around geo.user_center (radius ~ sqrt(u))."""
    radii = geo.user_radius * np.sqrt(rng.uniform(size=n_users))
    bearing = rng.uniform(0.0, 2.0 * np.pi, size=n_users)
    center = np.asarray(geo.user_center, dtype=float)
    return center + np.stack([radii * np.cos(bearing), radii * np.sin(bearing)], axis=1)


def angles_from_geometry(geo: GeometryConfig, n_users: int, rng: np.random.Generator) -> SteeringAngles:
    """Default angle assignment.

    The BS and RIS arrays are assumed broadside to the BS-RIS axis, so the
    BS-RIS departure and arrival angles are zero.  Per-user angles are drawn
    uniformly from (-pi/2, pi/2).
    """
    user = rng.uniform(-np.pi / 2, np.pi / 2, size=(2, n_users))
    return SteeringAngles(
        bs_ris_aod=0.0,
        bs_ris_aoa=0.0,
        ris_user_aod=tuple(user[0]),
        ris_user_aoa=tuple(user[1]),
    )


def _complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def generate_channels(cfg: SystemConfig, geo: GeometryConfig, angles: SteeringAngles,
                      user_positions: np.ndarray, rng_seed: int) -> ChannelSet:
    """Draw one channel realization.

    Rician mixing uses kappa2 = 1/(1+kappa) and kappa1 = 1 - kappa2; the
    line-of-sight part is the outer product of steering vectors.  Draw order
    is fixed (scattered BS-RIS matrix, then per user the RIS-user and direct
    matrices) so a seed pins the realization exactly.
    """
    rng = np.random.default_rng(rng_seed)
    positions = np.asarray(user_positions, dtype=float)
    if positions.shape != (cfg.n_users, 2):
        raise ValueError(f"user_positions must have shape {(cfg.n_users, 2)}, got {positions.shape}")

    kappa2 = 1.0 / (1.0 + geo.rician_k)
    kappa1 = 1.0 - kappa2
    bs = np.asarray(geo.bs_pos, dtype=float)
    ris = np.asarray(geo.ris_pos, dtype=float)

    l_bs_ris = path_loss_linear(float(np.linalg.norm(ris - bs)), los=True)
    los_g = np.outer(steering_vector(cfg.n_ris, angles.bs_ris_aoa),
                     steering_vector(cfg.n_tx, angles.bs_ris_aod).conj())
    bs_ris = (np.sqrt(l_bs_ris * kappa1) * los_g
              + np.sqrt(l_bs_ris * kappa2) * _complex_gaussian(rng, (cfg.n_ris, cfg.n_tx)))

    ris_user = []
    direct = []
    for k in range(cfg.n_users):
        pos = positions[k]
        l_ris_user = path_loss_linear(float(np.linalg.norm(pos - ris)), los=geo.ris_user_los)
        los_u = np.outer(steering_vector(cfg.n_rx, angles.ris_user_aoa[k]),
                         steering_vector(cfg.n_ris, angles.ris_user_aod[k]).conj())
        ris_user.append(np.sqrt(l_ris_user * kappa1) * los_u
                        + np.sqrt(l_ris_user * kappa2) * _complex_gaussian(rng, (cfg.n_rx, cfg.n_ris)))
        l_direct = path_loss_linear(float(np.linalg.norm(pos - bs)), los=False)
        direct.append(np.sqrt(l_direct) * _complex_gaussian(rng, (cfg.n_rx, cfg.n_tx)))

    return ChannelSet(bs_ris=bs_ris, ris_user=tuple(ris_user), direct=tuple(direct))


def drop_ris_paths(ch: ChannelSet) -> ChannelSet:
    """Channel set with the RIS-user links zeroed (direct link only)."""
    return ChannelSet(
        bs_ris=ch.bs_ris,
        ris_user=tuple(np.zeros_like(u) for u in ch.ris_user),
        direct=ch.direct,
    )


def composite_channel(ch: ChannelSet, theta, k: int,
                      counter: OpCounter | None = None,
                      phase: str = PHASE_CHANNEL_STACK) -> np.ndarray:
    """Effective BS-to-user-k channel D_k + U_k diag(theta) G.

    ``theta`` may be a PhaseVector or a raw complex vector (finite-difference
    probes step off the unit-modulus set).  The diagonal phase matrix is
    never materialized; the RIS-user columns are scaled instead.
    """
    t = theta_array(theta)
    scaled = ch.ris_user[k] * t[np.newaxis, :]
    if counter is not None:
        n_rx, n_ris = ch.ris_user[k].shape
        counter.add(phase, n_rx * n_ris)                       # column scaling
        counter.add_matmul(phase, n_rx, n_ris, ch.bs_ris.shape[1])
    return ch.direct[k] + scaled @ ch.bs_ris


def stack_channels(ch: ChannelSet, theta,
                   counter: OpCounter | None = None,
                   phase: str = PHASE_CHANNEL_STACK) -> np.ndarray:
    """All users' composite channels stacked row-wise, (n_users*n_rx, n_tx)."""
    blocks = [composite_channel(ch, theta, k, counter, phase) for k in range(ch.n_users)]
    return np.concatenate(blocks, axis=0)


def save_channels(path, ch: ChannelSet) -> None:
    """Write one realization to an .npz replay file (format version 1)."""
    np.savez(
        path,
        format_version=np.int64(CHANNEL_FILE_VERSION),
        bs_ris=ch.bs_ris,
        ris_user=np.stack(ch.ris_user),
        direct=np.stack(ch.direct),
    )


def load_channels(path) -> ChannelSet:
    """Read a replay file written by :func:`save_channels`."""
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHANNEL_FILE_VERSION:
            raise ValueError(f"unsupported channel file version {version}")
        return ChannelSet(
            bs_ris=data["bs_ris"],
            ris_user=tuple(data["ris_user"]),
            direct=tuple(data["direct"]),
        )
