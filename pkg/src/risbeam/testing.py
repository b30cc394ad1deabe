"""Synthetic problem instances for verification and gradient checks.

These draw unit-scale complex Gaussian channels (no path loss) so that
finite-difference probes and bound checks are numerically well conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (AuxPrecoderSet, ChannelSet, PhaseVector, PrecoderSet,
                    SystemConfig)


@dataclass(frozen=True)
class RandomInstance:
    config: SystemConfig
    channels: ChannelSet
    theta: PhaseVector
    precoders: PrecoderSet
    aux: AuxPrecoderSet


def _cx(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_instance(rng: np.random.Generator, n_tx: int = 8, n_ris: int = 16,
                    n_users: int = 2, n_rx: int = 2, n_streams: int = 2,
                    power_bs: float = 10.0, noise_power: float = 0.1,
                    weights: tuple[float, ...] | None = None) -> RandomInstance:
    """One random instance with full-power precoders and a random phase vector."""
    if weights is None:
        weights = tuple([1.0 / n_users] * n_users)
    cfg = SystemConfig(n_tx=n_tx, n_ris=n_ris, n_users=n_users, n_rx=n_rx,
                       n_streams=n_streams, power_bs=power_bs,
                       noise_power=noise_power, weights=weights)
    channels = ChannelSet(
        bs_ris=_cx(rng, (n_ris, n_tx)),
        ris_user=tuple(_cx(rng, (n_rx, n_ris)) for _ in range(n_users)),
        direct=tuple(_cx(rng, (n_rx, n_tx)) for _ in range(n_users)),
    )
    theta = PhaseVector.from_angles(rng.uniform(0.0, 2.0 * np.pi, size=n_ris))
    raw = [_cx(rng, (n_tx, n_streams)) for _ in range(n_users)]
    total = sum(np.sum(np.abs(w) ** 2) for w in raw)
    scale = np.sqrt(power_bs / total)
    precoders = PrecoderSet(w=tuple(scale * w for w in raw))
    aux = AuxPrecoderSet(
        f=tuple(_cx(rng, (n_users * n_rx, n_streams)) for _ in range(n_users)))
    return RandomInstance(config=cfg, channels=channels, theta=theta,
                          precoders=precoders, aux=aux)
