"""Complex-multiplication accounting for the solvers.

Only complex multiplications are counted; additions, divisions, and scalar
transcendentals are excluded.  The determinant or inverse of an n-by-n
Hermitian matrix is charged n**3 multiplications.  Counters are threaded
explicitly through solver calls so independent runs never share state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import SystemConfig

PHASE_CHANNEL_STACK = "channel_stack"
PHASE_W_UPDATE = "w_update"
PHASE_THETA_GRADIENT = "theta_gradient"
PHASE_LINE_SEARCH = "line_search"

PHASES = (PHASE_CHANNEL_STACK, PHASE_W_UPDATE, PHASE_THETA_GRADIENT, PHASE_LINE_SEARCH)


def count_matmul(m: int, k: int, n: int) -> int:
    """Complex multiplications of an (m x k) by (k x n) matrix product."""
    if m <= 0 or k <= 0 or n <= 0:
        raise ValueError("matrix dimensions must be positive")
    return m * k * n


@dataclass
class OpCounter:
    """Tally of complex multiplications, split by solver phase."""

    per_phase: dict[str, int] = field(default_factory=dict)

    @property
    def total_cmul(self) -> int:
        return sum(self.per_phase.values())

    def add(self, phase: str, count: int) -> None:
        self.per_phase[phase] = self.per_phase.get(phase, 0) + int(count)

    def add_matmul(self, phase: str, m: int, k: int, n: int) -> None:
        self.add(phase, count_matmul(m, k, n))

    def add_inverse(self, phase: str, n: int) -> None:
        # n x n Hermitian inverse or determinant: charged n**3.
        self.add(phase, n ** 3)


def predicted_outer_cost(cfg: SystemConfig, i_theta: int, i_w: int) -> int:
    """Dominant-term model of the complex multiplications in one outer iteration.

    ``i_theta`` is the number of line-search steps and ``i_w`` the number of
    inner precoder iterations.  The model keeps only the leading terms, so
    measured counts of the instrumented solver sit above it by a moderate
    constant factor.
    """
    if i_theta < 1 or i_w < 1:
        raise ValueError("iteration counts must be at least 1")
    nt, ns, k, nr, nd = cfg.n_tx, cfg.n_ris, cfg.n_users, cfg.n_rx, cfg.n_streams
    return nt * nr * nd * k ** 2 + i_theta * (ns * nt * nr * k) + i_w * (nr ** 3 * k ** 3)
