"""Outer alternating optimization: precoder update, then one scaled
projected-gradient phase update, until the weighted sum rate stops improving.

The baselines share this code path.  "bls1" swaps in the unscaled projected
gradient with the Armijo rule, "bls2" takes the phase gradient from the
reduced objective (single-antenna users only), and the two one-shot schemes
optimize the precoder once at fixed phases.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import drop_ris_paths, stack_channels
from .metrics import OpCounter, PHASE_CHANNEL_STACK
from .model import (ChannelSet, PhaseVector, PrecoderSet, SolveTrace,
                    SystemConfig, UnsupportedConfigError)
from .precoder_sca import matched_filter_init, refit_aux, solve_precoder
from .rates import recover_precoder
from .ris_spgm import (grad_equiv_theta_miso, grad_wsr_theta,
                       line_search_armijo, line_search_equivalent,
                       line_search_proposed, scaling_matrix)


class AlgorithmVariant(str, Enum):
    """Solver variants compared in the experiments."""

    PROPOSED = "proposed"
    BLS1 = "bls1_conventional_pg"
    BLS2 = "bls2_equivalent_theta"
    RANDOM_PHASE = "random_phase"
    WITHOUT_RIS = "without_ris"


@dataclass(frozen=True)
class SolveResult:
    """Final iterates and the per-iteration trace of one run."""

    w_final: PrecoderSet
    theta_final: PhaseVector
    wsr_final: float
    trace: SolveTrace
    sca_histories: tuple[tuple[float, ...], ...] | None = None


def solve(ch: ChannelSet, cfg: SystemConfig, variant: AlgorithmVariant,
          theta0: PhaseVector, seed: int | None = None,
          counter: OpCounter | None = None,
          collect_sca_history: bool = False) -> SolveResult:
    """Run one solver variant from the shared initial phases.

    Every variant is deterministic given (``ch``, ``cfg``, ``theta0``); the
    ``seed`` argument only identifies the run for bookkeeping.  Pass an
    :class:`OpCounter` to collect complex-multiplication counts.
    """
    variant = AlgorithmVariant(variant)
    if variant is AlgorithmVariant.BLS2 and (cfg.n_rx != 1 or cfg.n_streams != 1):
        raise UnsupportedConfigError(
            "the reduced-objective phase update supports single-antenna users only")

    start = time.perf_counter()
    if variant is AlgorithmVariant.WITHOUT_RIS:
        ch = drop_ris_paths(ch)

    theta = theta0
    h_stack = stack_channels(ch, theta, counter, PHASE_CHANNEL_STACK)
    aux = matched_filter_init(cfg)
    trace = SolveTrace()
    sca_histories: list[tuple[float, ...]] = []

    if variant in (AlgorithmVariant.RANDOM_PHASE, AlgorithmVariant.WITHOUT_RIS):
        solved = solve_precoder(aux, h_stack, cfg, counter)
        sca_histories.append(solved.rate_history)
        trace.wsr_per_outer_iter.append(solved.rate_history[-1])
        trace.step_sizes.append(0.0)
        trace.line_search_steps.append(0)
        trace.sca_iters.append(solved.n_iters)
        trace.cmul_per_outer_iter.append(counter.total_cmul if counter else 0)
        trace.elapsed_per_outer_iter.append(time.perf_counter() - start)
        trace.complex_mult_count = counter.total_cmul if counter else 0
        trace.wall_time_sec = time.perf_counter() - start
        return SolveResult(
            w_final=solved.precoders, theta_final=theta,
            wsr_final=solved.rate_history[-1], trace=trace,
            sca_histories=tuple(sca_histories) if collect_sca_history else None)

    def reduced_gram(h: np.ndarray) -> np.ndarray:
        if counter is not None:
            counter.add_matmul(PHASE_CHANNEL_STACK, cfg.n_stack, cfg.n_tx, cfg.n_stack)
        return h @ h.conj().T

    h_bar = reduced_gram(h_stack)
    w = None
    previous = None
    stall_streak = 0
    for _ in range(cfg.ao_max_iters):
        solved = solve_precoder(aux, h_stack, cfg, counter, h_bar=h_bar)
        w = solved.precoders
        if collect_sca_history:
            sca_histories.append(solved.rate_history)
        # The reduced rate of the final aux precoder equals the weighted sum
        # rate of the recovered precoder at the current phases.
        r_current = solved.rate_history[-1]

        if variant is AlgorithmVariant.PROPOSED:
            grad = grad_wsr_theta(ch, theta, w, cfg, h_stack=h_stack, counter=counter)
            search = line_search_proposed(ch, w, theta, grad, scaling_matrix(grad),
                                          cfg, r_current, counter)
        elif variant is AlgorithmVariant.BLS1:
            grad = grad_wsr_theta(ch, theta, w, cfg, h_stack=h_stack, counter=counter)
            search = line_search_armijo(ch, w, theta, grad, cfg, r_current, counter)
        else:
            grad = grad_equiv_theta_miso(ch, theta, solved.aux, cfg, counter)
            search = line_search_equivalent(ch, solved.aux, theta, grad,
                                            scaling_matrix(grad), cfg,
                                            r_current, counter)

        theta = search.theta
        if search.h_stack is not None:
            h_stack = search.h_stack
            h_bar = reduced_gram(h_stack)
        if variant is AlgorithmVariant.BLS2 and not search.stalled:
            # Keep the recorded value a true weighted sum rate: re-spend the
            # power budget on the moved channel.
            w = recover_precoder(h_stack, solved.aux, cfg, counter)
        achieved = search.rate

        trace.wsr_per_outer_iter.append(achieved)
        trace.step_sizes.append(search.alpha)
        trace.line_search_steps.append(search.steps)
        trace.sca_iters.append(solved.n_iters)
        trace.cmul_per_outer_iter.append(counter.total_cmul if counter else 0)
        trace.elapsed_per_outer_iter.append(time.perf_counter() - start)

        stop = False
        if previous is not None and achieved - previous <= cfg.ao_tol:
            if search.stalled:
                # A stalled phase search with no rate progress left: give the
                # precoder update one more chance before giving up.
                stall_streak += 1
                stop = stall_streak >= 2
            else:
                stop = True
        else:
            stall_streak = 0
        previous = achieved
        if stop:
            break
        aux = refit_aux(h_stack, w, cfg, counter, h_bar=h_bar)

    trace.complex_mult_count = counter.total_cmul if counter else 0
    trace.wall_time_sec = time.perf_counter() - start
    return SolveResult(
        w_final=w, theta_final=theta, wsr_final=trace.wsr_per_outer_iter[-1],
        trace=trace,
        sca_histories=tuple(sca_histories) if collect_sca_history else None)
