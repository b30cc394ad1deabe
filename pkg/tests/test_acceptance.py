"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to stream the per-criterion
lines.  All checks are property-based at desk scale (n_tx=16, n_ris=64,
n_users=2, n_rx=n_streams=2 unless stated); the full-scale preset stays
available for manual runs through configs/full_scale.json.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from risbeam.ao import AlgorithmVariant, solve
from risbeam.channel import stack_channels
from risbeam.harness import (ExperimentSpec, default_geometry,
                             desk_system_config, experiment_lipschitz,
                             realize_channels, run_experiment,
                             strip_timing_columns)
from risbeam.metrics import OpCounter
from risbeam.model import AuxPrecoderSet
from risbeam.precoder_sca import (build_intermediates, matched_filter_init,
                                  minorant_value, sca_update, solve_precoder)
from risbeam.rates import equivalent_rate, recover_precoder, wsr
from risbeam.ris_spgm import (grad_equiv_theta_miso, grad_wsr_theta,
                              line_search_proposed, scaling_matrix)
from risbeam.testing import random_instance

DELTA = 1e-6


def report(number: int, name: str, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {number:2d} {name}: {verdict} ({detail})")
    assert passed, f"criterion {number} {name}: {detail}"


def finite_difference(objective, theta, delta=DELTA):
    grad = np.zeros(theta.shape[0], dtype=complex)
    for n in range(theta.shape[0]):
        probe = np.zeros_like(theta)
        probe[n] = delta
        d_re = (objective(theta + probe) - objective(theta - probe)) / (2 * delta)
        d_im = (objective(theta + 1j * probe) - objective(theta - 1j * probe)) / (2 * delta)
        grad[n] = 0.5 * (d_re + 1j * d_im)
    return grad


def desk_spec(cfg, master_seed=101, variants=(AlgorithmVariant.PROPOSED,),
              output_dir="unused", **spec_overrides):
    fields = dict(base_config=cfg, geometry=default_geometry(), variants=variants,
                  n_realizations=1, master_seed=master_seed, output_dir=output_dir,
                  save_channel_files=False)
    fields.update(spec_overrides)
    return ExperimentSpec(**fields)


def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(1001)
    worst = 0.0
    for i in range(20):
        n_ris = int(rng.choice([8, 16, 32, 64]))
        n_users = int(rng.integers(1, 4))
        inst = random_instance(rng, n_tx=8, n_ris=n_ris, n_users=n_users,
                               n_rx=2, n_streams=2,
                               weights=tuple([1.0 / n_users] * n_users))
        grad = grad_wsr_theta(inst.channels, inst.theta, inst.precoders, inst.config)
        fd = finite_difference(
            lambda t: wsr(inst.channels, t, inst.precoders, inst.config),
            inst.theta.theta)
        worst = max(worst, float(np.linalg.norm(fd - grad) / np.linalg.norm(grad)))
    report(1, "sum-rate phase gradient vs central differences", worst <= 1e-4,
           f"max relative error {worst:.3e} <= 1e-4 over 20 instances")


def test_criterion_2_reduced_gradient_correctness():
    rng = np.random.default_rng(1002)
    worst = 0.0
    for i in range(20):
        n_ris = int(rng.choice([8, 16, 32]))
        n_users = int(rng.integers(1, 4))
        inst = random_instance(rng, n_tx=8, n_ris=n_ris, n_users=n_users,
                               n_rx=1, n_streams=1,
                               weights=tuple([1.0 / n_users] * n_users))
        grad = grad_equiv_theta_miso(inst.channels, inst.theta, inst.aux, inst.config)
        fd = finite_difference(
            lambda t: equivalent_rate(stack_channels(inst.channels, t),
                                      inst.aux, inst.config),
            inst.theta.theta)
        worst = max(worst, float(np.linalg.norm(fd - grad) / np.linalg.norm(grad)))
    report(2, "reduced-objective phase gradient (single-antenna users)",
           worst <= 1e-4, f"max relative error {worst:.3e} <= 1e-4 over 20 instances")


def test_criterion_3_bridge_identity():
    rng = np.random.default_rng(1003)
    worst = 0.0
    for i in range(100):
        n_users = int(rng.integers(1, 4))
        inst = random_instance(rng, n_users=n_users, n_rx=2, n_tx=8, n_ris=16,
                               weights=tuple([1.0 / n_users] * n_users))
        h = stack_channels(inst.channels, inst.theta)
        lhs = wsr(inst.channels, inst.theta,
                  recover_precoder(h, inst.aux, inst.config), inst.config)
        rhs = equivalent_rate(h, inst.aux, inst.config)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    report(3, "physical/reduced objective bridge", worst <= 1e-9,
           f"max relative gap {worst:.3e} <= 1e-9 over 100 triples")


def test_criterion_4_minorant_validity():
    rng = np.random.default_rng(1004)
    worst_equality = 0.0
    worst_slack = 0.0
    for i in range(20):
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        inter = build_intermediates(inst.aux, h, inst.config)
        at_point = minorant_value(inst.aux, inter, h, inst.config)
        objective = equivalent_rate(h, inst.aux, inst.config)
        worst_equality = max(worst_equality,
                             abs(at_point - objective) / max(abs(objective), 1e-300))
        for _ in range(100):
            probe = AuxPrecoderSet(f=tuple(
                (rng.standard_normal(fk.shape) + 1j * rng.standard_normal(fk.shape))
                / np.sqrt(2) for fk in inst.aux.f))
            gap = (equivalent_rate(h, probe, inst.config)
                   - minorant_value(probe, inter, h, inst.config))
            worst_slack = min(worst_slack, gap) if gap < worst_slack else worst_slack
    passed = worst_equality <= 1e-9 and worst_slack >= -1e-9
    report(4, "minorant tight at expansion and below objective", passed,
           f"equality gap {worst_equality:.3e} <= 1e-9, "
           f"worst bound slack {worst_slack:.3e} >= -1e-9")


def _minorant_gradient_norms(f, inter, h_stack, cfg):
    """Norm of the explicit per-block minorant gradient at ``f``, plus the
    norm of the assembled linear-term blocks it is measured against."""
    h_bar = h_stack @ h_stack.conj().T
    n_rx = cfg.n_rx
    grad_sq = 0.0
    for j in range(cfg.n_users):
        rows_j = slice(j * n_rx, (j + 1) * n_rx)
        grad = cfg.weights[j] * h_bar[rows_j].conj().T @ inter.b_hat[j].conj().T
        for k in range(cfg.n_users):
            rows_k = slice(k * n_rx, (k + 1) * n_rx)
            a_herm = inter.a_hat[k].conj().T
            grad -= cfg.weights[k] * (
                cfg.noise_power / cfg.power_bs * np.trace(a_herm) * (h_bar @ f.f[j])
                + h_bar[rows_k].conj().T @ a_herm @ (h_bar[rows_k] @ f.f[j]))
        grad_sq += float(np.sum(np.abs(grad) ** 2))
    b_sq = sum((wk * np.linalg.norm(bk)) ** 2
               for wk, bk in zip(cfg.weights, inter.b_hat))
    return np.sqrt(grad_sq), np.sqrt(b_sq)


def test_criterion_5_closed_form_stationarity():
    rng = np.random.default_rng(1005)
    worst = 0.0
    for i in range(20):
        inst = random_instance(rng)
        h = stack_channels(inst.channels, inst.theta)
        inter = build_intermediates(inst.aux, h, inst.config)
        updated = sca_update(inst.aux, h, inst.config)
        grad_norm, b_norm = _minorant_gradient_norms(updated, inter, h, inst.config)
        worst = max(worst, grad_norm / b_norm)
    report(5, "closed-form precoder update is stationary", worst <= 1e-7,
           f"max gradient/linear-term ratio {worst:.3e} <= 1e-7 over 20 instances")


def test_criterion_6_monotone_convergence():
    cfg = replace(desk_system_config(), ao_max_iters=500)
    worst_dip = 0.0
    max_iters = 0
    for realization in range(50):
        spec = desk_spec(cfg, master_seed=2006)
        ch, theta0 = realize_channels(spec, cfg, 0, realization)
        res = solve(ch, cfg, AlgorithmVariant.PROPOSED, theta0,
                    collect_sca_history=True)
        outer = np.asarray(res.trace.wsr_per_outer_iter)
        if outer.size > 1:
            worst_dip = min(worst_dip, float(np.min(np.diff(outer))))
        for history in res.sca_histories:
            seq = np.asarray(history)
            if seq.size > 1:
                worst_dip = min(worst_dip, float(np.min(np.diff(seq))))
        max_iters = max(max_iters, res.trace.n_outer_iters)
    passed = worst_dip >= -1e-9 and max_iters <= 500
    report(6, "monotone inner and outer objective sequences", passed,
           f"worst objective dip {worst_dip:.3e} >= -1e-9, "
           f"max outer iterations {max_iters} <= 500, 50 runs")


def test_criterion_7_line_search_termination():
    cfg = desk_system_config()
    steps = []
    for realization in range(100):
        spec = desk_spec(cfg, master_seed=2007)
        ch, theta0 = realize_channels(spec, cfg, 0, realization)
        h = stack_channels(ch, theta0)
        solved = solve_precoder(matched_filter_init(cfg), h, cfg)
        grad = grad_wsr_theta(ch, theta0, solved.precoders, cfg, h_stack=h)
        res = line_search_proposed(ch, solved.precoders, theta0, grad,
                                   scaling_matrix(grad), cfg,
                                   solved.rate_history[-1])
        assert not res.stalled
        steps.append(res.steps)
    median = float(np.median(steps))
    passed = max(steps) < 60 and median <= 3
    report(7, "proposed line search terminates quickly", passed,
           f"max steps {max(steps)} < 60, median {median:.1f} <= 3, 100 runs")


def test_criterion_8_algorithm_ordering():
    cfg = replace(desk_system_config(), ao_max_iters=500)
    finals = {v: [] for v in (AlgorithmVariant.PROPOSED, AlgorithmVariant.BLS1,
                              AlgorithmVariant.RANDOM_PHASE,
                              AlgorithmVariant.WITHOUT_RIS)}
    iters = {AlgorithmVariant.PROPOSED: [], AlgorithmVariant.BLS1: []}
    for realization in range(100):
        spec = desk_spec(cfg, master_seed=2008)
        ch, theta0 = realize_channels(spec, cfg, 0, realization)
        for variant in finals:
            res = solve(ch, cfg, variant, theta0)
            finals[variant].append(res.wsr_final)
            if variant in iters:
                iters[variant].append(res.trace.n_outer_iters)
    mean_prop = float(np.mean(finals[AlgorithmVariant.PROPOSED]))
    mean_rand = float(np.mean(finals[AlgorithmVariant.RANDOM_PHASE]))
    mean_bare = float(np.mean(finals[AlgorithmVariant.WITHOUT_RIS]))
    med_prop = float(np.median(iters[AlgorithmVariant.PROPOSED]))
    med_bls1 = float(np.median(iters[AlgorithmVariant.BLS1]))
    passed = (mean_prop > mean_rand > mean_bare) and med_prop <= med_bls1
    report(8, "mean rate ordering and iteration ordering", passed,
           f"mean WSR {mean_prop:.3f} > {mean_rand:.3f} > {mean_bare:.3f}, "
           f"median iters {med_prop:.0f} <= {med_bls1:.0f}, 100 seeds")


def _mean_cmul_per_outer(cfg, realizations=3):
    cfg = replace(cfg, ao_max_iters=10)
    spec = desk_spec(cfg, master_seed=2009)
    values = []
    for r in range(realizations):
        ch, theta0 = realize_channels(spec, cfg, 0, r)
        counter = OpCounter()
        res = solve(ch, cfg, AlgorithmVariant.PROPOSED, theta0, counter=counter)
        values.append(counter.total_cmul / res.trace.n_outer_iters)
    return float(np.mean(values))


def _fit_r_squared(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return 1.0 - np.sum(residuals ** 2) / np.sum((y - np.mean(y)) ** 2)


def test_criterion_9_linear_complexity():
    ns_grid = np.array([32, 64, 128, 256], dtype=float)
    ns_counts = np.array([_mean_cmul_per_outer(desk_system_config(n_ris=int(n)))
                          for n in ns_grid])
    r2_ns = _fit_r_squared(ns_grid, ns_counts)
    nt_grid = np.array([8, 16, 32, 64], dtype=float)
    nt_counts = np.array([_mean_cmul_per_outer(desk_system_config(n_tx=int(n)))
                          for n in nt_grid])
    r2_nt = _fit_r_squared(nt_grid, nt_counts)
    passed = r2_ns >= 0.99 and r2_nt >= 0.99
    report(9, "complex multiplications grow linearly in array sizes", passed,
           f"R^2 vs n_ris {r2_ns:.5f} >= 0.99, R^2 vs n_tx {r2_nt:.5f} >= 0.99")


def test_criterion_10_lipschitz_ordering(tmp_path):
    cfg = desk_system_config(n_ris=32, n_rx=1, n_streams=1)
    spec = desk_spec(cfg, master_seed=2010, output_dir=str(tmp_path),
                     n_realizations=50)
    result = experiment_lipschitz(spec, n_sample_pairs=10_000)
    median = result["median_ratio"]
    report(10, "reduced objective has the stiffer phase gradient", median > 1.2,
           f"median Lipschitz ratio {median:.3f} > 1.2 over 50 realizations")


def test_criterion_11_determinism(tmp_path):
    cfg = replace(desk_system_config(n_ris=16, n_tx=8), ao_max_iters=15)
    outputs = []
    for label in ("a", "b"):
        spec = desk_spec(cfg, master_seed=2011,
                         output_dir=str(tmp_path / label),
                         variants=(AlgorithmVariant.PROPOSED,
                                   AlgorithmVariant.RANDOM_PHASE),
                         n_realizations=2, sweep_parameter="n_ris",
                         sweep_values=(8.0, 16.0), save_channel_files=True)
        run_experiment(spec)
        texts = {}
        root = Path(spec.output_dir)
        for path in sorted(root.rglob("*.csv")):
            texts[str(path.relative_to(root))] = strip_timing_columns(path.read_text())
        outputs.append(texts)
    same_files = outputs[0].keys() == outputs[1].keys()
    identical = same_files and all(outputs[0][k] == outputs[1][k] for k in outputs[0])
    report(11, "seeded reruns reproduce all non-timing outputs", identical,
           f"{len(outputs[0])} CSV files byte-identical after dropping timing columns")
