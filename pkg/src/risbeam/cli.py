"""Command-line entry point.

Subcommands:
  run       execute an experiment spec file (traces + summary CSV)
  lipschitz estimate gradient Lipschitz constants of both phase objectives
  gradcheck finite-difference verification of the closed-form gradients
  validate  lint a config file and print every violated invariant
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .channel import stack_channels
from .model import validate_config
from .rates import equivalent_rate, wsr
from .ris_spgm import grad_equiv_theta_miso, grad_wsr_theta


def _add_run(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("run", help="run an experiment spec file")
    p.add_argument("spec", help="path to the JSON experiment file")
    p.add_argument("--output-dir", help="override the output directory")
    p.add_argument("--realizations", type=int, help="override n_realizations")
    p.add_argument("--master-seed", type=int, help="override the master seed")
    p.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")


def _add_lipschitz(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("lipschitz", help="gradient Lipschitz comparison (MISO)")
    p.add_argument("spec", help="path to the JSON experiment file")
    p.add_argument("--output-dir", help="override the output directory")
    p.add_argument("--realizations", type=int, help="override n_realizations")
    p.add_argument("--pairs", type=int, default=10_000, help="sample pairs per realization")


def _add_gradcheck(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)


def _add_validate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("validate", help="lint a config file")
    p.add_argument("spec", help="path to the JSON experiment file")


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "output_dir": getattr(args, "output_dir", None),
        "n_realizations": getattr(args, "realizations", None),
        "master_seed": getattr(args, "master_seed", None),
    }


def _cmd_run(args: argparse.Namespace) -> int:
    spec = harness.load_spec(args.spec, _overrides(args))
    result = harness.run_experiment(spec, max_workers=args.workers)
    print(f"summary written to {result['summary_path']}")
    for failure in result["failures"]:
        print(f"FAILED {failure['variant']} sweep={failure['sweep_value']} "
              f"r={failure['realization']}: {failure['error']}")
    print(f"{len(result['records']) - result['n_failed']} ok, {result['n_failed']} failed")
    return 0 if result["n_failed"] == 0 else 1


def _cmd_lipschitz(args: argparse.Namespace) -> int:
    spec = harness.load_spec(args.spec, _overrides(args))
    result = harness.experiment_lipschitz(spec, n_sample_pairs=args.pairs)
    print(f"rows written to {result['output_path']}")
    print(f"median ratio (equivalent / original): {result['median_ratio']:.4f}")
    return 0


def _finite_difference(objective, theta: np.ndarray, delta: float = 1e-6) -> np.ndarray:
    grad = np.zeros(theta.shape[0], dtype=complex)
    for n in range(theta.shape[0]):
        probe = np.zeros_like(theta)
        probe[n] = delta
        d_re = (objective(theta + probe) - objective(theta - probe)) / (2 * delta)
        d_im = (objective(theta + 1j * probe) - objective(theta - 1j * probe)) / (2 * delta)
        grad[n] = 0.5 * (d_re + 1j * d_im)
    return grad


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    worst_orig = 0.0
    worst_equiv = 0.0
    for _ in range(args.instances):
        from .testing import random_instance  # local import keeps startup light

        inst = random_instance(rng, n_tx=8, n_ris=12, n_users=2, n_rx=2, n_streams=2)
        grad = grad_wsr_theta(inst.channels, inst.theta, inst.precoders, inst.config)
        fd = _finite_difference(
            lambda t: wsr(inst.channels, t, inst.precoders, inst.config), inst.theta.theta)
        worst_orig = max(worst_orig, float(np.linalg.norm(fd - grad) / np.linalg.norm(grad)))

        miso = random_instance(rng, n_tx=8, n_ris=12, n_users=2, n_rx=1, n_streams=1)
        grad = grad_equiv_theta_miso(miso.channels, miso.theta, miso.aux, miso.config)
        fd = _finite_difference(
            lambda t: equivalent_rate(stack_channels(miso.channels, t), miso.aux, miso.config),
            miso.theta.theta)
        worst_equiv = max(worst_equiv, float(np.linalg.norm(fd - grad) / np.linalg.norm(grad)))
    print(f"max relative error, sum-rate gradient:   {worst_orig:.3e}")
    print(f"max relative error, reduced gradient:    {worst_equiv:.3e}")
    ok = worst_orig <= 1e-4 and worst_equiv <= 1e-4
    print("gradcheck " + ("PASS" if ok else "FAIL") + " (tolerance 1e-4)")
    return 0 if ok else 1


def _cmd_validate(args: argparse.Namespace) -> int:
    with open(args.spec) as handle:
        raw = json.load(handle)
    spec = harness.spec_from_dict(raw)
    errors = harness.validate_spec(spec)
    if errors:
        for err in errors:
            print(f"violation: {err}")
        return 1
    print("config ok")
    print(f"  system: {spec.base_config}")
    print(f"  geometry: {spec.geometry}")
    print(f"  config invariants: {validate_config(spec.base_config) or 'all satisfied'}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="risbeam",
                                     description="RIS-aided MU-MIMO sum-rate optimizer")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_lipschitz(sub)
    _add_gradcheck(sub)
    _add_validate(sub)
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "lipschitz": _cmd_lipschitz,
        "gradcheck": _cmd_gradcheck,
        "validate": _cmd_validate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
