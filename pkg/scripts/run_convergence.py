#!/usr/bin/env python3
"""Convergence comparison of all solver variants on shared channels.

Writes one trace CSV per run plus summary.csv; plot wsr_nats against
outer_iter from the traces to see the per-iteration behavior.
"""

import argparse
import sys

from risbeam.ao import AlgorithmVariant
from risbeam.harness import (ExperimentSpec, default_geometry,
                             desk_system_config, full_scale_system_config,
                             run_experiment)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=("desk", "full"), default="desk")
    parser.add_argument("--realizations", type=int, default=None)
    parser.add_argument("--seed", type=int, default=20240601)
    parser.add_argument("--output", default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    if args.scale == "desk":
        cfg = desk_system_config()
        realizations = args.realizations or 10
    else:
        cfg = full_scale_system_config()
        realizations = args.realizations or 100
    spec = ExperimentSpec(
        base_config=cfg,
        geometry=default_geometry(),
        variants=(AlgorithmVariant.PROPOSED, AlgorithmVariant.BLS1,
                  AlgorithmVariant.RANDOM_PHASE, AlgorithmVariant.WITHOUT_RIS),
        n_realizations=realizations,
        master_seed=args.seed,
        output_dir=args.output or f"out/convergence_{args.scale}",
    )
    result = run_experiment(spec, max_workers=args.workers)
    print(f"summary: {result['summary_path']} ({result['n_failed']} failed)")
    return 0 if result["n_failed"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
