#!/usr/bin/env python3
"""Rate and complexity versus array size.

Sweeps the RIS element count (or the BS antenna count with --parameter n_tx)
and records mean WSR and mean complex-multiplication counts per variant.
"""

import argparse
import sys

from risbeam.ao import AlgorithmVariant
from risbeam.harness import (ExperimentSpec, default_geometry,
                             desk_system_config, full_scale_system_config,
                             run_experiment)

DESK_SWEEPS = {"n_ris": (32.0, 64.0, 128.0, 256.0), "n_tx": (8.0, 16.0, 32.0, 64.0)}
FULL_SCALE_SWEEPS = {"n_ris": (100.0, 200.0, 300.0, 400.0), "n_tx": (16.0, 32.0, 64.0, 128.0)}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=("desk", "full"), default="desk")
    parser.add_argument("--parameter", choices=("n_ris", "n_tx"), default="n_ris")
    parser.add_argument("--realizations", type=int, default=None)
    parser.add_argument("--seed", type=int, default=20240601)
    parser.add_argument("--output", default=None)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    if args.scale == "desk":
        cfg = desk_system_config()
        values = DESK_SWEEPS[args.parameter]
        realizations = args.realizations or 5
    else:
        cfg = full_scale_system_config()
        values = FULL_SCALE_SWEEPS[args.parameter]
        realizations = args.realizations or 100
    spec = ExperimentSpec(
        base_config=cfg,
        geometry=default_geometry(),
        variants=(AlgorithmVariant.PROPOSED, AlgorithmVariant.RANDOM_PHASE,
                  AlgorithmVariant.WITHOUT_RIS),
        n_realizations=realizations,
        master_seed=args.seed,
        output_dir=args.output or f"out/sweep_{args.parameter}_{args.scale}",
        sweep_parameter=args.parameter,
        sweep_values=values,
    )
    result = run_experiment(spec, max_workers=args.workers)
    print(f"summary: {result['summary_path']} ({result['n_failed']} failed)")
    return 0 if result["n_failed"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
