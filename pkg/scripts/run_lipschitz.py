#!/usr/bin/env python3
"""Empirical gradient-Lipschitz comparison of the two phase objectives.

Single-antenna users only.  For each realization the precoder is locked by
one inner-loop solve at random phases, then both objectives are probed on the
same random phase pairs.  The reduced formulation typically shows an
estimate around twice the physical one, which is why the phase update works
on the physical objective.
"""

import argparse
import sys

from risbeam.ao import AlgorithmVariant
from risbeam.harness import (ExperimentSpec, default_geometry,
                             desk_system_config, full_scale_system_config,
                             experiment_lipschitz)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", choices=("desk", "full"), default="desk")
    parser.add_argument("--realizations", type=int, default=None)
    parser.add_argument("--pairs", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=20240601)
    parser.add_argument("--output", default=None)
    args = parser.parse_args()

    if args.scale == "desk":
        cfg = desk_system_config(n_ris=32, n_rx=1, n_streams=1)
        realizations = args.realizations or 50
    else:
        cfg = full_scale_system_config(n_rx=1, n_streams=1)
        realizations = args.realizations or 100
    spec = ExperimentSpec(
        base_config=cfg,
        geometry=default_geometry(),
        variants=(AlgorithmVariant.PROPOSED,),
        n_realizations=realizations,
        master_seed=args.seed,
        output_dir=args.output or f"out/lipschitz_{args.scale}",
    )
    result = experiment_lipschitz(spec, n_sample_pairs=args.pairs)
    print(f"rows: {result['output_path']}")
    print(f"median ratio (reduced / physical): {result['median_ratio']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
