"""End-to-end synthetic replications: coverage of the corrected total and bias of the uncorrected one."""

import argparse
import time

import numpy as np

from crossborder.pipeline.simulate import replicate
from crossborder.pipeline.synth import SyntheticSpec


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--base-rate", type=float, default=0.1)
    p.add_argument("--n-test", type=int, default=2000)
    args = p.parse_args()

    spec = SyntheticSpec(n_companies=args.n, base_rate=args.base_rate, n_test=args.n_test, years=(2016,),
                         write_pages=False, distractors=0)
    t0 = time.perf_counter()
    reps = []
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        reps += replicate(spec, seed)
    z = np.array([(r.estimate - r.true_total) / r.std for r in reps])
    print(f"{len(reps)} replications in {time.perf_counter() - t0:.0f} s")
    print(f"coverage (|error| <= 2 std): {np.mean(np.abs(z) <= 2):.3f}")
    print(f"z mean {z.mean():+.3f}, z sd {z.std(ddof=1) if len(z) > 1 else 0.0:.3f}, mean lambda {np.mean([r.lam for r in reps]):.3f}")


if __name__ == "__main__":
    main()
