"""LSH forest recall against brute-force trigram Jaccard on a seeded synthetic name index."""

import argparse
import time

from crossborder.pipeline.benchmark import recall_benchmark


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n-index", type=int, default=10_000)
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--trees", type=int, default=8)
    p.add_argument("--hashes", type=int, default=64)
    p.add_argument("--min-similarity", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    t0 = time.perf_counter()
    r = recall_benchmark(args.n_index, args.queries, args.m, args.min_similarity, args.trees, args.hashes, args.seed)
    print(f"index {r.n_index}, queries {r.n_queries}, m {args.m}, l {args.trees}, hashes {args.hashes}")
    print(f"partner recall {r.partner_recall:.3f}, nearest-neighbour recall {r.nearest_recall:.3f}, "
          f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
