"""Grid search of selected classifiers on a synthetic dataset, for either classification channel."""

import argparse
import tempfile
from pathlib import Path

from crossborder.pipeline.cli import main as cli


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--channel", choices=["br", "web"], default="web")
    p.add_argument("--algorithm", action="append", help="default: LR, LDA and kNN")
    p.add_argument("--n", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="keep the dataset and report here")
    args = p.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(args.out or tmp)
        cli(["synth", "--out", str(out), "--seed", str(args.seed), "--n", str(args.n), "--n-test", "500",
             "--distractors", "0", "--no-pages", "--fast"])
        argv = ["gridsearch", "--config", str(out / "run.cfg"), "--channel", args.channel]
        for algo in args.algorithm or ["LR", "LDA", "kNN"]:
            argv += ["--algorithm", algo]
        raise SystemExit(cli(argv))


if __name__ == "__main__":
    main()
