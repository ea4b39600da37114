"""Command-line entry point.

Exit codes: 0 success, 1 data error, 2 configuration error, 3 convergence error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..estimator import ConvergenceError
from .config import ConfigError, DataError, RunConfig

EXIT_OK, EXIT_DATA, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 1, 2, 3


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def cmd_stem(args) -> None:
    from ..normalize import SuffixTable, UnusableName, build_suffix_table, clean_name, load_known_entities, stem_name

    known = load_known_entities()
    if args.table:
        table = SuffixTable.from_csv(args.table, known)
    elif args.register:
        from .ingest import read_register
        table = build_suffix_table(((e.name, e.country) for e in read_register(args.register)), known)
    else:
        table = build_suffix_table((), known)
    for raw in args.names or (line.rstrip("\n") for line in sys.stdin):
        try:
            st = stem_name(clean_name(raw), table, args.country)
        except UnusableName:
            print(f"{raw}\t\t\t(unusable)")
            continue
        print(f"{raw}\t{st.stem}\t{st.suffix_start}\t{st.suffix}")


def cmd_index(args) -> None:
    from ..linkage import index_register
    from ..normalize import build_suffix_table, load_known_entities
    from .ingest import read_register

    register = read_register(args.register)
    table = build_suffix_table(((e.name, e.country) for e in register), load_known_entities())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "suffix_table.csv")
    index = index_register(((e.entry_id, e.name, e.country) for e in register if e.retail), table,
                           args.trees, args.hashes, args.seed)
    index.forest.save(out / "forest.bin")
    print(f"indexed {len(index.stems)} retail names ({len(index.forest)} distinct stems); digest {index.forest.digest()}")


def _stage(name):
    def run_stage(args) -> None:
        from .run import run
        result = run(_config(args), (name,), force=args.force)
        print(f"ran: {', '.join(result.ran) or '-'}; cached: {', '.join(result.skipped) or '-'}")
    return run_stage


def cmd_gridsearch(args) -> None:
    from ..mlkit import ALGORITHMS, GRIDS, grid_search, read_grid_file, write_report
    from .run import Runner, _dist_row, _labeled, _web_row
    from .ingest import read_labels

    cfg = _config(args)
    runner = Runner(cfg)
    runner.run(("link", "webfeat"))
    dist, web = runner._features()
    labels = read_labels(cfg.labels)
    ids = sorted(c for c, lab in labels.items() if lab.split == "train")
    if args.channel == "br":
        data = _labeled(ids, labels, "label_br", dist, _dist_row, "distance")
    else:
        data = _labeled(ids, labels, "label_web", web, _web_row, "web")
    grids = read_grid_file(args.grid_file or cfg.grid_file) if (args.grid_file or cfg.grid_file) else GRIDS
    algos = args.algorithm or [a for a in ALGORITHMS if a in grids and not (a == "MNB" and data.kind == "distance")]
    report = []
    for algo in algos:
        best, rep = grid_search(algo, data, grids[algo], cfg.cv_folds, cfg.seed, n_jobs=args.jobs)
        report += rep
        print(f"{algo:7s} best {best.spec.label():45s} F1 {best.mean_f1:.3f} (+/- {best.std_f1:.3f})")
    out = Path(args.report or Path(cfg.output_dir) / f"gridsearch_{args.channel}.csv")
    write_report(report, out, runner.header("train"))
    print(f"report: {out} ({len(report)} grid points, {sum(not r.ok for r in report)} failed)")


def cmd_synth(args) -> None:
    from .synth import SyntheticSpec, synthesize, write_synthetic

    spec = SyntheticSpec(n_companies=args.n, base_rate=args.base_rate, n_test=args.n_test,
                         write_pages=not args.no_pages, distractors=args.distractors)
    data = synthesize(spec, args.seed)
    paths = write_synthetic(data, args.out, spec, args.seed)
    cfg = RunConfig(seed=args.seed, output_dir="run", pages_dir="pages" if not args.no_pages else "")
    if args.fast:
        cfg.distance_features, cfg.web_features = "distance_features.csv", "web_features.csv"
    (Path(args.out) / "run.cfg").write_text(cfg.to_text(), encoding="utf-8")
    print(f"wrote {', '.join(sorted(p.name for p in paths.values()))} and run.cfg to {args.out}")


def cmd_label_sample(args) -> None:
    from .ingest import read_tax_returns
    from .sampling import label_sample_select

    cfg = _config(args)
    for cid in label_sample_select(read_tax_returns(args.tax or cfg.tax_returns).values(), cfg.thresholds):
        print(cid)


def cmd_histogram(args) -> None:
    from .ingest import read_tax_returns
    from .sampling import histogram_export

    companies = read_tax_returns(args.tax)
    year = args.year or max(y for c in companies.values() for y in c.turnover)
    values = [c.turnover[year] for c in companies.values() if year in c.turnover]
    bins = histogram_export(values, None, args.out, args.min_count, f"year={year} min_count={args.min_count}")
    print(f"{len(bins)} bins, {sum(b.suppressed for b in bins)} suppressed -> {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossborder", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stem", help="clean and stem company names")
    s.add_argument("names", nargs="*")
    s.add_argument("--country")
    s.add_argument("--table", help="suffix table CSV")
    s.add_argument("--register", help="build the suffix table from this register CSV")
    s.set_defaults(func=cmd_stem)

    s = sub.add_parser("index", help="build the suffix table and forest over retail register names")
    s.add_argument("register")
    s.add_argument("--out", default="index")
    s.add_argument("--trees", type=int, default=8)
    s.add_argument("--hashes", type=int, default=64)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_index)

    for name, help_text in [("link", "distance features"), ("webfeat", "web features"), ("train", "fit classifiers"),
                            ("classify", "combined labels"), ("estimate", "bias-corrected totals"),
                            ("report", "histogram, label sample and summary"), ("run", "every stage")]:
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--config")
        s.add_argument("--out")
        s.add_argument("--force", action="store_true", help="ignore the stage cache")
        s.set_defaults(func=_stage("report" if name == "run" else name))

    s = sub.add_parser("gridsearch", help="cross-validated grid search for one channel")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--channel", choices=["br", "web"], default="br")
    s.add_argument("--algorithm", action="append")
    s.add_argument("--grid-file")
    s.add_argument("--report")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_gridsearch)

    s = sub.add_parser("synth", help="write a synthetic dataset and a matching run.cfg")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--base-rate", type=float, default=0.1)
    s.add_argument("--n-test", type=int, default=2000)
    s.add_argument("--distractors", type=int, default=5000)
    s.add_argument("--no-pages", action="store_true")
    s.add_argument("--fast", action="store_true", help="point run.cfg at the precomputed feature files")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("label-sample", help="companies above the industry turnover thresholds")
    s.add_argument("--config")
    s.add_argument("--tax")
    s.set_defaults(func=cmd_label_sample)

    s = sub.add_parser("histogram", help="turnover histogram with small bins suppressed")
    s.add_argument("tax")
    s.add_argument("--out", default="histogram.csv")
    s.add_argument("--year", type=int)
    s.add_argument("--min-count", type=int, default=20)
    s.set_defaults(func=cmd_histogram)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    from .run import StageError

    try:
        args.func(args)
    except ConvergenceError as exc:
        print(f"convergence error: {exc}; lambda trajectory {exc.trajectory[-5:]}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
