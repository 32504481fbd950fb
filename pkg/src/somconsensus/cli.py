"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or config, 2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .consensus import ConsensusResult
from .dataset import SyntheticSpec, generate_synthetic, load_csv, write_csv
from .errors import ConsensusError, ValidationError
from .lle import lle, write_embedding_csv
from .metrics import validity_report
from .pipeline import PipelineConfig, run_pipeline, stability_study

log = logging.getLogger("somconsensus")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", type=Path, help="dataset CSV (sample_id,subject_id,f0,...)")
    src.add_argument("--synthetic", action="store_true",
                     help="use a synthetic cohort (see the 'synthetic' config section)")
    p.add_argument("--seed", type=int, help="master seed (required unless set in --config)")
    p.add_argument("--no-standardize", action="store_true", help="skip per-feature z-scoring")
    p.add_argument("--k-neighbors", type=int, help="LLE neighbours (default 30)")
    p.add_argument("--dim", type=int, help="LLE target dimension (default 30)")
    p.add_argument("--n-p", type=int, help="maps in the ensemble (default 1000)")
    p.add_argument("--ics-threshold", type=float, help="keep partitions with ICS below this (default 0.099)")
    p.add_argument("--grid", type=int, nargs=2, metavar=("ROWS", "COLS"), help="map grid (default 4 4)")
    p.add_argument("--iter-max", type=int, help="presentations per map (default 10000)")
    p.add_argument("--k-min", type=int, help="smallest candidate cluster count (default 2)")
    p.add_argument("--k-max", type=int, help="largest candidate cluster count (default 20)")
    p.add_argument("--metric-space", choices=["features", "embedding"],
                   help="where SC/CH/DB are measured (default features)")
    p.add_argument("--jobs", type=int,
                   help="worker processes (default: CONSENSUS_THREADS, 0 = all cores)")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="directory for outputs")
    p.add_argument("--timings", action="store_true",
                   help="also write timings.json (kept out of report.json so it stays reproducible)")


def _config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    if args.input:
        cfg.input, cfg.synthetic = str(args.input), None
    elif args.synthetic and cfg.synthetic is None:
        cfg.input, cfg.synthetic = None, SyntheticSpec()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.no_standardize:
        cfg.standardize = False
    if args.k_neighbors is not None:
        cfg.lle.k_neighbors = args.k_neighbors
    if args.dim is not None:
        cfg.lle.dim = args.dim
    if args.n_p is not None:
        cfg.ensemble.n_p = args.n_p
    if args.ics_threshold is not None:
        cfg.ensemble.ics_threshold = args.ics_threshold
    if args.grid is not None:
        cfg.som.grid_rows, cfg.som.grid_cols = args.grid
    if args.iter_max is not None:
        cfg.som.iter_max = args.iter_max
    if args.k_min is not None:
        cfg.consensus.k_min = args.k_min
    if args.k_max is not None:
        cfg.consensus.k_max = args.k_max
    if args.metric_space is not None:
        cfg.consensus.metric_space = args.metric_space
    return cfg


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n",
                    encoding="utf-8")


def cmd_generate(args) -> None:
    spec = SyntheticSpec(args.n_subjects, args.samples_per_subject, args.n_features,
                         args.n_clusters, args.separation, args.seed)
    data, truth = generate_synthetic(spec)
    write_csv(data, args.output)
    if args.labels:
        lines = ["subject_id,cluster"] + [f"{s},{c}" for s, c in zip(data.subjects(), truth)]
        args.labels.write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("wrote %d samples x %d features to %s", data.rows, data.cols, args.output)


def cmd_embed(args) -> None:
    data = load_csv(args.input)
    if not args.no_standardize:
        data = data.standardized()
    write_embedding_csv(lle(data, args.k_neighbors, args.dim, args.reg), args.output)


def _write_assignments(path: Path, sample_ids, subject_ids, result: ConsensusResult) -> None:
    lines = ["sample_id,subject_id,cluster"]
    for sid, subj, lab in zip(sample_ids, subject_ids, result.sample_partition.labels):
        lines.append(f"{sid},{subj},{int(lab)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_cluster(args) -> None:
    cfg = _config_from_args(args)
    cfg.validate()
    report = run_pipeline(cfg, n_jobs=args.jobs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    if args.timings:
        _write_json(args.out_dir / "timings.json", report.timings)
    if args.assignments:
        data = report.prepared.data
        _write_assignments(args.out_dir / "assignments.csv", data.sample_ids, data.subject_ids,
                           report.result)
    if args.coassoc:
        report.coassoc.write_csv(args.out_dir / "coassoc.csv")
    log.info("selected k=%d, SC=%.4f", report.consensus["selected_k"], report.metrics["sc"])


def cmd_stability(args) -> None:
    cfg = _config_from_args(args)
    if args.reruns is not None:
        cfg.n_stability_reruns = args.reruns
    elif cfg.n_stability_reruns < 2:
        cfg.n_stability_reruns = 10
    cfg.validate()
    block = stability_study(cfg, n_jobs=args.jobs)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(args.out_dir / "stability.json", {"config": cfg.to_dict(), "stability": block})


def _read_labels(path: Path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"sample_id", "cluster"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: header must contain sample_id and cluster")
        out = {}
        for row in reader:
            if None in row or None in row.values():
                raise ValidationError(f"{path}: row {reader.line_num} has the wrong number of cells")
            out[row["sample_id"]] = row["cluster"]
    return out


def cmd_metrics(args) -> None:
    data = load_csv(args.input)
    if args.standardize:
        data = data.standardized()
    labels = _read_labels(args.labels)
    missing = [s for s in data.sample_ids if s not in labels]
    if missing:
        raise ValidationError(f"no label for {len(missing)} samples, e.g. {missing[0]!r}")
    report = validity_report(data, [labels[s] for s in data.sample_ids], data.subject_ids)
    print(report.to_json())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somconsensus",
        description="Ensemble-SOM consensus clustering with spectral model selection.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic cohort CSV")
    g.add_argument("-o", "--output", type=Path, required=True)
    g.add_argument("--labels", type=Path, help="also write subject_id,cluster ground truth")
    g.add_argument("--n-subjects", type=int, default=57)
    g.add_argument("--samples-per-subject", type=int, default=3)
    g.add_argument("--n-features", type=int, default=40)
    g.add_argument("--n-clusters", type=int, default=4)
    g.add_argument("--separation", type=float, default=10.0,
                   help="centroid distance in units of within-cluster scatter")
    g.add_argument("--seed", type=int, required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", help="run LLE only and write the embedding CSV")
    e.add_argument("--input", type=Path, required=True)
    e.add_argument("-o", "--output", type=Path, required=True)
    e.add_argument("--k-neighbors", type=int, default=30)
    e.add_argument("--dim", type=int, default=30)
    e.add_argument("--reg", type=float, default=1e-3)
    e.add_argument("--no-standardize", action="store_true")
    e.set_defaults(func=cmd_embed)

    c = sub.add_parser("cluster", help="run the full pipeline and write report.json")
    _add_pipeline_flags(c)
    c.add_argument("--assignments", action="store_true", help="also write assignments.csv")
    c.add_argument("--coassoc", action="store_true", help="also write coassoc.csv")
    c.set_defaults(func=cmd_cluster)

    s = sub.add_parser("stability", help="rerun with derived seeds; report std of SC/CH/DB")
    _add_pipeline_flags(s)
    s.add_argument("--reruns", type=int, help="number of reruns (default 10)")
    s.set_defaults(func=cmd_stability)

    m = sub.add_parser("metrics", help="score an existing labeling (JSON on stdout)")
    m.add_argument("--input", type=Path, required=True)
    m.add_argument("--labels", type=Path, required=True, help="CSV with sample_id and cluster columns")
    m.add_argument("--standardize", action="store_true")
    m.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConsensusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numeric failures from numpy/scipy internals
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
