"""Command-line surface: generate, split, train, evaluate, sweep, inspect.

Exit codes: 0 on success, 1 for usage errors (bad flags), 2 for data
errors (missing or inconsistent files, empty datasets).  Every CSV a
command writes gets a rendered PNG sibling.
"""

import argparse
import sys
from pathlib import Path

from . import plots
from .codebook import build_candidate_set
from .dataset import (GenerationConfig, build_codebooks, build_samples,
                      config_from_items, generate_dataset, load_manifest,
                      load_records, load_splits, parse_config_text,
                      split_by_sequence, write_splits)
from .formats import (load_model, save_model, write_metrics_csv, write_pgm,
                      write_pr_csv, write_sweep_csv, write_trace_csv)
from .metrics import evaluate, sweep_threshold, uniform_accuracy
from .semantics import rasterize_heatmaps
from .train import (TrainConfig, train_beam_selector, train_joint)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for data errors here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


class DataError(Exception):
    """Problem with input files or dataset contents (exit code 2)."""


# ------------------------------------------------------------ flag validators

def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError("must be a positive integer")
    return value


def _nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _positive_float(text):
    value = float(text)
    if value <= 0.0:
        raise ValueError("must be positive")
    return value


def _nonnegative_float(text):
    value = float(text)
    if value < 0.0:
        raise ValueError("must be >= 0")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise ValueError("must lie in [0, 1]")
    return value


def _threshold_list(text):
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError("expected a comma-separated list of dB thresholds")
    return values


# ------------------------------------------------------------- shared loading

def _load_dataset(dataset_dir):
    root = Path(dataset_dir)
    try:
        manifest = load_manifest(root)
        records = load_records(root)
    except (OSError, ValueError, KeyError) as exc:
        raise DataError("cannot read dataset at %s: %s" % (root, exc))
    if not records:
        raise DataError("dataset at %s has no records" % root)
    try:
        config = config_from_items(manifest["config"])
    except (ValueError, KeyError) as exc:
        raise DataError("bad manifest config: %s" % exc)
    return manifest, records, config


def _load_split_records(dataset_dir, records):
    try:
        return load_splits(dataset_dir, records)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc))


def _require(condition, message):
    if not condition:
        raise DataError(message)


# ----------------------------------------------------------------- commands

def _cmd_generate(args):
    items = {}
    if args.config is not None:
        try:
            items = parse_config_text(Path(args.config).read_text())
        except OSError as exc:
            raise DataError("cannot read config file: %s" % exc)
    try:
        config = config_from_items(items)
    except ValueError as exc:
        raise DataError("bad config file: %s" % exc)
    overrides = {}
    if args.sequences is not None:
        overrides["n_sequences"] = args.sequences
    if args.length is not None:
        overrides["sequence_length"] = args.length
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = config_from_items(overrides, base=config)
    manifest = generate_dataset(config, args.out, config_items=items)
    counts = manifest["counts"]
    print("wrote %d records to %s (%d LOS, %d NLOS, %d outage)"
          % (counts["records"], args.out, counts["los"], counts["nlos"],
             counts["outage"]))
    return 0


def _cmd_split(args):
    _, records, _ = _load_dataset(args.dataset)
    try:
        train, test = split_by_sequence(records, args.train_frac, args.seed)
    except ValueError as exc:
        raise DataError(str(exc))
    payload = write_splits(args.dataset, train, test, args.train_frac,
                           args.seed)
    print("split %d sequences into %d train / %d test (%d / %d records)"
          % (len(payload["train_sequences"]) + len(payload["test_sequences"]),
             len(payload["train_sequences"]), len(payload["test_sequences"]),
             len(train), len(test)))
    return 0


def _train_arch(args):
    if args.stage == "joint":
        return "joint"
    return args.arch


def _cmd_train(args):
    manifest, records, config = _load_dataset(args.dataset)
    train_records, test_records = _load_split_records(args.dataset, records)
    _require(train_records, "train split is empty")
    tx_cb, rx_cb = build_codebooks(config)
    labels = [r.optimal_pair for r in train_records if not r.outage]
    _require(labels, "every training record is an outage")
    try:
        candidates = build_candidate_set(labels, min_count=args.min_count)
    except ValueError as exc:
        raise DataError(str(exc))
    camera = config.camera
    train_samples = build_samples(train_records, candidates, tx_cb, rx_cb,
                                  camera)
    _require(train_samples, "no usable training samples")
    val_samples = build_samples(test_records, candidates, tx_cb, rx_cb,
                                camera) if test_records else None
    train_config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                               learning_rate=args.lr, beta=args.beta,
                               seed=args.seed, camera=camera)
    arch = _train_arch(args)
    if arch == "joint":
        net, trace = train_joint(train_samples, train_config,
                                 val_samples=val_samples)
    else:
        net, trace = train_beam_selector(train_samples, train_config,
                                         val_samples=val_samples, arch=arch)
    model_out = Path(args.model_out)
    if model_out.parent and not model_out.parent.exists():
        raise DataError("output directory %s does not exist" % model_out.parent)
    save_model(net, model_out, candidates=candidates, camera=camera)
    trace_csv = model_out.with_name(model_out.stem + "_trace.csv")
    write_trace_csv(trace, trace_csv)
    plots.plot_trace(trace, trace_csv.with_suffix(".png"))
    last_train = [row for row in trace if row["split"] == "train"]
    top1 = last_train[-1]["top1"] if last_train else float("nan")
    print("trained %s on %d samples (%d candidates); final train top-1 %.3f"
          % (arch, len(train_samples), len(candidates), top1))
    print("wrote %s, %s, %s" % (model_out, trace_csv,
                                trace_csv.with_suffix(".png")))
    return 0


def _cmd_evaluate(args):
    manifest, records, config = _load_dataset(args.dataset)
    _, test_records = _load_split_records(args.dataset, records)
    _require(test_records, "test split is empty")
    try:
        net, candidates, camera = load_model(args.model)
    except OSError as exc:
        raise DataError("cannot read model: %s" % exc)
    except ValueError as exc:
        raise DataError("bad model file: %s" % exc)
    _require(candidates is not None, "model carries no candidate set")
    _require(camera == config.camera,
             "model camera geometry does not match the dataset")
    tx_cb, rx_cb = build_codebooks(config)
    samples = build_samples(test_records, candidates, tx_cb, rx_cb, camera,
                            drop_unlisted=False)
    _require(samples, "no usable evaluation samples")
    try:
        report = evaluate(net, samples, kmax=args.kmax, camera=camera,
                          map_noise=args.noise, noise_seed=args.noise_seed)
    except ValueError as exc:
        raise DataError(str(exc))
    csv_path = Path(args.csv)
    write_metrics_csv(report, csv_path)
    plots.plot_metrics(report, csv_path.with_suffix(".png"))
    pr_csv = csv_path.with_name(csv_path.stem + "_pr.csv")
    write_pr_csv(report.pr_points, pr_csv)
    plots.plot_pr(report.pr_points, pr_csv.with_suffix(".png"))
    print("evaluated %d samples (%d LOS / %d NLOS), %d candidates"
          % (report.n_samples, report.n_los, report.n_nlos, len(candidates)))
    print("A(1) %.4f  T(1) %.4f  A(%d) %.4f  T(%d) %.4f"
          % (report.accuracy[0], report.throughput[0], report.kmax,
             report.accuracy[-1], report.kmax, report.throughput[-1]))
    print("N_E %.4f  P %.4f  R %.4f  uniform A(1) %.4f"
          % (report.n_effective, report.precision, report.recall,
             uniform_accuracy(len(candidates))))
    print("wrote %s, %s, %s, %s" % (csv_path, csv_path.with_suffix(".png"),
                                    pr_csv, pr_csv.with_suffix(".png")))
    return 0


def _cmd_sweep(args):
    manifest, records, config = _load_dataset(args.dataset)
    train_records, test_records = _load_split_records(args.dataset, records)
    _require(train_records and test_records, "need both split sides to sweep")
    tx_cb, rx_cb = build_codebooks(config)
    labels = [r.optimal_pair for r in train_records if not r.outage]
    _require(labels, "every training record is an outage")
    try:
        candidates = build_candidate_set(labels, min_count=args.min_count)
    except ValueError as exc:
        raise DataError(str(exc))
    train_config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                               learning_rate=args.lr, beta=args.beta,
                               seed=args.seed, camera=config.camera)
    try:
        rows = sweep_threshold(train_records, test_records, args.thresholds,
                               candidates, tx_cb, rx_cb, train_config)
    except ValueError as exc:
        raise DataError(str(exc))
    csv_path = Path(args.csv)
    write_sweep_csv(rows, csv_path)
    plots.plot_sweep(rows, csv_path.with_suffix(".png"))
    for row in rows:
        print("P_th %+.1f dB  A(1) %.4f  T(1) %.4f  N_E %.4f"
              % (row.threshold_db, row.accuracy1, row.throughput1,
                 row.n_effective))
    print("wrote %s, %s" % (csv_path, csv_path.with_suffix(".png")))
    return 0


def _cmd_inspect(args):
    manifest, records, config = _load_dataset(args.dataset)
    _require(0 <= args.record < len(records),
             "record %d out of range (dataset has %d)"
             % (args.record, len(records)))
    record = records[args.record]
    print("record %d: sequence %d, t %d" % (args.record, record.sequence_id,
                                            record.time_index))
    if record.outage:
        print("outage: no propagation paths survived")
    else:
        print("%d paths (%s), optimal pair (%d, %d), gain %.3e"
              % (len(record.paths), "LOS" if record.is_los else "NLOS",
                 record.optimal_pair[0], record.optimal_pair[1],
                 record.optimal_gain))
        print("%d projected scatterers" % len(record.scatterers))
    maps = rasterize_heatmaps(record.scatterers, config.camera)
    out_dir = Path(args.pgm_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cam in range(maps.count):
        for channel, values in (("distribution", maps.distribution[cam]),
                                ("strength", maps.strength[cam])):
            path = out_dir / ("record%04d_cam%d_%s.pgm"
                              % (args.record, cam, channel))
            write_pgm(values, path)
            written.append(path)
    print("wrote %d heatmap images to %s" % (len(written), out_dir))
    return 0


# ------------------------------------------------------------------- parser

def build_parser():
    parser = _Parser(prog="sembeam",
                     description="mmWave beam selection from camera-plane "
                                 "scatterer semantics: data, training, "
                                 "evaluation.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("generate", help="synthesize a dataset directory")
    p.add_argument("--sequences", type=_positive_int, default=None,
                   help="number of vehicle sequences")
    p.add_argument("--length", type=_positive_int, default=None,
                   help="snapshots per sequence")
    p.add_argument("--seed", type=_nonnegative_int, default=None)
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--config", default=None,
                   help="flat key=value config file; keys echo into the manifest")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("split", help="store a sequence-disjoint train/test split")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--train-frac", type=_fraction, default=0.8)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="train a beam predictor on the train split")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--stage", choices=["2", "joint"], default="2",
                   help="2: selector on reference heatmaps; joint: end to end")
    p.add_argument("--arch", choices=["beam_selector", "location"],
                   default="beam_selector",
                   help="stage-2 variant: full model or location-only baseline")
    p.add_argument("--epochs", type=_nonnegative_int, default=30)
    p.add_argument("--batch-size", type=_positive_int, default=32)
    p.add_argument("--beta", type=_unit_interval, default=0.8,
                   help="soft-target weight in the selection loss")
    p.add_argument("--lr", type=_positive_float, default=0.05)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--min-count", type=_nonnegative_int, default=3,
                   help="optimal-pair count above which a pair is a candidate")
    p.add_argument("--model-out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="score a model on the test split")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--model", required=True)
    p.add_argument("--kmax", type=_positive_int, default=10)
    p.add_argument("--noise", type=_nonnegative_float, default=0.0,
                   help="heatmap corruption level in pixels (0 = clean)")
    p.add_argument("--noise-seed", type=_nonnegative_int, default=0)
    p.add_argument("--csv", required=True, help="metrics CSV to write")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep-threshold",
                       help="retrain and score across power thresholds")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--thresholds", type=_threshold_list, required=True,
                   help="comma-separated dB values; negative values need the "
                        "= form: --thresholds=-1,-5,-10,-15")
    p.add_argument("--epochs", type=_nonnegative_int, default=30)
    p.add_argument("--batch-size", type=_positive_int, default=32)
    p.add_argument("--beta", type=_unit_interval, default=0.8)
    p.add_argument("--lr", type=_positive_float, default=0.05)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--min-count", type=_nonnegative_int, default=3)
    p.add_argument("--csv", required=True, help="sweep table CSV to write")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("inspect", help="dump one record's heatmaps as PGM")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--record", type=_nonnegative_int, required=True,
                   help="record index in file order")
    p.add_argument("--pgm-dir", required=True, help="directory for PGM output")
    p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


def entry():
    sys.exit(main())
