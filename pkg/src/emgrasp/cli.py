"""Command-line front end: synth, decompose, features, train, eval, predict,
simplot. One JSON config file feeds every command; --set overrides win."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .crossval import ClassifierConfig, PipelineConfig, five_by_two_cv
from .dataio import (
    ClassSignalParams,
    ManifestEntry,
    ParseError,
    PipelineModel,
    SimplotFrame,
    SimplotStreamDecoder,
    SynthConfig,
    TrialFileManifest,
    format_trial_text,
    generate_synthetic,
    load_manifest,
    load_trials,
    parse_trial_text,
    pipeline_model_from_json,
    pipeline_model_to_json,
    read_feature_dataset,
    report_to_json,
    save_manifest,
    simplot_encode,
    write_feature_dataset,
)
from .dimred import pca_fit, pca_transform, relief_e, select_top, standardize_apply, standardize_fit
from .emd import SiftConfig, emd
from .features import concat_datasets, featurize_trial, schema_for
from .signals import SIX_GRASPS, TABLE_CLASS_ORDER, MovementClass, WindowingConfig


class ConfigError(ValueError):
    """One message per offending key, all reported together."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


_PIPELINE_KEYS = (
    "schema_id",
    "reduction",
    "grid",
    "repetitions",
    "inner_repetitions",
    "inner_train_fraction",
    "relief_m",
    "allow_unequal",
    "wamp_threshold",
    "zc_threshold",
    "if_edge_trim",
)
_SYNTH_KEYS = (
    "classes",
    "trials_per_class",
    "channels",
    "fs",
    "duration",
    "onset_range_s",
    "ramp_samples",
    "noise_level",
    "gain_range",
    "subject_id",
    "class_params",
)


def _fields(cls) -> tuple[str, ...]:
    return tuple(f.name for f in dataclasses.fields(cls))


_SECTIONS = {
    "windowing": _fields(WindowingConfig),
    "sift": _fields(SiftConfig),
    "classifier": _fields(ClassifierConfig),
    "pipeline": _PIPELINE_KEYS,
    "synth": _SYNTH_KEYS,
}


def default_config() -> dict:
    return {
        "seed": 0,
        "windowing": dataclasses.asdict(WindowingConfig()),
        "sift": {"max_modes": 3, "fixed_sift_iters": 10},
        "classifier": dataclasses.asdict(ClassifierConfig()),
        "pipeline": {
            "schema_id": "part_a",
            "reduction": "pca",
            "grid": [],
            "repetitions": 5,
            "inner_repetitions": 10,
            "inner_train_fraction": 0.7,
            "relief_m": 5000,
            "allow_unequal": False,
            "wamp_threshold": 10.0,
            "zc_threshold": 0.0,
            "if_edge_trim": 0.1,
        },
        "synth": {
            "classes": [c.name for c in SIX_GRASPS],
            "trials_per_class": 30,
            "channels": 2,
            "fs": 500.0,
            "duration": 6.0,
            "onset_range_s": [0.45, 0.9],
            "ramp_samples": 30,
            "noise_level": 0.25,
            "gain_range": [0.75, 1.3],
            "subject_id": "synth",
            "class_params": None,
        },
    }


def _validate_tree(tree: dict) -> list[str]:
    problems = []
    for key, value in tree.items():
        if key == "seed":
            continue
        if key not in _SECTIONS:
            problems.append(f"unknown key: {key}")
            continue
        if not isinstance(value, dict):
            problems.append(f"section {key} must be an object")
            continue
        for sub in value:
            if sub not in _SECTIONS[key]:
                problems.append(f"unknown key: {key}.{sub}")
    return problems


def _apply_set(tree: dict, assignment: str, problems: list[str]) -> None:
    if "=" not in assignment:
        problems.append(f"--set needs key=value, got {assignment!r}")
        return
    path, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = path.split(".")
    if parts[0] == "seed" and len(parts) == 1:
        tree["seed"] = value
        return
    if len(parts) != 2 or parts[0] not in _SECTIONS or parts[1] not in _SECTIONS[parts[0]]:
        problems.append(f"unknown key: {path}")
        return
    tree.setdefault(parts[0], {})[parts[1]] = value


def resolve_config(config_path: str | None, sets: list[str]) -> tuple[dict, set[str]]:
    """Defaults, then the config file, then --set overrides (which win).

    Returns the resolved tree plus the set of dotted keys the user supplied
    explicitly. Every invalid or unknown key is reported at once.
    """
    tree = default_config()
    provided: set[str] = set()
    problems: list[str] = []
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as err:
            raise ConfigError([f"config file is not valid JSON: {err}"])
        except OSError as err:
            raise ConfigError([f"cannot read config file: {err}"])
        problems.extend(_validate_tree(loaded))
        for key, value in loaded.items():
            if key == "seed":
                tree["seed"] = value
                provided.add("seed")
            elif key in _SECTIONS and isinstance(value, dict):
                for sub, v in value.items():
                    if sub in _SECTIONS[key]:
                        tree[key][sub] = v
                        provided.add(f"{key}.{sub}")
    for assignment in sets:
        before = len(problems)
        _apply_set(tree, assignment, problems)
        if len(problems) == before:
            provided.add(assignment.split("=", 1)[0])
    if problems:
        raise ConfigError(problems)
    return tree, provided


def _build_synth(tree: dict) -> SynthConfig:
    section = tree["synth"]
    params = section.get("class_params")
    return SynthConfig(
        seed=int(tree["seed"]),
        classes=tuple(MovementClass[name] for name in section["classes"]),
        trials_per_class=int(section["trials_per_class"]),
        channels=int(section["channels"]),
        fs=float(section["fs"]),
        duration=float(section["duration"]),
        onset_range_s=tuple(section["onset_range_s"]),
        ramp_samples=int(section["ramp_samples"]),
        noise_level=float(section["noise_level"]),
        gain_range=tuple(section["gain_range"]),
        subject_id=section["subject_id"],
        class_params=None
        if params is None
        else tuple(
            ClassSignalParams(
                amplitudes=tuple(p["amplitudes"]),
                fast_fraction=tuple(p["fast_fraction"]),
                fast_hz=float(p.get("fast_hz", 110.0)),
                slow_hz=float(p.get("slow_hz", 25.0)),
                pole_radius=float(p.get("pole_radius", 0.9)),
            )
            for p in params
        ),
    )


def _build_pipeline(tree: dict) -> PipelineConfig:
    p = tree["pipeline"]
    return PipelineConfig(
        schema_id=p["schema_id"],
        reduction=p["reduction"],
        classifier=ClassifierConfig(**tree["classifier"]),
        windowing=WindowingConfig(**tree["windowing"]),
        sift=SiftConfig(**tree["sift"]),
        seed=int(tree["seed"]),
        grid=tuple(int(g) for g in p["grid"]),
        repetitions=int(p["repetitions"]),
        inner_repetitions=int(p["inner_repetitions"]),
        inner_train_fraction=float(p["inner_train_fraction"]),
        relief_m=int(p["relief_m"]),
        allow_unequal=bool(p["allow_unequal"]),
        wamp_threshold=float(p["wamp_threshold"]),
        zc_threshold=float(p["zc_threshold"]),
        if_edge_trim=float(p["if_edge_trim"]),
    )


def _echo(tree: dict) -> None:
    print("resolved config:", file=sys.stderr)
    print(json.dumps(tree, indent=2), file=sys.stderr)


def _require(provided: set[str], keys: list[str]) -> None:
    missing = [k for k in keys if k not in provided]
    if missing:
        raise ConfigError([f"missing key: {k}" for k in missing])


# ---------------------------------------------------------------------------
# Report rendering (per-class recall row + aggregated confusion table)


def _display_order(classes) -> list[int]:
    six = tuple(int(c) for c in TABLE_CLASS_ORDER)
    if set(classes) == set(six):
        return [classes.index(c) for c in six]
    return list(range(len(classes)))


def _class_code(code: int) -> str:
    try:
        return MovementClass(code).code
    except ValueError:
        return str(code)


def render_report(report) -> str:
    order = _display_order(list(report.classes))
    codes = [_class_code(report.classes[i]) for i in order]
    recalls = report.confusion.per_class_recall()
    lines = []
    lines.append(f"overall accuracy: {report.overall_accuracy:.2f} %")
    lines.append("")
    lines.append("per-class recall (%):")
    lines.append("  " + "".join(f"{c:>9}" for c in codes) + " |  overall")
    lines.append(
        "  "
        + "".join(f"{recalls[i]:>9.1f}" for i in order)
        + f" | {report.overall_accuracy:>8.1f}"
    )
    lines.append("")
    lines.append("aggregated confusion matrix (rows = true, columns = predicted):")
    lines.append("      " + "".join(f"{c:>9}" for c in codes))
    for i in order:
        row = report.confusion.counts[i]
        lines.append(f"  {_class_code(report.classes[i]):>3} " + "".join(f"{row[j]:>9}" for j in order))
    lines.append("")
    lines.append("folds (repetition, fold, accuracy %, selected dimensions):")
    for f in report.fold_results:
        sel = "-" if f.selected is None else str(f.selected)
        lines.append(f"  rep {f.repetition} fold {f.fold}: {f.accuracy:6.2f}  selected={sel}")
    return "\n".join(lines) + "\n"


def render_summary_csv(report) -> str:
    order = _display_order(list(report.classes))
    recalls = report.confusion.per_class_recall()
    header = ",".join(_class_code(report.classes[i]) for i in order)
    values = ",".join(f"{recalls[i]:.17g}" for i in order)
    return f"{header},overall\n{values},{report.overall_accuracy:.17g}\n"


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args, tree) -> int:
    cfg = _build_synth(tree)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trials = generate_synthetic(cfg)
    entries = []
    for trial in trials:
        name = f"{trial.subject_id}_{trial.label.name.lower()}_{trial.trial_index:03d}.txt"
        (out / name).write_text(format_trial_text(trial))
        entries.append(ManifestEntry(name, trial.label, trial.subject_id, trial.trial_index))
    manifest = TrialFileManifest(cfg.fs, cfg.channels, "rows", tuple(entries))
    save_manifest(manifest, out / "manifest.json")
    print(f"wrote {len(trials)} trials and manifest.json to {out}", file=sys.stderr)
    return 0


def cmd_decompose(args, tree) -> int:
    sift = SiftConfig(**tree["sift"])
    trial = parse_trial_text(Path(args.input).read_text(), args.fs, args.layout)
    out_dir = Path(args.out) if args.out else Path(args.input).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem

    decompositions = [emd(ch.samples, sift) for ch in trial.channels]
    n_imfs = max((len(d.imfs) for d in decompositions), default=0)
    imf_files = []
    for k in range(n_imfs):
        rows = [
            d.imfs[k] if k < len(d.imfs) else np.zeros(trial.n_samples) for d in decompositions
        ]
        path = out_dir / f"{stem}_imf{k + 1}.txt"
        path.write_text("\n".join(" ".join(f"{v:.17g}" for v in row) for row in rows) + "\n")
        imf_files.append(str(path))
    residual_path = out_dir / f"{stem}_residual.txt"
    residual_path.write_text(
        "\n".join(" ".join(f"{v:.17g}" for v in d.residual) for d in decompositions) + "\n"
    )
    max_err = max(
        float(np.max(np.abs(ch.samples - d.reconstruct())))
        for ch, d in zip(trial.channels, decompositions)
    )
    print(
        json.dumps(
            {
                "imf_files": imf_files,
                "residual_file": str(residual_path),
                "imfs_per_channel": [len(d.imfs) for d in decompositions],
                "max_reconstruction_error": max_err,
            },
            indent=2,
        )
    )
    return 0


def _trials_from_args(args, tree):
    if getattr(args, "manifest", None):
        manifest = load_manifest(args.manifest)
        return load_trials(manifest, Path(args.manifest).parent)
    return generate_synthetic(_build_synth(tree))


def cmd_features(args, tree) -> int:
    pipeline = _build_pipeline(tree)
    trials = _trials_from_args(args, tree)
    schema = schema_for(pipeline.schema_id, trials[0].n_channels)
    datasets = [
        featurize_trial(
            t,
            schema,
            pipeline.windowing,
            pipeline.sift,
            wamp_threshold=pipeline.wamp_threshold,
            zc_threshold=pipeline.zc_threshold,
            edge_trim=pipeline.if_edge_trim,
        )
        for t in trials
    ]
    data = write_feature_dataset(concat_datasets(datasets))
    Path(args.out).write_bytes(data)
    print(f"wrote {sum(d.n_rows for d in datasets)} feature rows to {args.out}", file=sys.stderr)
    return 0


def cmd_train(args, tree, provided) -> int:
    _require(provided, ["classifier.kind"])
    pipeline = _build_pipeline(tree)
    schema = schema_for(pipeline.schema_id, args.channels)
    dataset = read_feature_dataset(Path(args.dataset).read_bytes(), schema)

    state = standardize_fit(dataset.X)
    X = standardize_apply(state, dataset.X)
    pca = None
    relief_columns = None
    if pipeline.reduction == "pca":
        pca = pca_fit(X, args.retained or X.shape[1])
        X = pca_transform(pca, X)
    elif pipeline.reduction == "relief":
        weights = relief_e(X, dataset.labels, m=pipeline.relief_m, seed=pipeline.seed)
        relief_columns = tuple(select_top(weights.weights, args.retained or X.shape[1]))
        X = X[:, list(relief_columns)]

    from .crossval import build_classifier

    clf = build_classifier(pipeline.classifier, seed=pipeline.seed)
    clf.fit(X, dataset.labels)
    model = PipelineModel(
        schema_id=pipeline.schema_id,
        channels=args.channels,
        windowing=pipeline.windowing,
        sift=pipeline.sift,
        standardizer=state,
        reduction=pipeline.reduction,
        pca=pca,
        relief_columns=relief_columns,
        classifier_type="svm_multiclass" if pipeline.classifier.kind == "svm" else pipeline.classifier.kind,
        classifier=clf.model,
        wamp_threshold=pipeline.wamp_threshold,
        zc_threshold=pipeline.zc_threshold,
        if_edge_trim=pipeline.if_edge_trim,
        fs=args.fs,
    )
    Path(args.out).write_text(pipeline_model_to_json(model))
    print(f"wrote model to {args.out}", file=sys.stderr)
    return 0


def cmd_eval(args, tree, provided) -> int:
    _require(provided, ["classifier.kind"])
    pipeline = _build_pipeline(tree)
    trials = _trials_from_args(args, tree)
    report = five_by_two_cv(trials, pipeline)
    sys.stdout.write(render_report(report))
    if args.report_out:
        Path(args.report_out).write_text(report_to_json(report))
        print(f"wrote report to {args.report_out}", file=sys.stderr)
    if args.summary_out:
        Path(args.summary_out).write_text(render_summary_csv(report))
        print(f"wrote summary to {args.summary_out}", file=sys.stderr)
    return 0


def cmd_predict(args, tree) -> int:
    model = pipeline_model_from_json(Path(args.model).read_text())
    trial = parse_trial_text(Path(args.input).read_text(), model.fs, args.layout)
    dataset = featurize_trial(
        trial,
        model.schema(),
        model.windowing,
        model.sift,
        wamp_threshold=model.wamp_threshold,
        zc_threshold=model.zc_threshold,
        edge_trim=model.if_edge_trim,
    )
    if dataset.n_rows == 0:
        print("no full analysis window fits this recording", file=sys.stderr)
        return 1
    predictions = model.predict(dataset.X)
    print("window,prediction")
    for idx, pred in zip(dataset.window_indices, predictions):
        print(f"{idx},{dataio._label_token(int(pred))}")
    values, counts = np.unique(predictions, return_counts=True)
    majority = int(values[np.argmax(counts)])
    print(f"majority,{dataio._label_token(majority)}")
    return 0


def cmd_simplot(args, tree) -> int:
    if args.mode == "encode":
        trial = parse_trial_text(Path(args.input).read_text(), fs=args.fs, channel_layout=args.layout)
        matrix = np.vstack([ch.samples for ch in trial.channels]).T  # sample-major
        rounded = np.rint(matrix)
        if np.max(np.abs(matrix - rounded)) > 1e-6:
            print("simplot encode needs integer-valued samples", file=sys.stderr)
            return 1
        if rounded.min() < -32768 or rounded.max() > 32767:
            print("samples outside the int16 range", file=sys.stderr)
            return 1
        blob = b"".join(
            simplot_encode(SimplotFrame(tuple(int(v) for v in row))) for row in rounded
        )
        Path(args.out).write_bytes(blob)
        print(f"encoded {rounded.shape[0]} frames", file=sys.stderr)
        return 0
    decoder = SimplotStreamDecoder()
    frames = decoder.feed(Path(args.input).read_bytes())
    if not frames:
        print("no frames found", file=sys.stderr)
        return 1
    widths = {len(f.samples) for f in frames}
    if len(widths) != 1:
        print(f"mixed channel counts in stream: {sorted(widths)}", file=sys.stderr)
        return 1
    matrix = np.array([f.samples for f in frames], dtype=np.float64).T
    Path(args.out).write_text(
        "\n".join(" ".join(f"{v:.17g}" for v in row) for row in matrix) + "\n"
    )
    print(
        f"decoded {len(frames)} frames ({decoder.skipped_bytes} bytes skipped)",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emgrasp", description=__doc__)
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable; overrides the file)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate labeled synthetic recordings")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("decompose", help="write per-mode component files for one trial")
    p.add_argument("--input", required=True)
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--layout", default="rows", choices=["rows", "columns"])
    p.add_argument("--out", help="output directory (defaults to the input's)")

    p = sub.add_parser("features", help="extract a feature dataset from trials")
    p.add_argument("--manifest", help="trial manifest (otherwise synthesize per config)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a classifier on a feature dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--retained", type=int, help="retained dimensions for pca/relief")

    p = sub.add_parser("eval", help="run the 5x2 cross-validation and report")
    p.add_argument("--manifest", help="trial manifest (otherwise synthesize per config)")
    p.add_argument("--report-out", help="write the JSON report here")
    p.add_argument("--summary-out", help="write the per-class summary CSV here")

    p = sub.add_parser("predict", help="apply a saved model to one trial")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--layout", default="rows", choices=["rows", "columns"])

    p = sub.add_parser("simplot", help="convert trial text to/from SimPlot framing")
    p.add_argument("--mode", required=True, choices=["encode", "decode"])
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--layout", default="rows", choices=["rows", "columns"])

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        tree, provided = resolve_config(args.config, args.set)
    except ConfigError as err:
        for problem in err.problems:
            print(problem, file=sys.stderr)
        return 2
    _echo(tree)
    try:
        if args.command == "synth":
            return cmd_synth(args, tree)
        if args.command == "decompose":
            return cmd_decompose(args, tree)
        if args.command == "features":
            return cmd_features(args, tree)
        if args.command == "train":
            return cmd_train(args, tree, provided)
        if args.command == "eval":
            return cmd_eval(args, tree, provided)
        if args.command == "predict":
            return cmd_predict(args, tree)
        if args.command == "simplot":
            return cmd_simplot(args, tree)
    except ConfigError as err:
        for problem in err.problems:
            print(problem, file=sys.stderr)
        return 2
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
