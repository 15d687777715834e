"""Command-line pipeline: train, extract, evaluate, select, audit.

Subcommands mirror the processing stages; every option can also come from
a JSON config file (--config), with explicit flags taking precedence.
Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Each output directory receives a provenance.json naming input hashes, the
seed, and the tool version so runs are reproducible and auditable.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .articulation import (
    ArticulationScorer,
    load_articulation,
    pool_phone_frames,
    save_articulation,
)
from .audio import read_wav
from .corpus import load_manifest, load_ratings
from .errors import NapError
from .features import (
    aggregate,
    all_feature_names,
    read_feature_table,
    resolve_preset,
    write_feature_table,
)
from .nasalization import (
    NasalizationScorer,
    load_nasalization,
    pool_nasalization_frames,
    save_nasalization,
)
from .regression import (
    DEFAULT_LAMBDA_GRID,
    forward_select,
    lodo_evaluate,
    loso_evaluate,
    write_report_csv,
    write_report_json,
    write_selection_csv,
)
from .scores import write_scores_csv
from .textgrid import assign_nasal_classes, audit_alignment, parse_textgrid

logger = logging.getLogger("nap")

NASAL_SUBDIR = "nasalization"
ARTIC_SUBDIR = "articulation"

USAGE_ERROR = 2
RUNTIME_ERROR = 1


@dataclass(frozen=True)
class Option:
    name: str
    type: type
    default: object = None
    required: bool = False
    help: str = ""
    choices: tuple = None
    flag: bool = False


_COMMON_TRAIN = [
    Option("manifest", Path, required=True, help="corpus manifest CSV"),
    Option("out", Path, required=True, help="output directory"),
    Option("seed", int, 0, help="training RNG seed"),
    Option("n-components", int, 16, help="GMM mixture size"),
    Option("max-iters", int, 100, help="EM iteration cap"),
    Option("tol", float, 1e-6, help="EM relative log-likelihood tolerance"),
    Option("workers", int, 1, help="parallel feature-extraction workers"),
    Option("words-tier", str, "words", help="TextGrid word tier name"),
    Option("phones-tier", str, "phones", help="TextGrid phone tier name"),
]

OPTIONS = {
    "train-nasal": _COMMON_TRAIN,
    "train-artic": _COMMON_TRAIN,
    "extract": [
        Option("manifest", Path, required=True, help="clinical corpus manifest CSV"),
        Option("models", Path, required=True,
               help="directory containing nasalization/ and articulation/ models"),
        Option("out", Path, required=True, help="output directory"),
        Option("workers", int, 1, help="parallel scoring workers"),
        Option("words-tier", str, "words", help="TextGrid word tier name"),
        Option("phones-tier", str, "phones", help="TextGrid phone tier name"),
    ],
    "evaluate": [
        Option("feature-table", Path, required=True, help="feature CSV from extract"),
        Option("ratings", Path, required=True, help="clinician ratings CSV"),
        Option("out", Path, required=True, help="output directory"),
        Option("scheme", str, "loso", choices=("loso", "lodo"), help="cross-validation scheme"),
        Option("held-out", str, None, help="disease held out (lodo only)"),
        Option("manifest", Path, None, help="manifest CSV (needed for lodo grouping)"),
        Option("lambda", float, 1.0, help="ridge penalty"),
        Option("sweep-lambda", bool, False, flag=True,
               help="select the penalty per fold by inner cross-validation "
                    "over a 1e-3..1e2 grid (overrides --lambda)"),
        Option("features", str, "all", choices=("paper-top6", "all"),
               help="feature preset"),
    ],
    "select": [
        Option("feature-table", Path, required=True, help="feature CSV from extract"),
        Option("ratings", Path, required=True, help="clinician ratings CSV"),
        Option("out", Path, required=True, help="output directory"),
        Option("lambda", float, 1.0, help="ridge penalty"),
        Option("features", str, "all", choices=("paper-top6", "all"),
               help="candidate feature preset"),
        Option("max-features", int, None, help="cap on selected features"),
    ],
    "audit-alignment": [
        Option("manifest", Path, required=True, help="corpus manifest CSV"),
        Option("manual-dir", Path, required=True,
               help="directory of manually aligned <utterance_id>.TextGrid files"),
        Option("ratings", Path, None,
               help="ratings CSV; articulatory_precision column is joined when present"),
        Option("out", Path, required=True, help="output directory"),
        Option("words-tier", str, "words", help="TextGrid word tier name"),
        Option("phones-tier", str, "phones", help="TextGrid phone tier name"),
        Option("manual-tier", str, "phones", help="manual tier audited against"),
    ],
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nap",
        description="Hypernasality estimation from aligned speech recordings.",
    )
    parser.add_argument("--version", action="version", version=f"nap {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command, options in OPTIONS.items():
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", type=Path, default=None,
                         help="JSON file of option defaults (flags override)")
        for option in options:
            dest = option.name.replace("-", "_")
            if option.flag:
                sub.add_argument(f"--{option.name}", action="store_true",
                                 default=None, help=option.help, dest=dest)
                continue
            kwargs = {"type": option.type, "default": None, "help": option.help,
                      "dest": dest}
            if option.choices:
                kwargs["choices"] = option.choices
            sub.add_argument(f"--{option.name}", **kwargs)
    return parser


def _merge_config(args: argparse.Namespace, options) -> dict:
    """Resolve each option: explicit flag > config file > declared default."""
    from_file = {}
    if args.config is not None:
        if not args.config.exists():
            raise _UsageError(f"config file not found: {args.config}")
        with open(args.config, encoding="utf-8") as handle:
            from_file = json.load(handle)
    resolved = {}
    for option in options:
        key = option.name.replace("-", "_")
        value = getattr(args, key)
        if value is None and key in from_file and from_file[key] is not None:
            value = option.type(from_file[key])
        if value is None:
            value = option.default
        if value is None and option.required:
            raise _UsageError(f"missing required option --{option.name}")
        resolved[key] = value
    return resolved


class _UsageError(Exception):
    pass


def _require_file(path: Path, label: str) -> None:
    if not Path(path).exists():
        raise _UsageError(f"{label} not found: {path}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_provenance(out_dir: Path, command: str, resolved: dict,
                      input_keys: tuple) -> None:
    inputs = {}
    for key in input_keys:
        value = resolved.get(key)
        if value is None:
            continue
        inputs[key] = {"path": str(value), "sha256": _sha256(value)}
    record = {
        "tool": "napspeech",
        "version": __version__,
        "command": command,
        "seed": resolved.get("seed"),
        "options": {k: (str(v) if isinstance(v, Path) else v) for k, v in resolved.items()},
        "inputs": inputs,
    }
    with open(out_dir / "provenance.json", "w", encoding="utf-8") as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _ordered_map(function, items, workers: int):
    items = list(items)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(function, items))
    return [function(item) for item in items]


def _load_pair(entry, words_tier, phones_tier):
    utterance = assign_nasal_classes(
        parse_textgrid(entry.textgrid_path, words_tier, phones_tier)
    )
    return utterance, read_wav(entry.wav_path)


def cmd_train_nasal(resolved: dict) -> int:
    manifest = load_manifest(resolved["manifest"])
    pairs = _ordered_map(
        lambda e: _load_pair(e, resolved["words_tier"], resolved["phones_tier"]),
        manifest.entries, resolved["workers"],
    )
    pools = _ordered_map(lambda pair: pool_nasalization_frames([pair]),
                         pairs, resolved["workers"])
    X_nas = np.vstack([p[0] for p in pools if p[0].size])
    X_orl = np.vstack([p[1] for p in pools if p[1].size])
    scorer = NasalizationScorer(
        n_components=resolved["n_components"], max_iters=resolved["max_iters"],
        tol=resolved["tol"], seed=resolved["seed"],
    )
    X = np.vstack([X_nas, X_orl])
    y = np.concatenate([np.ones(len(X_nas), dtype=bool),
                        np.zeros(len(X_orl), dtype=bool)])
    scorer.fit(X, y)

    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_nasalization(scorer, out_dir)
    log = {
        "nas_frames": int(len(X_nas)),
        "orl_frames": int(len(X_orl)),
        "nas_log_likelihood": [float(v) for v in scorer.gmm_nas_.log_likelihood_trace_],
        "orl_log_likelihood": [float(v) for v in scorer.gmm_orl_.log_likelihood_trace_],
        "nas_reseeds": scorer.gmm_nas_.n_reseeds_,
        "orl_reseeds": scorer.gmm_orl_.n_reseeds_,
    }
    with open(out_dir / "train_log.json", "w", encoding="utf-8") as handle:
        json.dump(log, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_provenance(out_dir, "train-nasal", resolved, ("manifest",))
    logger.info("trained nasalization models on %d NAS / %d ORL frames",
                len(X_nas), len(X_orl))
    return 0


def cmd_train_artic(resolved: dict) -> int:
    manifest = load_manifest(resolved["manifest"])
    pairs = _ordered_map(
        lambda e: _load_pair(e, resolved["words_tier"], resolved["phones_tier"]),
        manifest.entries, resolved["workers"],
    )
    per_utterance = _ordered_map(lambda pair: pool_phone_frames([pair]),
                                 pairs, resolved["workers"])
    merged = {}
    for pools in per_utterance:
        for label, block in pools.items():
            merged.setdefault(label, []).append(block)
    pools = {label: np.vstack(blocks) for label, blocks in sorted(merged.items())}
    X = np.vstack(list(pools.values()))
    y = np.concatenate([
        np.full(block.shape[0], label, dtype=object) for label, block in pools.items()
    ])
    scorer = ArticulationScorer(
        n_components=resolved["n_components"], max_iters=resolved["max_iters"],
        tol=resolved["tol"], seed=resolved["seed"],
    ).fit(X, y)

    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_articulation(scorer, out_dir)
    log = {
        "frames_per_phone": {label: int(block.shape[0]) for label, block in pools.items()},
        "inventory": list(scorer.inventory_),
        "dropped": list(scorer.dropped_),
        "log_likelihood": {
            label: [float(v) for v in model.log_likelihood_trace_]
            for label, model in scorer.phone_gmms_.items()
        },
    }
    with open(out_dir / "train_log.json", "w", encoding="utf-8") as handle:
        json.dump(log, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_provenance(out_dir, "train-artic", resolved, ("manifest",))
    logger.info("trained articulation models for %d phones", len(scorer.inventory_))
    return 0


def cmd_extract(resolved: dict) -> int:
    manifest = load_manifest(resolved["manifest"])
    models_dir = Path(resolved["models"])
    nasal = load_nasalization(models_dir / NASAL_SUBDIR)
    artic = load_articulation(models_dir / ARTIC_SUBDIR)

    def score_entry(entry):
        try:
            utterance = parse_textgrid(entry.textgrid_path, resolved["words_tier"],
                                       resolved["phones_tier"])
            waveform = read_wav(entry.wav_path)
            nas_scores = nasal.score_utterance(utterance, waveform, entry.utterance_id)
            ap_scores = artic.score_utterance(utterance, waveform, entry.utterance_id)
            return entry.speaker_id, nas_scores, ap_scores, None
        except NapError as exc:
            return entry.speaker_id, [], [], f"{entry.utterance_id}: {exc}"

    results = _ordered_map(score_entry, manifest.entries, resolved["workers"])
    warnings = [message for _, _, _, message in results if message]
    for message in warnings:
        logger.warning("skipped utterance: %s", message)

    nas_all = [s for _, nas, _, _ in results for s in nas]
    ap_all = [s for _, _, ap, _ in results for s in ap]
    by_speaker = {}
    for speaker_id, nas_scores, ap_scores, _ in results:
        by_speaker.setdefault(speaker_id, []).extend(nas_scores + ap_scores)
    vectors = [aggregate(scores, speaker_id)
               for speaker_id, scores in by_speaker.items()]

    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scores_csv(nas_all, out_dir / "nasalization_scores.csv")
    write_scores_csv(ap_all, out_dir / "articulation_scores.csv")
    write_feature_table(vectors, out_dir / "features.csv",
                        all_feature_names(vectors))
    _write_provenance(out_dir, "extract", resolved, ("manifest",))
    logger.info("extracted features for %d speakers (%d utterances skipped)",
                len(vectors), len(warnings))
    return 0


def cmd_evaluate(resolved: dict) -> int:
    vectors = read_feature_table(resolved["feature_table"])
    ratings = load_ratings(resolved["ratings"])
    feature_names = resolve_preset(resolved["features"], vectors)
    alpha = resolved["lambda"]
    sweep = DEFAULT_LAMBDA_GRID if resolved.get("sweep_lambda") else None
    if resolved["scheme"] == "lodo":
        if not resolved.get("held_out"):
            raise _UsageError("--held-out <disease> is required with --scheme lodo")
        if not resolved.get("manifest"):
            raise _UsageError("--manifest is required with --scheme lodo")
        manifest = load_manifest(resolved["manifest"], check_paths=False)
        report = lodo_evaluate(vectors, ratings, manifest, resolved["held_out"],
                               feature_names, alpha, sweep=sweep)
    else:
        report = loso_evaluate(vectors, ratings, feature_names, alpha, sweep=sweep)

    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report_json(report, out_dir / "report.json")
    write_report_csv(report, out_dir / "predictions.csv")
    _write_provenance(out_dir, "evaluate", resolved,
                      ("feature_table", "ratings", "manifest"))
    logger.info("%s: MAE %.4f PCC %.4f over %d speakers",
                report.scheme, report.mae, report.pcc, len(report.speaker_ids))
    return 0


def cmd_select(resolved: dict) -> int:
    vectors = read_feature_table(resolved["feature_table"])
    ratings = load_ratings(resolved["ratings"])
    candidates = resolve_preset(resolved["features"], vectors)
    trace = forward_select(vectors, ratings, candidates,
                           alpha=resolved["lambda"],
                           max_features=resolved["max_features"])
    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_selection_csv(trace, out_dir / "selection.csv")
    _write_provenance(out_dir, "select", resolved, ("feature_table", "ratings"))
    for step in trace:
        logger.info("step %d: %s (mse %.6f, pcc %.4f)",
                    step.step, step.feature, step.mse, step.pcc)
    return 0


def cmd_audit_alignment(resolved: dict) -> int:
    manifest = load_manifest(resolved["manifest"])
    manual_dir = Path(resolved["manual_dir"])
    ratings = None
    if resolved.get("ratings"):
        ratings = load_ratings(resolved["ratings"])

    per_speaker = {}
    for entry in manifest.entries:
        auto = parse_textgrid(entry.textgrid_path, resolved["words_tier"],
                              resolved["phones_tier"])
        manual_path = manual_dir / f"{entry.utterance_id}.TextGrid"
        _require_file(manual_path, "manual TextGrid")
        manual = parse_textgrid(manual_path, resolved["words_tier"],
                                resolved["manual_tier"])
        error = audit_alignment(auto, manual)
        per_speaker.setdefault(entry.speaker_id, []).append(error)

    out_dir = Path(resolved["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    include_ap = ratings is not None and bool(ratings.articulatory_precision)
    with open(out_dir / "alignment_audit.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = ["speaker_id", "mean_alignment_error"]
        if include_ap:
            header.append("articulatory_precision")
        writer.writerow(header)
        for speaker_id in sorted(per_speaker):
            row = [speaker_id, repr(float(np.mean(per_speaker[speaker_id])))]
            if include_ap:
                ap = ratings.articulatory_precision.get(speaker_id)
                row.append("" if ap is None else repr(ap))
            writer.writerow(row)
    _write_provenance(out_dir, "audit-alignment", resolved, ("manifest", "ratings"))
    return 0


_HANDLERS = {
    "train-nasal": (cmd_train_nasal, ("manifest",)),
    "train-artic": (cmd_train_artic, ("manifest",)),
    "extract": (cmd_extract, ("manifest", "models")),
    "evaluate": (cmd_evaluate, ("feature_table", "ratings")),
    "select": (cmd_select, ("feature_table", "ratings")),
    "audit-alignment": (cmd_audit_alignment, ("manifest", "manual_dir")),
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR

    handler, path_keys = _HANDLERS[args.command]
    try:
        resolved = _merge_config(args, OPTIONS[args.command])
        for key in path_keys:
            if resolved.get(key) is not None:
                _require_file(resolved[key], f"--{key.replace('_', '-')}")
        return handler(resolved)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except NapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("unexpected failure: %s", exc)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
