"""Command-line surface for batch fingerprinting workflows.

Exit codes: 0 success, 2 configuration error (bad or missing flags),
3 data error (unreadable captures, insufficient traffic, bad documents).
Errors are reported as a single machine-parseable line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, ml, synth
from .errors import InsufficientTraffic, IotprintError
from .features import FEATURE_NAMES, extract_features, ecdf, render_features_csv
from .fingerprint import (
    build_fingerprints,
    build_profile,
    format_session_average,
    load_profile,
    packets_from_capture,
    save_profile,
    session_stats,
)
from .packet_model import parse_mac
from .pcap_io import DeviceSelector, filter_device, write_capture

IDENTIFY_SCHEMA = "identify-report/1"
LABELS_SCHEMA = "trace-labels/1"

_ECDF_ALIASES = {"entropy": "entropy", "length": "tcp_payload_length", "window": "tcp_window_size"}

# fingerprint width -> feature variant, used to project capture data onto
# whatever variant a stored model was trained with
_WIDTH_TO_VARIANT = {100: 20, 95: 19, 15: 3}


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep errors to one parseable line
        raise _ConfigError(message)


def _add_selector(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mac", type=parse_mac, help="device MAC, e.g. 02:00:00:00:01:01")
    parser.add_argument("--ip", help="device IP address")


def _selector(args: argparse.Namespace, required: bool) -> DeviceSelector | None:
    if args.mac is None and args.ip is None:
        if required:
            raise _ConfigError("a device selector (--mac and/or --ip) is required")
        return None
    return DeviceSelector(mac=args.mac, ip=args.ip)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iotprint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write per-packet feature CSV")
    p.add_argument("--pcap", required=True)
    _add_selector(p)
    p.add_argument("--out", help="output CSV path (default: stdout)")

    p = sub.add_parser("profile", help="build and persist a behavioral profile")
    p.add_argument("--pcap", required=True)
    _add_selector(p)
    p.add_argument("--label", required=True, help="device label")
    p.add_argument("--category", required=True, help="device category label")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sessions", help="print port-pair session statistics")
    p.add_argument("--pcap", required=True)
    _add_selector(p)

    p = sub.add_parser("ecdf", help="print a feature ECDF table per capture")
    p.add_argument("feature", choices=sorted(set(FEATURE_NAMES[17:]) | set(_ECDF_ALIASES)))
    p.add_argument("pcaps", nargs="+")

    p = sub.add_parser("train", help="train and persist a one-vs-all model")
    p.add_argument("--profiles", nargs="+", required=True)
    p.add_argument("--positive", required=True, help="positive class label")
    p.add_argument("--classifier", choices=evaluation.CLASSIFIERS, default="boosted")
    p.add_argument("--variant", type=int, choices=(20, 19, 3), default=20)
    p.add_argument("--level", choices=("device", "category"), default="device")
    p.add_argument("--out", required=True)

    p = sub.add_parser("identify", help="fingerprint a capture against stored models")
    p.add_argument("models", nargs="+", help="model document paths")
    p.add_argument("--pcap", required=True)
    _add_selector(p)

    p = sub.add_parser("evaluate", help="run the cross-validation experiment")
    p.add_argument("--profiles", nargs="+", required=True)
    p.add_argument("--level", choices=evaluation.LEVELS, default="device")
    p.add_argument("--classifier", choices=evaluation.CLASSIFIERS, default="boosted")
    p.add_argument("--variant", type=int, choices=(20, 19, 3), default=20)
    p.add_argument("--folds", type=int, default=evaluation.DEFAULT_FOLDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here")

    p = sub.add_parser("synth", help="generate labeled synthetic captures")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--corpus", action="store_true", help="emit the standard corpus")
    group.add_argument("--archetype", choices=sorted(synth.ARCHETYPES))
    p.add_argument("--packets", type=int, default=synth.CORPUS_PACKETS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    return parser


def _cmd_extract(args) -> int:
    packets, _ = packets_from_capture(args.pcap)
    sel = _selector(args, required=False)
    if sel is not None:
        packets = filter_device(packets, sel)
    csv_text = render_features_csv([extract_features(p) for p in packets])
    if args.out:
        Path(args.out).write_text(csv_text, encoding="ascii")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_profile(args) -> int:
    profile = build_profile(args.pcap, _selector(args, required=True), args.label, args.category)
    save_profile(profile, args.out)
    print(f"wrote profile {args.label!r} with {len(profile.fingerprints)} fingerprints")
    return 0


def _cmd_sessions(args) -> int:
    packets, _ = packets_from_capture(args.pcap)
    sel = _selector(args, required=False)
    if sel is not None:
        packets = filter_device(packets, sel)
    stats = session_stats(packets)
    print("Total Sessions' Packets  Sessions  Packets/Session")
    print(
        f"{stats.total_session_packets:<23}  {stats.session_count:<8}  "
        f"{format_session_average(stats.avg_packets_per_session)}"
    )
    return 0


def _cmd_ecdf(args) -> int:
    column = _ECDF_ALIASES.get(args.feature, args.feature)
    index = FEATURE_NAMES.index(column)
    for path in args.pcaps:
        packets, _ = packets_from_capture(path)
        values = [extract_features(p).as_vector()[index] for p in packets]
        print(f"# capture: {path}  feature: {column}  n={len(values)}")
        print("value\tprobability")
        for value, prob in ecdf(values):
            print(f"{value!r}\t{prob!r}")
    return 0


def _load_profiles(paths) -> list:
    return [load_profile(p) for p in paths]


def _cmd_train(args) -> int:
    profiles = _load_profiles(args.profiles)
    data = evaluation.assemble_one_vs_all(profiles, args.positive, args.level)
    cols = evaluation.variant_columns(args.variant)
    reduced = ml.LabeledDataset(data.rows[:, cols], data.labels, data.positive_class)
    model = evaluation.train_classifier(args.classifier, reduced)
    ml.save_model(model, args.out)
    print(f"wrote {args.classifier} model for {args.positive!r} ({len(reduced)} rows)")
    return 0


def _model_predicts_positive(model, rows):
    if isinstance(model, ml.BoostedModel):
        return ml.boosted_scores(model, rows) >= 0
    if isinstance(model, ml.KnnModel):
        return ml.knn_labels(model, rows) == 1
    if isinstance(model, ml.TreeModel):
        return ml.tree_labels(model, rows) == 1
    votes = (
        np.where(ml.boosted_scores(model.boosted, rows) >= 0, 1, -1)
        + ml.knn_labels(model.knn, rows)
        + ml.tree_labels(model.tree, rows)
    )
    return votes > 0


def _cmd_identify(args) -> int:
    packets, _ = packets_from_capture(args.pcap)
    sel = _selector(args, required=False)
    if sel is not None:
        packets = filter_device(packets, sel)
    feats = [extract_features(p) for p in packets]
    prints = build_fingerprints(feats, label="target")
    if not prints:
        raise InsufficientTraffic(
            f"insufficient traffic: {len(packets)} packets yield no fingerprints"
        )
    rows = np.asarray([fp.values for fp in prints])
    models = [ml.load_model(p) for p in args.models]
    per_fingerprint = [[] for _ in prints]
    positives = {}
    for model in models:
        variant = _WIDTH_TO_VARIANT.get(model.n_features)
        if variant is None:
            raise IotprintError(f"model expects {model.n_features} features; cannot map")
        cols = evaluation.variant_columns(variant)
        hits = _model_predicts_positive(model, rows[:, cols])
        positives[model.positive_class] = int(hits.sum())
        for i in np.flatnonzero(hits):
            per_fingerprint[int(i)].append(model.positive_class)
    best = max(positives.values())
    leaders = [label for label, n in positives.items() if n == best]
    verdict = leaders[0] if best > len(prints) / 2 and len(leaders) == 1 else "unknown"
    doc = {
        "schema": IDENTIFY_SCHEMA,
        "fingerprints": len(prints),
        "positives_per_model": positives,
        "per_fingerprint": per_fingerprint,
        "verdict": verdict,
    }
    print(json.dumps(doc, indent=1))
    return 0


def _cmd_evaluate(args) -> int:
    profiles = _load_profiles(args.profiles)
    report = evaluation.run_experiment(
        profiles,
        level=args.level,
        classifier=args.classifier,
        variant=args.variant,
        k=args.folds,
        seed=args.seed,
    )
    sys.stdout.write(evaluation.format_report(report))
    if args.out:
        evaluation.save_report(report, args.out)
    return 0


def _write_trace(out_dir: Path, stem: str, frames, labels) -> None:
    write_capture(out_dir / f"{stem}.pcap", frames)
    doc = {"schema": LABELS_SCHEMA, "labels": list(labels)}
    (out_dir / f"{stem}.labels.json").write_text(json.dumps(doc, indent=1) + "\n")


def _cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.corpus:
        for entry in synth.standard_corpus(args.seed):
            stem = f"{entry.archetype.name}-{entry.instance}"
            _write_trace(out_dir, stem, entry.frames, entry.labels)
            print(f"wrote {stem}.pcap ({len(entry.frames)} frames)")
    else:
        arch = synth.ARCHETYPES[args.archetype]
        frames, labels = synth.generate_trace(arch, args.packets, args.seed)
        _write_trace(out_dir, arch.name, frames, labels)
        print(f"wrote {arch.name}.pcap ({len(frames)} frames)")
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "profile": _cmd_profile,
    "sessions": _cmd_sessions,
    "ecdf": _cmd_ecdf,
    "train": _cmd_train,
    "identify": _cmd_identify,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ConfigError as err:
        print(f"error: config: {err}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except _ConfigError as err:
        print(f"error: config: {err}", file=sys.stderr)
        return 2
    except (IotprintError, OSError, ValueError) as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
