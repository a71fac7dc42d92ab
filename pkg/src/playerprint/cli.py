"""playerprint command line: synth, extract, dataset, train, evaluate, sweep.

Exit status is 0 on success, 2 on usage errors and 1 on data errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .datasets import (
    ExtractConfig,
    LabeledDataset,
    MOUSE_FAMILIES,
    STATS_FAMILY,
    build_pair_dataset,
    build_pool_dataset,
    extract_bundle,
    make_folds,
    write_family_csv,
    write_manifest,
)
from .events import ReplayError, read_stream
from .items import ENCODINGS, ItemCatalog, load_catalog
from .learners import MODEL_KINDS, ModelSpec
from .mouse import FEATURE_NAMES, SegmentationConfig, complex_actions
from .pipeline import (
    EnsembleSpec,
    evaluate_cv,
    feature_combinations,
    run_sweep,
    save_ensemble,
    train_ensemble,
    write_report,
    write_sweep_long,
    write_sweep_wide,
)
from .stats import SUPPORTED_SLICES, game_stats, write_stats_csv
from .synth import generate_pool, load_profiles, make_profiles, save_profiles, write_corpus

logger = logging.getLogger("playerprint")

RESERVED_FILES = {"manifest.ndjson", "profiles.ndjson"}
DEFAULT_POOL_ACTION_CAP = 50


class DataError(Exception):
    """Bad input data; reported with exit status 1."""


# --- shared helpers ----------------------------------------------------------


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_metadata(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    return {"tool": "playerprint", "version": __version__, "command": args.command, "config": config}


def _catalog(args) -> ItemCatalog:
    try:
        return load_catalog(args.catalog)
    except (OSError, ValueError) as exc:
        raise DataError(f"catalog {args.catalog or '(default)'}: {exc}") from None


def corpus_files(corpus: Path) -> list[Path]:
    """Replay files of a corpus: manifest order when present, else sorted names."""
    if not corpus.is_dir():
        raise DataError(f"--corpus {corpus}: not a directory")
    manifest = corpus / "manifest.ndjson"
    if manifest.exists():
        files = []
        for n, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                files.append(corpus / f"{json.loads(line)['match_id']}.ndjson")
            except (ValueError, KeyError):
                raise DataError(f"{manifest}:{n}: expected a record with match_id") from None
        return files
    return sorted(p for p in corpus.glob("*.ndjson") if p.name not in RESERVED_FILES)


def load_streams(args):
    files = [Path(p) for p in args.inputs] if getattr(args, "inputs", None) else corpus_files(Path(args.corpus))
    if not files:
        raise DataError(f"no replay files found in {args.corpus}")
    streams = []
    for path in files:
        try:
            streams.append(read_stream(path))
        except OSError as exc:
            raise DataError(f"{path}: {exc.strerror or exc}") from None
        except ReplayError as exc:
            raise DataError(str(exc)) from None
    return streams


def _extract_config(args) -> ExtractConfig:
    return ExtractConfig(
        tau_ms=args.tau_ms,
        slices=args.slices,
        buckets=args.buckets,
        hash_seed=args.hash_seed,
    )


def build_dataset(args, catalog: ItemCatalog) -> LabeledDataset:
    streams = load_streams(args)
    cfg = _extract_config(args)
    bundles = []
    for stream in streams:
        try:
            bundles.append(extract_bundle(stream, catalog, cfg))
        except (ValueError, KeyError) as exc:
            raise DataError(f"match {stream.header.match_id}: {exc}") from None
    try:
        if args.experiment == "pool":
            cap = None if args.max_actions <= 0 else args.max_actions
            return build_pool_dataset(bundles, max_actions_per_match=cap, seed=args.seed)
        return build_pair_dataset(bundles, seed=args.seed, catalog=catalog)
    except ValueError as exc:
        raise DataError(f"{args.corpus}: {exc}") from None


def expand_families(spec: str, items: str) -> tuple[str, ...]:
    out: list[str] = []
    for token in (t.strip() for t in spec.split(",")):
        if token == "mouse":
            out.extend(MOUSE_FAMILIES)
        elif token == "items":
            out.append(items)
        elif token == "all":
            out.extend(MOUSE_FAMILIES + (STATS_FAMILY, items))
        elif token:
            out.append(token)
    return tuple(dict.fromkeys(out))


def _check_families(parser, args, families: Sequence[str]) -> None:
    known = set(MOUSE_FAMILIES) | {STATS_FAMILY} | set(ENCODINGS)
    unknown = [f for f in families if f not in known]
    if unknown:
        parser.error(f"--families: unknown families {unknown}")
    if not families:
        parser.error("--families: nothing selected")
    if "diff" in families and args.experiment != "pairs":
        parser.error("--families: diff is only defined for --experiment pairs")
    if args.slices > 1 and STATS_FAMILY in families:
        parser.error("--slices > 1 cannot be combined with the stats family (stats are whole-match only)")


def _check_slices(parser, args) -> None:
    if args.slices not in SUPPORTED_SLICES:
        parser.error(f"--slices must be one of {SUPPORTED_SLICES}")
    if args.slices > 1 and args.experiment == "pool":
        parser.error("--slices > 1 only applies to --experiment pairs")


def _model(args) -> ModelSpec:
    return ModelSpec(args.model)


# --- subcommands -------------------------------------------------------------


def cmd_synth(args, parser) -> int:
    catalog = _catalog(args)
    out = Path(args.out)
    if args.profiles:
        try:
            profiles = load_profiles(args.profiles)
        except (OSError, ValueError, TypeError, KeyError) as exc:
            raise DataError(f"--profiles {args.profiles}: {exc}") from None
    else:
        profiles = make_profiles(args.n_profiles, args.dial, seed=args.seed, catalog=catalog)
    if len(profiles) < 2:
        raise DataError("a corpus needs at least 2 profiles")
    matches = generate_pool(
        profiles, args.matches, seed=args.seed, duration_min=args.duration, catalog=catalog
    )
    write_corpus(matches, out)
    save_profiles(profiles, out / "profiles.ndjson")
    _write_json(out / "run.json", _run_metadata(args))
    print(f"wrote {len(matches)} matches for {len(profiles)} profiles to {out}")
    return 0


def cmd_extract(args, parser) -> int:
    catalog = _catalog(args)
    streams = load_streams(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _extract_config(args)
    n_actions = 0
    with (out / "actions.csv").open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("match_id", "kind", "tick") + FEATURE_NAMES)
        for stream in streams:
            seg = SegmentationConfig(cfg.tau_ms, stream.header.tick_rate)
            for a in complex_actions(stream.cursor, stream.commands, seg):
                writer.writerow([stream.header.match_id, a.kind, a.tick] + [repr(float(v)) for v in a.features])
                n_actions += 1
    with (out / "stats.csv").open("w", encoding="utf-8", newline="") as handle:
        try:
            write_stats_csv(((s.header.match_id, game_stats(s)) for s in streams), handle)
        except ValueError as exc:
            raise DataError(str(exc)) from None
    bundles = []
    for stream in streams:
        try:
            bundles.append(extract_bundle(stream, catalog, dataclasses.replace(cfg, mouse=False)))
        except (ValueError, KeyError) as exc:
            raise DataError(f"match {stream.header.match_id}: {exc}") from None
    for enc in cfg.encodings:
        if not all(enc in b.items for b in bundles):
            continue
        with (out / f"items-{enc}.csv").open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            width = bundles[0].items[enc].width
            writer.writerow(["match_id"] + [f"{enc}.{i}" for i in range(width)])
            for b in bundles:
                writer.writerow([b.match_id] + [repr(float(v)) for v in b.items[enc].values])
    _write_json(out / "run.json", _run_metadata(args))
    print(f"extracted {n_actions} complex actions from {len(streams)} matches into {out}")
    return 0


def cmd_dataset(args, parser) -> int:
    _check_slices(parser, args)
    catalog = _catalog(args)
    dataset = build_dataset(args, catalog)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        folds = make_folds(dataset, args.k, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    with (out / "manifest.ndjson").open("w", encoding="utf-8", newline="\n") as handle:
        write_manifest(dataset, handle, folds)
    for name in dataset.families:
        with (out / f"{name}.csv").open("w", encoding="utf-8", newline="") as handle:
            write_family_csv(dataset, name, handle)
    _write_json(out / "run.json", _run_metadata(args))
    print(
        f"{args.experiment} dataset: {dataset.n_samples} samples, "
        f"{len(dataset.label_map)} classes, families {', '.join(dataset.families)}"
    )
    return 0


def cmd_train(args, parser) -> int:
    families = expand_families(args.families, args.items)
    _check_slices(parser, args)
    _check_families(parser, args, families)
    catalog = _catalog(args)
    dataset = build_dataset(args, catalog)
    spec = EnsembleSpec.uniform(families, _model(args), seed=args.seed)
    try:
        ensemble = train_ensemble(spec, dataset, np.arange(dataset.n_samples))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    save_ensemble(ensemble, out, dataset.label_map)
    _write_json(out / "run.json", _run_metadata(args))
    print(f"trained {args.model} ensemble on {', '.join(ensemble.families)} ({dataset.n_samples} samples) -> {out}")
    return 0


def cmd_evaluate(args, parser) -> int:
    families = expand_families(args.families, args.items)
    _check_slices(parser, args)
    _check_families(parser, args, families)
    catalog = _catalog(args)
    dataset = build_dataset(args, catalog)
    spec = EnsembleSpec.uniform(families, _model(args), seed=args.seed)
    try:
        result = evaluate_cv(spec, dataset, args.k, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"experiment": args.experiment, "families": list(families), "model": args.model}
    with (out / "report.ndjson").open("w", encoding="utf-8", newline="\n") as handle:
        write_report(result.records(meta), handle)
    _write_json(out / "run.json", _run_metadata(args))
    print(
        f"{args.experiment} / {'+'.join(families)} / {args.model}: "
        f"accuracy {result.accuracy:.4f}, precision {result.precision:.4f}, recall {result.recall:.4f} "
        f"({args.k}-fold)"
    )
    return 0


def cmd_sweep(args, parser) -> int:
    _check_slices(parser, args)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    bad = [m for m in models if m not in MODEL_KINDS]
    if bad or not models:
        parser.error(f"--models: unknown model kinds {bad}; choose from {MODEL_KINDS}")
    if args.families == "all-combos":
        combos = feature_combinations(args.items)
    else:
        fams = expand_families(args.families, args.items)
        combos = [("+".join(fams), fams)]
    for _, fams in combos:
        _check_families(parser, args, fams)
    catalog = _catalog(args)
    dataset = build_dataset(args, catalog)
    specs = [ModelSpec(m) for m in models]
    try:
        rows = run_sweep(dataset, specs, combos, args.k, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out = Path(args.out)
    if out.suffix == ".csv":
        table, stem = out, out.with_suffix("")
    else:
        out.mkdir(parents=True, exist_ok=True)
        table, stem = out / "table.csv", out / "table"
    table.parent.mkdir(parents=True, exist_ok=True)
    with table.open("w", encoding="utf-8", newline="") as handle:
        write_sweep_long(rows, handle)
    with Path(f"{stem}.wide.csv").open("w", encoding="utf-8", newline="") as handle:
        write_sweep_wide(rows, handle)
    _write_json(Path(f"{stem}.run.json"), _run_metadata(args))
    print(f"sweep: {len(rows)} rows ({len({r.combination for r in rows})} combinations x {len(models)} models) -> {table}")
    for r in rows:
        print(f"  {r.combination:<32} {r.model:<7} {r.accuracy:.4f}")
    return 0


# --- parser ------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    p.add_argument("--catalog", default=None, help="item catalog NDJSON (default: $PLAYERPRINT_CATALOG or bundled)")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    if data:
        p.add_argument("--corpus", default="corpus", help="directory of replay NDJSON files")
        p.add_argument("--inputs", nargs="+", default=None, help="explicit replay files (overrides --corpus)")
        p.add_argument("--tau-ms", type=float, default=300.0, help="idle threshold ending a movement sequence")
        p.add_argument("--slices", type=int, default=1, help="time slices P per match (pairs only)")
        p.add_argument("--buckets", type=int, default=64, help="hashed item encoding width")
        p.add_argument("--hash-seed", type=int, default=0, help="seed of the item hash")


def _experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--experiment", "--dataset", dest="experiment", choices=("pool", "pairs"), default="pool",
                   help="closed-pool identification or same-player pairs")
    p.add_argument("--max-actions", type=int, default=DEFAULT_POOL_ACTION_CAP,
                   help="pool only: cap on action rows per match and kind (0 = no cap)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="playerprint", description="Player identification from replay telemetry.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _common(p, data=False)
    p.add_argument("--profiles", default=None, help="profiles NDJSON to generate from (default: draw new ones)")
    p.add_argument("--n-profiles", type=int, default=10, help="profiles to draw when --profiles is absent")
    p.add_argument("--dial", type=float, default=1.0, help="separability in [0, 1] for drawn profiles")
    p.add_argument("--matches", type=int, default=8, help="matches per profile")
    p.add_argument("--duration", type=float, default=6.0, help="match length in minutes")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="export complex actions, game stats and item encodings as CSV")
    _common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("dataset", help="assemble a labeled dataset with folds")
    _common(p)
    _experiment(p)
    p.add_argument("--k", type=int, default=5, help="fold count")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_dataset)

    for name, func, helptext in (
        ("train", cmd_train, "train an ensemble on the whole dataset"),
        ("evaluate", cmd_evaluate, "k-fold cross-validate an ensemble"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _experiment(p)
        p.add_argument("--families", default="all", help="comma list of families; aliases: mouse, items, all")
        p.add_argument("--items", default="starting", choices=ENCODINGS, help="encoding used by the items alias")
        p.add_argument("--model", default="forest", choices=MODEL_KINDS, help="base model kind")
        if name == "evaluate":
            p.add_argument("--k", type=int, default=5, help="fold count")
        p.add_argument("--out", default="run", help="output directory")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="evaluate every feature combination with every model")
    _common(p)
    _experiment(p)
    p.add_argument("--families", default="all-combos", help="all-combos, or one comma list")
    p.add_argument("--items", default="starting", choices=ENCODINGS, help="encoding of the single items family")
    p.add_argument("--models", default="logreg,forest,mlp", help="comma list of model kinds")
    p.add_argument("--k", type=int, default=5, help="fold count")
    p.add_argument("--out", default="table.csv", help="table path (.csv) or output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    sub_parser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        return args.func(args, sub_parser)
    except DataError as exc:
        print(f"playerprint {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
