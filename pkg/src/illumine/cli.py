"""Command-line entry point.

Subcommands: run, baseline, analyze, compare, train, correlate. Exit codes
are a stable contract: 0 success, 2 usage or configuration error, 3 SUT or
environment error.
"""
from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import (DEFAULT_GRID, RescaleSpec, compare_groups, map_metrics,
                        merge_maps, observed_feature_ranges, pearson, rescale,
                        write_cells_csv)
from .archive import RunArchive, read_archive, write_archive
from .classifier import load_model, save_model, train_classifier
from .domains import (DigitDomain, RoadDomain, default_alphas, features_for_domain,
                      load_seed_images, validate_feature_pair)
from .driver import DriverParams
from .errors import IllumineError, ProtocolError, SeedGenerationError
from .external import ExternalSUT
from .mapelites import Budget, SearchConfig, run_search
from .mnist import load_dataset, locate_dataset, synth_corpus
from .report import write_reports

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ENV = 3


class UsageError(Exception):
    pass


class EnvError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} does not exist")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {p} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    return doc


def _parse_budget(text: str | None, cfg: dict) -> Budget:
    if text is None:
        doc = cfg.get("budget")
        if doc:
            return Budget.from_json_dict(doc)
        return Budget(evaluations=1000)
    t = text.strip().lower()
    if t.endswith("s"):
        return Budget(seconds=float(t[:-1]))
    return Budget(evaluations=int(t))


def _setting(args_value, cfg: dict, key: str, default):
    if args_value is not None:
        return args_value
    return cfg.get(key, default)


def _build_search_config(args, cfg: dict, features: tuple[str, ...]) -> SearchConfig:
    alphas_cfg = cfg.get("grid_scale_factors", {})
    if isinstance(alphas_cfg, dict):
        defaults = dict(zip(features, default_alphas(features)))
        alphas = tuple(float(alphas_cfg.get(n, defaults[n])) for n in features)
    else:
        alphas = tuple(float(v) for v in alphas_cfg)
    domain = args.domain or cfg.get("domain")
    lb_default, ub_default = (0.01, 0.6) if domain == "digit" else (1.0, 6.0)
    defaults_pool = {"digit": (100, 50), "road": (40, 24)}[domain]
    try:
        return SearchConfig(
            feature_pair=features,
            grid_scale_factors=alphas,
            seed_pool_size=int(_setting(args.seed_pool, cfg, "seed_pool_size", defaults_pool[0])),
            population_size=int(_setting(args.population, cfg, "population_size", defaults_pool[1])),
            budget=_parse_budget(args.budget, cfg),
            mutation_lower_bound=float(cfg.get("mutation_lower_bound", lb_default)),
            mutation_upper_bound=float(cfg.get("mutation_upper_bound", ub_default)),
            rng_seed=int(_setting(args.seed, cfg, "rng_seed", 0)),
            workers=int(_setting(args.workers, cfg, "workers", 1)),
        )
    except ValueError as e:
        raise UsageError(str(e)) from e


def _digit_seed_images(cfg: dict, seed_label: int):
    dcfg = cfg.get("digit", {})
    dataset = dcfg.get("dataset", "synthetic")
    if dataset == "synthetic":
        tr_x, tr_y, te_x, te_y = synth_corpus(
            dcfg.get("synthetic_train", 2000), dcfg.get("synthetic_test", 500),
            seed=dcfg.get("synthetic_seed", 0))
        images = np.concatenate([te_x, tr_x])
        labels = np.concatenate([te_y, tr_y])
    else:
        d = locate_dataset(dataset)
        if d is None:
            raise EnvError(f"dataset directory {dataset!r} not found or incomplete")
        tr_x, tr_y, te_x, te_y = load_dataset(d)
        images, labels = te_x, te_y  # seeds come from the held-out split
    return load_seed_images(images, labels, seed_label)


def _build_domain(args, cfg: dict, features: tuple[str, ...]):
    domain = args.domain or cfg.get("domain")
    if domain not in ("digit", "road"):
        raise UsageError("choose a domain: digit or road")
    try:
        validate_feature_pair(domain, features)
    except IllumineError as e:
        raise UsageError(str(e)) from e
    sut_cfg = cfg.get("sut", {})
    external = None
    if sut_cfg.get("command"):
        try:
            external = ExternalSUT(sut_cfg["command"], float(sut_cfg.get("timeout", 60.0)))
        except OSError as e:
            raise EnvError(f"cannot launch external SUT: {e}") from e
    if domain == "digit":
        dcfg = cfg.get("digit", {})
        seed_label = int(dcfg.get("seed_label", 5))
        images = _digit_seed_images(cfg, seed_label)
        model = None
        if external is None:
            weights = dcfg.get("classifier_weights")
            if weights:
                if not Path(weights).exists():
                    raise EnvError(f"classifier weights {weights} not found")
                model = load_model(weights)
            else:
                tr_x, tr_y, te_x, te_y = synth_corpus(
                    dcfg.get("synthetic_train", 2000), dcfg.get("synthetic_test", 500),
                    seed=dcfg.get("synthetic_seed", 0))
                model = train_classifier(tr_x, tr_y, epochs=3, lr=0.1, rng_seed=0,
                                         test_images=te_x, test_labels=te_y)
        return DigitDomain(features, images, seed_label, model=model, external=external), cfg.get("digit", {})
    rcfg = cfg.get("road", {})
    params = DriverParams(**rcfg.get("driver", {}))
    dom = RoadDomain(features, params=params, external=external,
                     n_control_points=int(rcfg.get("control_points", 10)),
                     seed_step=float(rcfg.get("seed_step", 25.0)),
                     seed_cone_deg=float(rcfg.get("seed_cone_deg", 45.0)),
                     lane_width=float(rcfg.get("lane_width", 4.0)))
    return dom, {"driver": params.to_json_dict(), **{k: v for k, v in rcfg.items() if k != "driver"}}


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _cmd_search(args, mode: str) -> int:
    cfg = _load_config_file(args.config)
    if args.features:
        features = tuple(args.features.split(","))
    elif isinstance(cfg.get("features"), list):
        features = tuple(cfg["features"])
    elif isinstance(cfg.get("features"), str):
        features = tuple(cfg["features"].split(","))
    else:
        features = ()
    if len(features) < 2:
        raise UsageError("need at least two feature metrics, e.g. --features Mov,Lum")
    domain, domain_cfg = _build_domain(args, cfg, features)
    config = _build_search_config(args, cfg, features)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool_version": __version__,
        "domain": domain.name,
        "sut": domain.sut_id(),
        "mode": mode,
        "feature_pair": list(features),
        "config": config.to_json_dict(),
        "started_at": _now(),
        "finished_at": None,
        "archive_path": str(out / "archive"),
        "status": "running",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    try:
        result = run_search(config, domain, mode=mode)
    except SeedGenerationError as e:
        manifest["status"] = f"aborted: {e}"
        manifest["finished_at"] = _now()
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        raise EnvError(str(e)) from e
    archive_dir = write_archive(result, out / "archive", domain.sut_id(), domain_cfg)
    archive = read_archive(archive_dir)
    run_id = f"{domain.name}-{mode}-s{config.rng_seed}"
    try:
        rescaled = rescale([archive], grid_size=args.grid)[0]
        write_reports(rescaled, archive, out / "reports", run_id)
    except IllumineError as e:
        print(f"note: reports skipped ({e})", file=sys.stderr)
    manifest["status"] = "complete"
    manifest["finished_at"] = _now()
    manifest["evaluations_logged"] = len(result.log)
    manifest["cells"] = len(result.fmap)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"{mode} run complete: {len(result.log)} evaluations, "
          f"{len(result.fmap)} cells -> {out}")
    return EXIT_OK


def _load_archives(paths: list[str]) -> list[RunArchive]:
    archives = []
    for p in paths:
        try:
            archives.append(read_archive(p))
        except (OSError, ValueError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read archive {p}: {e}") from e
    pairs = {a.feature_pair for a in archives}
    if len(pairs) > 1:
        raise UsageError(f"archives mix feature pairs: {sorted(pairs)}")
    return archives


def _cmd_analyze(args) -> int:
    archives = _load_archives(args.archives)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        maps = rescale(archives, grid_size=args.grid)
    except IllumineError as e:
        raise UsageError(str(e)) from e
    summary = {"grid": args.grid, "feature_pair": list(archives[0].feature_pair), "runs": []}
    for archive, m in zip(archives, maps):
        name = archive.path.parent.name or archive.path.name
        write_cells_csv(m, out / f"{name}_cells.csv")
        run_id = f"{name}-g{args.grid}"
        write_reports(m, archive, out, run_id)
        summary["runs"].append({"archive": str(archive.path), **map_metrics(m)})
    if len(maps) > 1:
        pooled = merge_maps(maps)
        write_cells_csv(pooled, out / "pooled_cells.csv")
        summary["pooled"] = map_metrics(pooled)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary["runs"], indent=2))
    return EXIT_OK


def _cmd_compare(args) -> int:
    group_a = _load_archives(args.group_a)
    group_b = _load_archives(args.group_b)
    if {a.feature_pair for a in group_a} != {b.feature_pair for b in group_b}:
        raise UsageError("groups use different feature pairs")
    mins, maxs = observed_feature_ranges(group_a + group_b)
    spec = RescaleSpec(args.grid, mins, maxs)
    metrics_a = [map_metrics(m) for m in rescale(group_a, spec=spec)]
    metrics_b = [map_metrics(m) for m in rescale(group_b, spec=spec)]
    report = {
        "grid": args.grid,
        "feature_pair": list(group_a[0].feature_pair),
        "group_a": [str(a.path) for a in group_a],
        "group_b": [str(b.path) for b in group_b],
        "metrics": compare_groups(metrics_a, metrics_b),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def _cmd_train(args) -> int:
    if args.synthetic:
        tr_x, tr_y, te_x, te_y = synth_corpus(args.synthetic_train, args.synthetic_test,
                                              seed=args.seed)
    else:
        d = locate_dataset(args.mnist)
        if d is None:
            raise EnvError("no dataset: pass --mnist DIR, set ILLUMINE_MNIST_DIR, "
                           "or use --synthetic")
        tr_x, tr_y, te_x, te_y = load_dataset(d)
    model = train_classifier(tr_x, tr_y, epochs=args.epochs, lr=args.lr,
                             rng_seed=args.seed, test_images=te_x, test_labels=te_y)
    save_model(model, args.out)
    print(f"trained on {len(tr_x)} images; test accuracy "
          f"{model.meta['test_accuracy']:.4f}; weights -> {args.out}")
    return EXIT_OK


def _read_csv_columns(path: str) -> dict[str, list[float]]:
    import csv as csvmod
    with open(path, newline="") as f:
        reader = csvmod.DictReader(f)
        if reader.fieldnames is None:
            raise UsageError(f"{path} has no header row")
        cols: dict[str, list[float]] = {name: [] for name in reader.fieldnames[1:]}
        for row in reader:
            for name in cols:
                cols[name].append(float(row[name]))
    return cols


def _cmd_correlate(args) -> int:
    labels = _read_csv_columns(args.labels)
    metrics = _read_csv_columns(args.metrics)
    rows = []
    for feature, ys in labels.items():
        for metric, xs in metrics.items():
            if len(xs) != len(ys):
                raise UsageError(f"column lengths differ: {feature} vs {metric}")
            try:
                res = pearson(xs, ys)
            except IllumineError as e:
                raise UsageError(f"{feature} vs {metric}: {e}") from e
            rows.append((feature, metric, res["r"], res["p"]))
    lines = ["feature,metric,r,p"]
    lines += [f"{f},{m},{r:.6f},{p:.6f}" for f, m, r, p in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="illumine",
                                 description="Illumination search over feature maps "
                                             "for testing learned systems")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_search(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--domain", choices=["digit", "road"])
        p.add_argument("--features", help="comma-separated metric pair, e.g. Mov,Lum")
        p.add_argument("--seed", type=int, help="RNG seed")
        p.add_argument("--budget", help="loop evaluations (e.g. 20000) or seconds (e.g. 3600s)")
        p.add_argument("--seed-pool", type=int, dest="seed_pool")
        p.add_argument("--population", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--grid", type=int, default=DEFAULT_GRID, help="report grid size")
        p.add_argument("--out", required=True, help="output directory")
        return p

    add_search("run", "illumination search (map-guided parent selection)")
    add_search("baseline", "random-search control (mutates random seeds)")

    p = sub.add_parser("analyze", help="rescale archives and export maps, CSVs, SVGs")
    p.add_argument("archives", nargs="+")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="rank statistics across two run groups")
    p.add_argument("--group-a", nargs="+", required=True)
    p.add_argument("--group-b", nargs="+", required=True)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--out")

    p = sub.add_parser("train", help="train the built-in digit classifier")
    p.add_argument("--mnist", help="directory of IDX files (or ILLUMINE_MNIST_DIR)")
    p.add_argument("--synthetic", action="store_true", help="use the built-in corpus")
    p.add_argument("--synthetic-train", type=int, default=5000)
    p.add_argument("--synthetic-test", type=int, default=1000)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="weights file to write")

    p = sub.add_parser("correlate", help="feature-vs-metric correlation table")
    p.add_argument("labels", help="CSV: first column id, then one column per feature")
    p.add_argument("metrics", help="CSV: first column id, then one column per metric")
    p.add_argument("--out")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_search(args, "illumination")
        if args.command == "baseline":
            return _cmd_search(args, "baseline")
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "correlate":
            return _cmd_correlate(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (EnvError, ProtocolError) as e:
        print(f"environment error: {e}", file=sys.stderr)
        return EXIT_ENV


if __name__ == "__main__":
    raise SystemExit(main())
