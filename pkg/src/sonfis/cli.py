"""Command-line front end: synthesize sites, run searches, induce rules, export grids.

Every command writes a run manifest next to its outputs; feeding a manifest
back in as the config reproduces the run bit for bit. All randomness flows
from one master seed through named sub-streams (split, som, growth, synth,
disc), so components stay independently re-seedable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geo import SiteSpec, evaluate_grid, export_field, generate_synthetic_site, variation_field
from .rough import export_rules, induce_rules
from .search import (
    RandomGrowth,
    RegularGrowth,
    RstPredictor,
    SonfisConfig,
    derive_seed,
    export_trials,
    load_rst_predictor,
    run_sonfis_r,
    run_sorst,
    save_rst_predictor,
)
from .som import SomDiscretizer
from .tabular import AttributeMeta, DecisionTable, TableError, load_table, save_table, site_schema, split
from .tsk import load_model, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2


class CliError(Exception):
    """Configuration or usage problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


_SYNTH_KEYS = {
    "bounds": None,
    "n_boreholes": 20,
    "samples_per_borehole": 40,
    "noise_sigma": 2.0,
    "ground_truth": "smooth",
    "layer_boundaries": (1160.0, 1230.0),
    "layer_means": (80.0, 45.0, 10.0),
    "total_rows": 789,
    "seed": 0,
}

_SONFIS_KEYS = {
    "n_train": 600,
    "n_test": 93,
    "iterations": 10,
    "rule_min": 5,
    "rule_max": 8,
    "growth": "random",
    "min_neurons": 4,
    "max_neurons": 100,
    "growth_start": 4,
    "growth_step": 8,
    "error_level": 0.0,
    "second_stage": "nfis",
    "som_epochs": 200,
    "som_sigma0": None,
    "tsk_epochs": 25,
    "learning_rate": 0.01,
    "sigma_scale": 1.0,
    "n_categories": 5,
    "strength_threshold": 0.0,
    "seed": 0,
}


def _load_config(path, defaults, required=()) -> dict:
    """Resolve a JSON config (or a previous run manifest) against defaults."""
    if path is None:
        raw = {}
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON ({exc})") from None
        if isinstance(raw, dict) and "config" in raw and "command" in raw:
            raw = raw["config"]
        if not isinstance(raw, dict):
            raise CliError(f"{path}: config must be a JSON object")
    for key in raw:
        if key not in defaults:
            raise CliError(f"unknown config key {key!r}")
    for key in required:
        if key not in raw and defaults[key] is None:
            raise CliError(f"missing required config key {key!r}")
    resolved = dict(defaults)
    resolved.update(raw)
    return resolved


def _write_manifest(path, command, seed, config, inputs, outputs) -> None:
    payload = {
        "tool": "sonfis",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_synth(args) -> int:
    config = _load_config(args.config, _SYNTH_KEYS, required=("bounds",))
    if args.seed is not None:
        config["seed"] = args.seed
    master = int(config["seed"])
    spec = SiteSpec(
        bounds=tuple(tuple(b) for b in config["bounds"]),
        n_boreholes=int(config["n_boreholes"]),
        samples_per_borehole=int(config["samples_per_borehole"]),
        noise_sigma=float(config["noise_sigma"]),
        seed=derive_seed(master, "synth"),
        ground_truth=config["ground_truth"],
        layer_boundaries=tuple(config["layer_boundaries"]),
        layer_means=tuple(config["layer_means"]),
        total_rows=None if config["total_rows"] is None else int(config["total_rows"]),
    )
    table, _ = generate_synthetic_site(spec)
    out = Path(args.out)
    save_table(table, out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "synth", master, config, {}, {"table": str(out)},
    )
    print(f"wrote {table.n_objects} objects to {out}")
    return EXIT_OK


def _growth_from_config(config) -> object:
    master = int(config["seed"])
    if config["growth"] == "random":
        return RandomGrowth(
            min_neurons=int(config["min_neurons"]),
            max_neurons=int(config["max_neurons"]),
            seed=derive_seed(master, "growth"),
        )
    if config["growth"] == "regular":
        return RegularGrowth(start=int(config["growth_start"]), step=int(config["growth_step"]))
    raise CliError(f"unknown config value for key 'growth': {config['growth']!r}")


def cmd_sonfis(args) -> int:
    config = _load_config(args.config, _SONFIS_KEYS)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.second_stage is not None:
        config["second_stage"] = args.second_stage
    master = int(config["seed"])

    table = load_table(args.data, site_schema())
    train, test = split(
        table, int(config["n_train"]), int(config["n_test"]), derive_seed(master, "split")
    )
    search_config = SonfisConfig(
        neuron_growth=_growth_from_config(config),
        rule_range=(int(config["rule_min"]), int(config["rule_max"])),
        iterations=int(config["iterations"]),
        error_level=float(config["error_level"]),
        second_stage=config["second_stage"],
        som_epochs=int(config["som_epochs"]),
        som_sigma0=None if config["som_sigma0"] is None else float(config["som_sigma0"]),
        tsk_epochs=int(config["tsk_epochs"]),
        learning_rate=float(config["learning_rate"]),
        sigma_scale=float(config["sigma_scale"]),
        seed=derive_seed(master, "som"),
    )
    if search_config.second_stage == "rst":
        result = run_sorst(
            train, test, search_config,
            k=int(config["n_categories"]),
            strength_threshold=float(config["strength_threshold"]),
        )
    else:
        result = run_sonfis_r(train, test, search_config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials_path = out_dir / "trials.csv"
    export_trials(result.trials, trials_path)
    outputs = {"trials": str(trials_path)}
    if result.best_model is not None:
        model_path = out_dir / "best_model.json"
        if isinstance(result.best_model, RstPredictor):
            save_rst_predictor(result.best_model, model_path)
        else:
            save_model(result.best_model, model_path)
        outputs["best_model"] = str(model_path)
    _write_manifest(
        out_dir / "manifest.json", "sonfis", master, config,
        {"data": str(args.data)}, outputs,
    )
    if result.best_index is None:
        print("every trial was skipped or degenerate; see the trial log", file=sys.stderr)
        return EXIT_DEGENERATE
    best = result.trials[result.best_index]
    print(
        f"{len(result.trials)} trials; best test RMSE {best.test_rmse:.4f} "
        f"({best.neuron_count} neurons, {best.rule_count} rules)"
    )
    return EXIT_OK


_RULES_KEYS = {"k": 5, "threshold": 0.0, "som_epochs": 150, "seed": 0}


def cmd_rules(args) -> int:
    config = _load_config(args.config, _RULES_KEYS)
    for key, flag in (
        ("k", args.k), ("threshold", args.threshold),
        ("som_epochs", args.som_epochs), ("seed", args.seed),
    ):
        if flag is not None:
            config[key] = flag
    k, threshold = int(config["k"]), float(config["threshold"])
    if k < 2:
        raise CliError("k must be at least 2")
    if not 0.0 <= threshold <= 1.0:
        raise CliError("threshold must lie in [0, 1]")
    master = int(config["seed"])
    table = load_table(args.data, site_schema())

    columns = ("x", "y", "z", "lu")
    discretizers = {}
    symbolic = {}
    for name in columns:
        disc = SomDiscretizer(
            n_categories=k,
            epochs=int(config["som_epochs"]),
            seed=derive_seed(master, f"disc:{name}"),
        ).fit(table.column(name))
        discretizers[name] = disc
        symbolic[name] = disc.transform(table.column(name))

    attrs = [AttributeMeta(n, "condition", k) for n in ("x", "y", "z")]
    attrs.append(AttributeMeta("lu", "decision", k))
    sym_table = DecisionTable(
        attrs, np.column_stack([symbolic[n] for n in columns]).astype(float)
    )
    ruleset = induce_rules(sym_table, threshold)

    out = Path(args.out)
    export_rules(ruleset, out)
    predictor = RstPredictor(
        ruleset=ruleset,
        discretizers=tuple(discretizers[n] for n in ("x", "y", "z")),
        decision_levels=discretizers["lu"].levels_,
    )
    save_rst_predictor(predictor, out.with_name(out.name + ".model.json"))
    _write_manifest(
        out.with_name(out.name + ".manifest.json"), "rules", master, config,
        {"data": str(args.data)},
        {"rules": str(out), "model": str(out.with_name(out.name + ".model.json"))},
    )
    if not ruleset.rules:
        print("no rule cleared the strength threshold; rule file is empty", file=sys.stderr)
        return EXIT_DEGENERATE
    print(f"induced {len(ruleset.rules)} rules into {out}")
    return EXIT_OK


def _parse_floats(text, n, flag) -> list:
    parts = text.split(",")
    if len(parts) != n:
        raise CliError(f"{flag} expects {n} comma-separated values")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise CliError(f"{flag} expects numeric values") from None


_GRID_KEYS = {"bounds": None, "resolution": None, "variation": False, "model": None}


def cmd_grid(args) -> int:
    config = _load_config(args.config, _GRID_KEYS)
    if args.config is not None and config["model"] is None:
        # Previous grid manifests keep the model under inputs.
        with open(args.config) as fh:
            manifest = json.load(fh)
        config["model"] = manifest.get("inputs", {}).get("model")

    model_path = args.model if args.model is not None else config["model"]
    if model_path is None:
        raise CliError("a model file is required (positional argument or config key 'model')")
    if args.bounds is not None:
        b = _parse_floats(args.bounds, 6, "--bounds")
        config["bounds"] = [[b[0], b[1]], [b[2], b[3]], [b[4], b[5]]]
    if args.resolution is not None:
        r = args.resolution.split(",")
        if len(r) != 3 or not all(p.strip().isdigit() for p in r):
            raise CliError("--resolution expects three comma-separated integers")
        config["resolution"] = [int(p) for p in r]
    if args.variation:
        config["variation"] = True
    if config["bounds"] is None:
        raise CliError("missing required config key 'bounds'")
    if config["resolution"] is None:
        raise CliError("missing required config key 'resolution'")

    try:
        with open(model_path) as fh:
            kind = json.load(fh).get("kind")
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read model file {model_path}: {exc}") from None
    if kind == "tsk":
        predictor = load_model(model_path)
    elif kind == "rules":
        predictor = load_rst_predictor(model_path)
    else:
        raise CliError(f"{model_path}: unknown model kind {kind!r}")

    if config["variation"] and kind == "rules":
        raise CliError("variation of a categorical rule model is not defined")

    bounds = tuple((float(lo), float(hi)) for lo, hi in config["bounds"])
    resolution = tuple(int(n) for n in config["resolution"])
    field = evaluate_grid(predictor, bounds, resolution)
    if config["variation"]:
        field = variation_field(field)
    out = Path(args.out)
    export_field(field, out)
    config["model"] = str(model_path)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"), "grid", None, config,
        {"model": str(model_path)}, {"field": str(out)},
    )
    print(f"wrote {len(field.values)} grid values to {out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="sonfis", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sonfis {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic borehole site table")
    p.add_argument("--config", required=True, help="site spec JSON (or a synth manifest)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sonfis", help="run the close-open granularity search")
    p.add_argument("data", help="site table CSV")
    p.add_argument("--config", default=None, help="search config JSON (or a manifest)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--second-stage", choices=("nfis", "rst"), default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sonfis)

    p = sub.add_parser("rules", help="induce spatial rules on x,y,z -> lu")
    p.add_argument("data", help="site table CSV")
    p.add_argument("--config", default=None, help="config JSON (or a rules manifest)")
    p.add_argument("--k", type=int, default=None, help="categories per attribute (default 5)")
    p.add_argument("--threshold", type=float, default=None, help="rule strength threshold")
    p.add_argument("--som-epochs", type=int, default=None, dest="som_epochs")
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--out", required=True, help="rule file path")
    p.set_defaults(func=cmd_rules)

    p = sub.add_parser("grid", help="evaluate a saved model on a regular grid")
    p.add_argument("model", nargs="?", default=None, help="model JSON from 'sonfis' or 'rules'")
    p.add_argument("--config", default=None, help="config JSON (or a grid manifest)")
    p.add_argument("--bounds", default=None, help="x0,x1,y0,y1,z0,z1")
    p.add_argument("--resolution", default=None, help="nx,ny,nz")
    p.add_argument("--variation", action="store_true", help="export the rate-of-change field")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
