"""Command-line surface: simulate / train-gp / validate / plot.

Exit codes: 0 success, 2 invalid input or validation failure, 3 integration
divergence.  Failures also emit machine-readable JSON (stderr, plus
error.json in the output directory when one exists).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__, engine, gp, scenario
from .errors import ConfigError, IntegrationDivergedError


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _emit_error(code, message, out_dir=None, **details):
    payload = {"error": {"code": code, "message": message, "details": details}}
    text = json.dumps(payload, indent=2)
    print(text, file=sys.stderr)
    if out_dir and os.path.isdir(out_dir):
        with open(os.path.join(out_dir, "error.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _resolve_config(spec_arg):
    if os.path.exists(spec_arg):
        return scenario.load_config(spec_arg)
    name = os.path.basename(spec_arg)
    if name.endswith(".cfg"):
        name = name[:-4]
    if name in scenario.PRESETS:
        return scenario.load_preset(name)
    raise ConfigError([f"config file '{spec_arg}' not found and no such preset"])


def _apply_overrides(cfg, overrides, seed=None):
    if not overrides and seed is None:
        return cfg
    sections = scenario.parse_config_text(scenario.write_config(cfg))
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override '{item}' is not of the form section.key=value"])
        path, _, raw = item.partition("=")
        if "." not in path:
            raise ConfigError([f"override key '{path}' must be section.key"])
        section, key = path.strip().rsplit(".", 1)
        if section not in sections:
            raise ConfigError([f"override targets unknown section [{section}]"])
        raw = raw.strip()
        if raw.startswith("["):
            inner = raw[1:-1].strip() if raw.endswith("]") else None
            if inner is None:
                raise ConfigError([f"override '{item}' has an unterminated array"])
            value = tuple(scenario._parse_scalar(v) for v in inner.split(",")) if inner else ()
        else:
            value = scenario._parse_scalar(raw)
        sections[section][key] = value
    if seed is not None:
        sections["sim"]["seed"] = int(seed)
    return scenario.config_from_sections(sections)


def cmd_simulate(args) -> int:
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    try:
        cfg = _resolve_config(args.config)
        cfg = _apply_overrides(cfg, args.set or [], seed=args.seed)
    except ConfigError as exc:
        _emit_error("validation", "configuration invalid", out_dir, violations=exc.violations)
        return 2
    config_text = scenario.write_config(cfg) + "\n"
    try:
        log = engine.run_episode(cfg, threads=args.threads)
    except IntegrationDivergedError as exc:
        _emit_error("diverged", str(exc), out_dir, tick=exc.tick)
        return 3

    from .metrics import compute_metrics

    episode_path = os.path.join(out_dir, "episode.csv")
    log.to_csv(episode_path)
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(compute_metrics(log, cfg), fh, indent=2)
        fh.write("\n")
    manifest = {
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "episode_sha256": _sha256_file(episode_path),
        "seed": cfg.sim.seed,
        "version": __version__,
    }
    with open(os.path.join(out_dir, "run-manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.cfg"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config_text)
    print(f"episode written to {out_dir} (seed {cfg.sim.seed})")
    return 0


def cmd_train_gp(args) -> int:
    try:
        dataset = gp.load_dataset_table(args.table)
    except (OSError, ValueError) as exc:
        _emit_error("invalid-table", str(exc))
        return 2
    if len(dataset) < 5:
        _emit_error("invalid-table", f"need at least 5 rows, got {len(dataset)}")
        return 2
    init = gp.KernelParams(1.0, 1.0, 0.1)
    fitted = gp.fit_hyperparameters(dataset, init, budget=args.budget, seed=args.seed or 0)
    X, Y = dataset.matrices()
    lml = gp.log_marginal_likelihood(X, Y, fitted)
    payload = {
        "signal_variance": fitted.signal_variance,
        "lengthscale": fitted.lengthscale,
        "noise_variance": fitted.noise_variance,
        "log_marginal_likelihood": lml,
        "n_pairs": len(dataset),
        "seed": args.seed or 0,
    }
    with open(args.out_params, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"fitted kernel written to {args.out_params} (lml {lml:.4f})")
    return 0


def cmd_validate(args) -> int:
    from .validate import run_validation

    results = run_validation()
    return 0 if all(r.passed for r in results) else 1


def cmd_plot(args) -> int:
    from .plots import PLOT_FILES, render_plots

    try:
        render_plots(args.episode_csv, args.out_dir)
    except (OSError, ValueError) as exc:
        _emit_error("invalid-episode", str(exc), args.out_dir)
        return 2
    print(f"wrote {', '.join(PLOT_FILES)} to {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="se3nav",
        description="Decentralized SE(3) collision-avoidance simulation with GP learning",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for per-agent control evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode and write its artifacts")
    p.add_argument("config", help="config file path or preset name (e.g. paper_7uav)")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config entry (repeatable)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-gp", help="fit kernel hyperparameters to a dataset table")
    p.add_argument("table", help="18-column dataset snapshot (CSV)")
    p.add_argument("out_params", help="output JSON path")
    p.add_argument("--budget", type=int, default=150, help="likelihood evaluation budget")
    p.set_defaults(func=cmd_train_gp)

    p = sub.add_parser("validate", help="run the embedded invariant suite")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="render the standard SVG plots from an episode CSV")
    p.add_argument("episode_csv")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
