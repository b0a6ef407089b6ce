"""
Command line: ``torquefusion generate|train|reproduce|selftest``.

Exit codes: 0 success, 1 selftest failure, 2 configuration or missing input,
3 generation error, 4 training error, 5 reproduction error.
"""
import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, io, scenarios, selftest
from .errors import ConfigError, ContractError, DegenerateComponentError, GenerationError, NumericalError
from .scenarios.config import canonical_json, config_hash

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_GENERATION, EXIT_TRAINING, EXIT_REPRODUCTION = range(6)
MANIFEST = "manifest.json"
CONFIG_COPY = "config.json"


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load(args):
    try:
        config = scenarios.load_config(args.config)
        if args.seed_override is not None:
            config = config.with_seed(args.seed_override)
    except ConfigError as exc:
        raise CommandError(f"config error: {exc}", EXIT_CONFIG) from exc
    return config


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(f"cannot create output directory {out}: {exc}", EXIT_CONFIG) from exc
    return out


def _write_manifest(out, command, config, started, artifacts, **extra):
    config_path = out / CONFIG_COPY
    config_path.write_text(canonical_json(config.raw))
    files = {str(Path(p).relative_to(out)): io.checksum(p) for p in artifacts}
    doc = {"command": command, "tool": "torquefusion", "version": __version__,
           "scenario": config.scenario, "seed": config.seed, "config_hash": config_hash(config),
           "config_copy": CONFIG_COPY, "artifacts": files, "started_utc": started, "finished_utc": _now()}
    doc.update(extra)
    return io.write_json(out / MANIFEST, doc)


def _datasets(config, data_dir):
    try:
        datasets = io.load_datasets(data_dir)
    except FileNotFoundError as exc:
        raise CommandError(f"missing dataset file: {exc}", EXIT_CONFIG) from exc
    except (ContractError, ValueError) as exc:
        raise CommandError(f"unreadable dataset in {data_dir}: {exc}", EXIT_CONFIG) from exc
    missing = [s.name for s in config.controllers if s.name not in datasets]
    if missing:
        raise CommandError(f"missing dataset for controller(s): {', '.join(missing)} in {data_dir}", EXIT_CONFIG)
    return datasets


def cmd_generate(args):
    started = _now()
    config = _load(args)
    out = _out_dir(args.out)
    try:
        datasets = scenarios.generate(config)
    except GenerationError as exc:
        raise CommandError(f"generation failed: {exc}", EXIT_GENERATION) from exc
    paths = io.save_datasets(out, datasets)
    _write_manifest(out, "generate", config, started, paths)
    print(f"wrote {len(datasets)} datasets to {out}")
    return EXIT_OK


def cmd_train(args):
    started = _now()
    config = _load(args)
    if args.data is None:
        raise CommandError("train needs --data", EXIT_CONFIG)
    datasets = _datasets(config, args.data)
    out = _out_dir(args.out)
    try:
        models = scenarios.train(config, datasets)
    except (DegenerateComponentError, NumericalError) as exc:
        raise CommandError(f"training failed: {exc}", EXIT_TRAINING) from exc
    paths = io.save_models(out, models)
    report = {"controllers": [models[s.name].report() for s in config.controllers]}
    paths.append(io.write_json(out / "train_report.json", report))
    _write_manifest(out, "train", config, started, paths)
    for entry in report["controllers"]:
        detail = (f"K={entry['K']}, final log-likelihood {entry['final_log_likelihood']:.6g}"
                  if entry["backend"] == "gmm" else f"kernel {entry['kernel']}, nlml {entry['nlml']:.6g}")
        print(f"{entry['controller']}: {entry['backend']} {detail}")
    return EXIT_OK


def cmd_reproduce(args):
    started = _now()
    config = _load(args)
    if args.models is None:
        raise CommandError("reproduce needs --models", EXIT_CONFIG)
    try:
        models = io.load_models(args.models, [s.name for s in config.controllers])
    except FileNotFoundError as exc:
        raise CommandError(f"missing model file: {exc}", EXIT_CONFIG) from exc
    except (ContractError, ValueError, KeyError) as exc:
        raise CommandError(f"unreadable model in {args.models}: {exc}", EXIT_CONFIG) from exc
    if args.data is not None:
        datasets = _datasets(config, args.data)
    else:
        # the demonstrations are a pure function of the config, so regenerate them for the metrics
        try:
            datasets = scenarios.generate(config)
        except GenerationError as exc:
            raise CommandError(f"generation failed: {exc}", EXIT_GENERATION) from exc
    out = _out_dir(args.out)
    log = scenarios.run(config, models)
    columns, rows = log.columns()
    paths = [io.write_csv(out / "log.csv", columns, rows)]
    extra = {"failed": log.failed, "partial_log": log.failed}
    if log.failed:
        extra["failure"] = log.message
    if len(log):
        paths.append(io.write_json(out / "metrics.json", scenarios.metrics(config, log, datasets)))
    _write_manifest(out, "reproduce", config, started, paths, **extra)
    if log.failed:
        raise CommandError(f"reproduction failed at {log.message}; partial log kept in {out}", EXIT_REPRODUCTION)
    print(f"reproduced {len(log)} ticks into {out}")
    return EXIT_OK


def cmd_selftest(args):
    failed = selftest.run_all()
    return EXIT_SELFTEST if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="torquefusion",
                                     description="Fuse probabilistic torque controllers learned from demonstrations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_text in (
            ("generate", cmd_generate, "generate demonstration datasets"),
            ("train", cmd_train, "train one trajectory model per controller"),
            ("reproduce", cmd_reproduce, "run the fused controllers in closed loop")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="scenario JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed-override", type=int, default=None, help="replace the config seed")
        p.add_argument("--data", default=None, help="dataset directory (from generate)")
        if name == "reproduce":
            p.add_argument("--models", default=None, help="model directory (from train)")
        p.set_defaults(func=func)
    p = sub.add_parser("selftest", help="run the embedded invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"torquefusion {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
