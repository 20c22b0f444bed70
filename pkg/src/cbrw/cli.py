"""Command-line entry point: ``cbrw classify | simulate | estimate | phase | gw-check``.

Settings resolve as flags > config file > built-in defaults. Every output
embeds the seed and an echo of the resolved configuration (minus the worker
count, which never changes results), so any artifact can be regenerated.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, estimators, gw
from .analytic import classify_cbrw
from .engine.parallel import default_workers
from .engine.population import BACKENDS, run
from .engine.seeding import StreamSeed, fresh_seed, parse_seed
from .errors import CbrwError, CountOverflow, DomainError, InsufficientHits, PopulationGuardExceeded, ValidationError, Violation
from .model import DEFAULT_MAX_SUPPORT, CbrwParams, GwSpec, OffspringDistribution, parse_probability

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

ESTIMATORS = (
    "phi-left",
    "phi-right",
    "left-reach-decay",
    "recurrence",
    "frontier-speed",
    "lp-growth",
    "comparison-walk",
)

# per-command defaults for the shared numeric flags
DEFAULTS: dict[str, dict[str, Any]] = {
    "classify": {},
    "simulate": {"horizon": 100, "format": "csv"},
    "phase": {"trials": 100, "horizon": 200, "format": "csv"},
    "gw-check": {"trials": 100_000, "horizon": 200, "format": "csv"},
    "phi-left": {"trials": 100_000, "horizon": 400},
    "phi-right": {"trials": 100_000, "horizon": 400},
    "left-reach-decay": {"trials": 1_000_000, "horizon": 400},
    "recurrence": {"trials": 200, "horizon": 200},
    "frontier-speed": {"trials": 1000, "horizon": 200},
    "lp-growth": {"trials": 1000, "horizon": 200},
    "comparison-walk": {"trials": 100_000},
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    seed: int
    seed_generated: bool
    options: dict[str, Any]
    params: CbrwParams | None = None

    def echo(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"command": self.command}
        if self.params is not None:
            doc["params"] = self.params.to_json()
        doc.update({k: v for k, v in sorted(self.options.items()) if v is not None})
        return doc


# -- parsing helpers ----------------------------------------------------------------------


def parse_pmf(text: str) -> OffspringDistribution:
    """``"0:1/2,2:1/2"`` -> distribution."""
    entries = {}
    for item in text.split(","):
        k, _, p = item.partition(":")
        if not p:
            raise UsageError(f"pmf entry {item!r} is not of the form k:p")
        entries[int(k)] = parse_probability(p.strip())
    return OffspringDistribution(tuple(sorted(entries.items())))


def parse_axis(text: str) -> tuple[str, list[float]]:
    """``"p_c=0.1:0.9:9"`` -> ``("p_c", [0.1, ..., 0.9])``."""
    name, _, rng = text.partition("=")
    parts = rng.split(":")
    if name not in estimators.AXES or len(parts) != 3:
        raise UsageError(f"axis must look like NAME=start:stop:num with NAME in {estimators.AXES}, got {text!r}")
    start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
    if num < 1:
        raise UsageError("axis needs at least one point")
    return name, [float(v) for v in np.linspace(start, stop, num)]


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError([Violation("MalformedConfig", f"{path}: {exc}")]) from exc
    if not isinstance(doc, dict):
        raise ValidationError([Violation("MalformedConfig", "config must be a JSON object")])
    return doc


def _pick(name: str, flag_value: Any, config: dict[str, Any], defaults: dict[str, Any]) -> Any:
    if flag_value is not None:
        return flag_value
    if name in config:
        return config[name]
    return defaults.get(name)


def _params(config: dict[str, Any], max_support: int) -> CbrwParams:
    params = CbrwParams.from_json(config, max_support=max_support)
    problems = params.violations()
    if problems:
        raise ValidationError(problems)
    return params


def _brw_only(config: dict[str, Any], max_support: int) -> tuple[OffspringDistribution, float]:
    """Estimators of the cookie-free BRW only need ``mu_0`` and ``p_0``."""
    missing = [k for k in ("mu_0", "p_0") if k not in config]
    if missing:
        raise ValidationError([Violation("MissingKey", f"config lacks {k!r}") for k in missing])
    try:
        mu_0 = OffspringDistribution.from_json(config["mu_0"])
        p_0 = parse_probability(config["p_0"])
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValidationError([Violation("MalformedConfig", str(exc))]) from exc
    problems = mu_0.violations("mu_0", max_support)
    if mu_0.mass(0) > 0:
        problems.append(Violation("ZeroOffspringMass", f"mu_0(0) = {mu_0.mass(0)} must be 0"))
    if not 0.0 < p_0 < 1.0:
        problems.append(Violation("ProbabilityOutOfRange", f"p_0 = {p_0} must lie in (0, 1)"))
    if problems:
        raise ValidationError(problems)
    return mu_0, p_0


# -- output ---------------------------------------------------------------------------------


def _header(cfg: RunConfig) -> list[str]:
    return [f"seed={cfg.seed}", "config=" + json.dumps(cfg.echo(), sort_keys=True, separators=(",", ":"))]


def _json_doc(cfg: RunConfig, report: Any) -> str:
    doc = {"seed": cfg.seed, "config": cfg.echo(), "report": report}
    return json.dumps(doc, indent=2, sort_keys=False, default=_json_default) + "\n"


def _json_default(obj: Any) -> Any:
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _flat_rows(prefix: str, value: Any, out: list[tuple[str, Any]]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flat_rows(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _flat_rows(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, value))


def _key_value_csv(cfg: RunConfig, report: dict[str, Any]) -> str:
    rows: list[tuple[str, Any]] = []
    _flat_rows("", report, rows)
    buf = io.StringIO()
    for line in _header(cfg):
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for k, v in rows:
        writer.writerow([k, repr(v) if isinstance(v, float) else v])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text)


# -- commands -------------------------------------------------------------------------------


def _render(cfg: RunConfig, report: dict[str, Any], fmt: str) -> str:
    return _json_doc(cfg, report) if fmt == "json" else _key_value_csv(cfg, report)


def cmd_classify(cfg: RunConfig, fmt: str) -> str:
    return _render(cfg, classify_cbrw(cfg.params).to_json(), fmt)


def cmd_simulate(cfg: RunConfig, fmt: str) -> str:
    o = cfg.options
    trace = run(cfg.params, o["horizon"], StreamSeed(cfg.seed), backend=o["backend"])
    if fmt == "json":
        columns = {name: [None if v is None else int(v) for v in getattr(trace, name)] for name in ("t", "l", "r", "z0", "lp_size", "total", "min_site", "max_site")}
        columns["approx_flag"] = [bool(v) for v in trace.approx_flag]
        return _json_doc(cfg, columns)
    return trace.to_csv(_header(cfg))


def cmd_estimate(cfg: RunConfig, fmt: str, workers: int) -> str:
    o = cfg.options
    name = o["estimator"]
    seed = StreamSeed(cfg.seed)
    trials, horizon = o["trials"], o.get("horizon")
    mu_0 = OffspringDistribution.from_json(o["mu_0"]) if "mu_0" in o else None
    if name in ("phi-left", "phi-right"):
        report = estimators.estimate_phi(
            mu_0, o["p_0"], name.split("-")[1], trials, seed, horizon=horizon, workers=workers
        ).to_json()
    elif name == "left-reach-decay":
        report = estimators.estimate_left_reach_decay(
            mu_0, o["p_0"], trials=trials, seed=seed, method=o["method"], horizon=horizon, workers=workers
        ).to_json()
    elif name == "comparison-walk":
        report = estimators.estimate_comparison_increment(o["p_0"], trials, seed).to_json()
    elif name == "recurrence":
        report = estimators.recurrence_statistic(cfg.params, horizon, trials, seed, workers, o["backend"]).to_json()
    elif name == "frontier-speed":
        report = estimators.frontier_speed_estimate(cfg.params, horizon, trials, seed, workers, o["backend"]).to_json()
    elif name == "lp-growth":
        report = estimators.lp_growth_check(cfg.params, horizon, trials, seed, workers=workers, backend=o["backend"]).to_json()
    else:  # guarded by argparse choices, kept for direct callers
        raise UsageError(f"unknown estimator {name!r}")
    return _render(cfg, report, fmt)


def cmd_phase(cfg: RunConfig, fmt: str, workers: int) -> str:
    o = cfg.options
    scan = estimators.phase_scan(
        cfg.params,
        parse_axis(o["x"]),
        parse_axis(o["y"]),
        simulate=o["simulate"],
        trials=o.get("trials", 0),
        horizon=o.get("horizon", 0),
        seed=StreamSeed(cfg.seed),
        workers=workers,
    )
    if fmt == "json":
        cells = []
        for c in scan.cells:
            cell = {scan.x_name: c.x, scan.y_name: c.y, **c.predicted.to_json()}
            if c.empirical is not None:
                cell["empirical"] = c.empirical.to_json()
            cells.append(cell)
        return _json_doc(cfg, cells)
    return scan.to_csv(_header(cfg))


def cmd_gw_check(cfg: RunConfig, fmt: str, workers: int) -> str:
    o = cfg.options
    spec = GwSpec(OffspringDistribution.from_json(o["offspring"]), o["initial"]).validated()
    seed = StreamSeed(cfg.seed)
    kind = o["kind"]
    if kind == "auto":
        mean = spec.offspring.mean
        if abs(mean - 1.0) <= gw.CRITICAL_TOL:
            kind = "critical"
        elif mean < 1.0:
            kind = "subcritical"
        else:
            raise DomainError(f"offspring mean {mean} > 1; gw-check covers subcritical and critical laws")
    if kind == "critical":
        report = gw.critical_survival_report(spec, o["horizon"], o["trials"], seed, workers)
    else:
        report = gw.subcritical_decay_report(spec, o["horizon"], o["trials"], seed, workers)
    if fmt == "json":
        rows = [r.__dict__ for r in report.rows]
        return _json_doc(cfg, {"kind": report.kind, "meta": report.meta, "rows": rows})
    return report.to_csv(_header(cfg) + [f"kind={report.kind}"] + [f"{k}={v!r}" for k, v in report.meta.items()])


# -- argument parsing -----------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser, formats: Sequence[str]) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config (mu_c, p_c, mu_0, p_0, layout, plus any flag name)")
    parser.add_argument("--seed", type=parse_seed, help="64-bit master seed; drawn from system entropy when omitted")
    parser.add_argument("--trials", type=int, help="number of independent trials")
    parser.add_argument("--horizon", type=int, help="number of time steps (or generations)")
    parser.add_argument("--threads", type=int, help="worker processes (default: available CPUs); never changes results")
    parser.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    parser.add_argument("--format", choices=formats, help=f"output format (one of {', '.join(formats)})")
    parser.add_argument("--backend", choices=BACKENDS, help="count backend: arbitrary precision or fixed 64-bit")
    parser.add_argument("--max-support", type=int, help=f"largest allowed offspring count (default {DEFAULT_MAX_SUPPORT})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbrw", description="Cookie branching random walk toolkit.")
    parser.add_argument("--version", action="version", version=f"cbrw {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="predicted recurrence regime with decisive quantities")
    _common(p, ("json", "csv"))

    p = sub.add_parser("simulate", help="one population trajectory as a per-step CSV trace")
    _common(p, ("csv", "json"))

    p = sub.add_parser("estimate", help="run a named Monte Carlo estimator")
    p.add_argument("estimator", choices=ESTIMATORS)
    p.add_argument("--method", choices=("splitting", "direct"), help="left-reach-decay estimator (default splitting)")
    _common(p, ("json", "csv"))

    p = sub.add_parser("phase", help="predicted (and optionally simulated) regimes on a 2-D grid")
    p.add_argument("--x", metavar="AXIS", help="first axis, e.g. p_c=0.1:0.9:9")
    p.add_argument("--y", metavar="AXIS", help="second axis, e.g. m_c=1:4:9")
    p.add_argument("--simulate", action="store_true", default=None, help="add recurrence statistics per cell")
    _common(p, ("csv", "json"))

    p = sub.add_parser("gw-check", help="Monte Carlo survival table for a Galton-Watson law")
    p.add_argument("--offspring", type=parse_pmf, metavar="PMF", help="offspring law, e.g. 0:1/2,2:1/2")
    p.add_argument("--initial", type=int, help="initial population (default 1)")
    p.add_argument("--kind", choices=("auto", "critical", "subcritical"), help="which table to produce (default auto)")
    _common(p, ("csv", "json"))
    return parser


def resolve(args: argparse.Namespace) -> tuple[RunConfig, str, int]:
    config = _load_config(args.config)
    key = args.estimator if args.command == "estimate" else args.command
    defaults = DEFAULTS[key]
    max_support = _pick("max_support", args.max_support, config, {"max_support": DEFAULT_MAX_SUPPORT})

    seed_value = _pick("seed", args.seed, config, {})
    generated = seed_value is None
    seed = fresh_seed() if generated else parse_seed(seed_value)
    fmt = _pick("format", args.format, config, {"format": defaults.get("format", "json")})
    workers = _pick("threads", args.threads, config, {"threads": default_workers()})
    if workers < 1:
        raise UsageError("--threads must be >= 1")

    options: dict[str, Any] = {}
    for name in ("trials", "horizon"):
        if name in defaults:
            value = int(_pick(name, getattr(args, name), config, defaults))
            if value < 0 or (name == "trials" and value < 1):
                raise UsageError(f"--{name} must be positive")
            options[name] = value
    if key in ("simulate", "recurrence", "frontier-speed", "lp-growth"):
        options["backend"] = _pick("backend", args.backend, config, {"backend": "exact"})
    if max_support != DEFAULT_MAX_SUPPORT:
        options["max_support"] = max_support

    params = None
    if args.command == "estimate":
        options["estimator"] = key
        if key == "comparison-walk":
            if "p_0" not in config:
                raise ValidationError([Violation("MissingKey", "config lacks 'p_0'")])
            options["p_0"] = parse_probability(config["p_0"])
            if not 0.5 < options["p_0"] < 1.0:
                raise DomainError(f"comparison walk needs p_0 in (1/2, 1), got {options['p_0']}")
        elif key in ("phi-left", "phi-right", "left-reach-decay"):
            options["mu_0"], options["p_0"] = _brw_only(config, max_support)
            if key == "left-reach-decay":
                options["method"] = _pick("method", args.method, config, {"method": "splitting"})
        else:
            params = _params(config, max_support)
    elif args.command == "gw-check":
        offspring = args.offspring
        if offspring is None:
            if "offspring" not in config:
                raise UsageError("gw-check needs --offspring or an 'offspring' key in the config")
            offspring = OffspringDistribution.from_json(config["offspring"])
        options["offspring"] = offspring
        options["initial"] = int(_pick("initial", args.initial, config, {"initial": 1}))
        options["kind"] = _pick("kind", args.kind, config, {"kind": "auto"})
    else:
        params = _params(config, max_support)
        if args.command == "phase":
            for axis in ("x", "y"):
                value = _pick(axis, getattr(args, axis), config, {})
                if value is None:
                    raise UsageError(f"phase needs --{axis}")
                options[axis] = value
            options["simulate"] = bool(_pick("simulate", args.simulate, config, {"simulate": False}))
            if not options["simulate"]:
                options.pop("trials")
                options.pop("horizon")
    return RunConfig(args.command, seed, generated, _echoable(options), params), fmt, workers


def _echoable(options: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for k, v in options.items():
        out[k] = v.to_json() if isinstance(v, OffspringDistribution) else v
    return out


def execute(cfg: RunConfig, fmt: str, workers: int) -> str:
    commands: dict[str, Callable[[], str]] = {
        "classify": lambda: cmd_classify(cfg, fmt),
        "simulate": lambda: cmd_simulate(cfg, fmt),
        "estimate": lambda: cmd_estimate(cfg, fmt, workers),
        "phase": lambda: cmd_phase(cfg, fmt, workers),
        "gw-check": lambda: cmd_gw_check(cfg, fmt, workers),
    }
    return commands[cfg.command]()


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, fmt, workers = resolve(args)
        if cfg.seed_generated:
            print(f"seed={cfg.seed}", file=sys.stderr)
        _emit(execute(cfg, fmt, workers), args.out)
    except ValidationError as exc:
        print("validation failed:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CountOverflow, PopulationGuardExceeded, InsufficientHits) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CbrwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
