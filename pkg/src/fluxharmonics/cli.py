"""Command line entry point.

Subcommands
-----------
run        analyze series files and write report.json, summary.tsv and plot data
summarize  merge one or more report.json files into a detection table
synth      write a synthetic series in the input CSV format

Exit codes: 0 success, 1 every combination failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .exceptions import ConfigError, FluxHarmonicsError
from .ingest import ColumnSpec, write_flux_csv
from .nlsa import NlsaConfig
from .pipeline import (
    PipelineConfig,
    RunReport,
    format_summary,
    format_table,
    run_pipeline,
    summarize,
)
from .synth import Noise, SignalRecipe, generate

__all__ = ["main", "build_parser", "load_config_file", "config_from_args"]

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
log = logging.getLogger("fluxharmonics")


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in _str_list(text))


def _str_list(text: str) -> tuple:
    return tuple(v.strip() for v in str(text).replace(";", ",").split(",") if v.strip())


def _column(text):
    if text is None:
        return None
    s = str(text).strip()
    return int(s) if s.lstrip("-").isdigit() else s


def _bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional_int(text):
    s = str(text).strip().lower()
    return None if s in ("", "none", "auto") else int(s)


def _optional_float(text):
    s = str(text).strip().lower()
    return None if s in ("", "none", "auto") else float(s)


# key -> converter; keys double as long option names (dashes for underscores)
CONFIG_KEYS = {
    "inputs": lambda v: tuple(str(p) for p in _str_list(v)),
    "output_dir": str,
    "window": _optional_int,
    "n_modes": int,
    "filters": _str_list,
    "methods": _str_list,
    "eps_f": float,
    "eps_p": float,
    "harmonic_set": _int_list,
    "regularity_harmonics": _int_list,
    "seed": int,
    "interpolate_gaps": _bool,
    "write_plots": _bool,
    "jobs": int,
    "date_column": _column,
    "value_column": _column,
    "qf_column": _column,
    "delimiter": lambda v: "\t" if v in ("\\t", "tab") else v,
    "decimal_mark": str,
    "has_header": lambda v: None if str(v).lower() in ("", "auto", "none") else _bool(v),
    "epsilon": _optional_float,
    "knn": _optional_int,
    "subset_size": int,
    "n_runs": int,
    "grid_points": int,
}
_COLUMN_KEYS = ("date_column", "value_column", "qf_column", "delimiter", "decimal_mark", "has_header")
_NLSA_KEYS = ("epsilon", "knn", "subset_size", "n_runs", "grid_points")


def load_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return values


def _convert(key: str, value):
    try:
        return CONFIG_KEYS[key](value)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def config_from_mapping(values: dict) -> PipelineConfig:
    values = dict(values)
    col = {k: values.pop(k) for k in _COLUMN_KEYS if k in values}
    nl = {k: values.pop(k) for k in _NLSA_KEYS if k in values}
    try:
        spec = ColumnSpec(**col)
        nlsa = NlsaConfig(**nl)
        return PipelineConfig(column_spec=spec, nlsa=nlsa, **values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    values = load_config_file(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is None or key == "inputs":
            continue
        values[key] = _convert(key, v)
    if args.inputs:
        values["inputs"] = tuple(args.inputs)
    if not values.get("inputs"):
        raise ConfigError("no inputs given (positional paths or 'inputs' in the config file)")
    return config_from_mapping(values)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fluxharmonics", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="analyze series and write reports")
    run.add_argument("inputs", nargs="*", help="series files or directories")
    run.add_argument("-c", "--config", help="key = value config file; flags override it")
    run.add_argument("-o", "--output-dir", dest="output_dir")
    for key in CONFIG_KEYS:
        if key in ("inputs", "output_dir"):
            continue
        run.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE")

    sm = sub.add_parser("summarize", parents=[common], help="detection table from report.json files")
    sm.add_argument("reports", nargs="+")
    sm.add_argument("--table", action="store_true", help="classes as rows, method/filter as columns")
    sm.add_argument("-o", "--output", help="write the TSV here instead of stdout")

    sy = sub.add_parser("synth", parents=[common], help="write a synthetic series")
    sy.add_argument("output")
    sy.add_argument("--years", type=float, default=4.0)
    sy.add_argument(
        "--harmonic",
        action="append",
        metavar="F:AMP[:PHASE]",
        help="repeatable; default 1:1",
    )
    sy.add_argument("--noise", choices=("none", "white", "broadband", "hf_white"), default="none")
    sy.add_argument("--sigma", type=float, default=0.0)
    sy.add_argument("--beta", type=float, default=1.0)
    sy.add_argument("--f-min", type=float, default=6.0)
    sy.add_argument("--offset", type=float, default=0.0)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--site", default="SYN")
    sy.add_argument("--variable", default="X")
    return p


def _parse_harmonic(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"harmonic must be F:AMP[:PHASE], got {text!r}")
    try:
        nums = [float(x) for x in parts]
    except ValueError:
        raise ConfigError(f"harmonic must be numeric, got {text!r}") from None
    return (nums[0], nums[1], nums[2] if len(nums) == 3 else 0.0)


def _cmd_run(args) -> int:
    cfg = config_from_args(args)
    report = run_pipeline(cfg)
    for err in report.errors:
        log.error("%s: %s", err["input"], err["error"])
    for r in report.results:
        if r["status"] == "ok":
            log.info("%s filter=%s %s: %s", r["series"], r["filter"], r["method"], r["category"])
        else:
            log.warning("%s filter=%s %s: %s", r["series"], r["filter"], r["method"], r["error"])
    if cfg.output_dir is None:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(format_summary(summarize([report])))
    return EXIT_FAILED if report.all_failed else EXIT_OK


def _cmd_summarize(args) -> int:
    reports = []
    for path in args.reports:
        try:
            reports.append(RunReport.from_json(Path(path).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from None
    rows = summarize(reports)
    text = format_table(rows) if args.table else format_summary(rows)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rows else EXIT_FAILED


def _cmd_synth(args) -> int:
    harmonics = tuple(_parse_harmonic(h) for h in (args.harmonic or ["1:1"]))
    try:
        noise = Noise(args.noise, args.sigma, beta=args.beta, f_min=args.f_min)
        recipe = SignalRecipe(
            n_years=args.years,
            harmonics=harmonics,
            noise=noise,
            seed=args.seed,
            offset=args.offset,
            site_id=args.site,
            variable=args.variable,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    syn = generate(recipe)
    out = Path(args.output)
    if out.is_dir() or args.output.endswith(("/", "\\")):
        out = out / f"{syn.series.label}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(write_flux_csv(syn.series))
    print(out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(message)s",
    )
    handlers = {"run": _cmd_run, "summarize": _cmd_summarize, "synth": _cmd_synth}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FluxHarmonicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
