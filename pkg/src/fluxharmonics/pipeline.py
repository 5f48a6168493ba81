"""Batch pipeline: filter, embed, decompose, classify, reconstruct, characterize."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .embedding import DAYS_PER_YEAR, default_window, delay_embed, standardize_rows
from .exceptions import ConfigError, FluxHarmonicsError
from .ingest import ColumnSpec, FluxSeries, iter_series_files, read_flux_csv, validate_series
from .metrics import REGULARITY_HARMONICS, bin_metrics, characterize
from .nlsa import NlsaConfig, nlsa_fit
from .spectral import (
    DEFAULT_HARMONICS,
    EPS_F,
    EPS_P,
    build_seasonal_cycle,
    classify_modes,
    fft_power,
    lowpass,
    pair_harmonics,
    write_series,
    write_spectrum,
)
from .ssa import DEFAULT_N_MODES, ssa_decompose

__all__ = [
    "PipelineConfig",
    "RunReport",
    "run_pipeline",
    "analyze_series",
    "summarize",
    "format_summary",
    "FILTERS",
    "METHODS",
]

log = logging.getLogger(__name__)

FILTERS = ("none", "6", "4", "3")
METHODS = ("SSA", "NLSA")
MIN_WINDOW = int(np.floor(2 * DAYS_PER_YEAR))  # classification needs two-year modes
N_PLOT_MODES = 12


def _filter_name(f) -> str:
    if f is None:
        return "none"
    s = str(f).strip().lower()
    if s in ("none", "0", ""):
        return "none"
    try:
        value = float(s)
    except ValueError:
        raise ConfigError(f"unknown filter {f!r}") from None
    if value <= 0:
        raise ConfigError(f"filter cutoff must be positive, got {f!r}")
    return f"{value:g}"


@dataclass(frozen=True)
class PipelineConfig:
    inputs: tuple = ()
    column_spec: ColumnSpec = ColumnSpec()
    window: Optional[int] = None
    n_modes: int = DEFAULT_N_MODES
    filters: tuple = ("none",)
    methods: tuple = METHODS
    nlsa: NlsaConfig = NlsaConfig()
    eps_f: float = EPS_F
    eps_p: float = EPS_P
    harmonic_set: tuple = DEFAULT_HARMONICS
    regularity_harmonics: tuple = REGULARITY_HARMONICS
    output_dir: Optional[str] = None
    seed: int = 0
    interpolate_gaps: bool = False
    write_plots: bool = True
    jobs: int = 1

    def __post_init__(self):
        methods = tuple(m.upper() for m in self.methods)
        if "BOTH" in methods:
            methods = METHODS
        if not methods or any(m not in METHODS for m in methods):
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {self.methods}")
        filters = tuple(dict.fromkeys(_filter_name(f) for f in self.filters))
        if not filters:
            raise ConfigError("at least one filter is required")
        if self.n_modes < 2:
            raise ConfigError("n_modes must be at least 2")
        if self.window is not None and self.window < MIN_WINDOW:
            raise ConfigError(f"window must be at least {MIN_WINDOW} days")
        if not (self.eps_f > 0 and self.eps_p > 0):
            raise ConfigError("classifier tolerances must be positive")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))
        object.__setattr__(self, "harmonic_set", tuple(int(f) for f in self.harmonic_set))
        object.__setattr__(self, "regularity_harmonics", tuple(int(f) for f in self.regularity_harmonics))
        # the pipeline seed drives epsilon sampling
        object.__setattr__(self, "nlsa", replace(self.nlsa, seed=self.seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        # neither affects results; dropping them keeps reports comparable across runs
        d.pop("jobs")
        d.pop("output_dir")
        d["nlsa"].pop("seed")
        if d["nlsa"]["grid"] is not None:
            d["nlsa"]["grid"] = list(d["nlsa"]["grid"])
        return d


@dataclass
class RunReport:
    """Results keyed by (series, filter, method), in input order."""

    config: dict
    results: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    timings: list = field(default_factory=list)

    @property
    def n_ok(self) -> int:
        return sum(r["status"] == "ok" for r in self.results)

    @property
    def all_failed(self) -> bool:
        return self.n_ok == 0

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "results": self.results,
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(config=d.get("config", {}), results=d.get("results", []), errors=d.get("errors", []))

    def categories(self) -> list:
        return [
            (r["series"], r["filter"], r["method"], r["category"])
            for r in self.results
            if r["status"] == "ok"
        ]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _decompose(method: str, X, cfg: PipelineConfig):
    k = min(cfg.n_modes, X.W, X.P - 1)
    if method == "SSA":
        return ssa_decompose(X, k), None
    return nlsa_fit(X, k, cfg.nlsa)


def _plot_files(outdir: Path, series: FluxSeries, signal, ms, cycle, spec):
    outdir.mkdir(parents=True, exist_ok=True)
    cols = {"signal": series.values, "analyzed": signal}
    cols["seasonal_cycle"] = cycle.values if cycle is not None else np.full(series.n, np.nan)
    (outdir / "signal.tsv").write_text(write_series(series.start_date, cols))
    (outdir / "fft_spectrum.tsv").write_text(write_spectrum(spec))
    lines = ["index\tspectrum\tvariance" + ("\teigenvalue" if ms.eigenvalues is not None else "")]
    for i in range(ms.k):
        row = [str(i), f"{ms.spectrum[i]:.10g}", f"{ms.variance[i]:.10g}"]
        if ms.eigenvalues is not None:
            row.append(f"{ms.eigenvalues[i]:.10g}")
        lines.append("\t".join(row))
    (outdir / "dimred_spectrum.tsv").write_text("\n".join(lines) + "\n")
    n = min(N_PLOT_MODES, ms.k)
    header = "\t".join(f"mode_{i}" for i in range(n))
    body = "\n".join(
        f"{j}\t" + "\t".join(f"{ms.modes[i, j]:.10g}" for i in range(n)) for j in range(ms.W)
    )
    (outdir / "modes.tsv").write_text(f"lag\t{header}\n{body}\n")
    spectra = [fft_power(ms.modes[i]) for i in range(n)]
    body = "\n".join(
        f"{spectra[0].freqs[j]:.10g}\t" + "\t".join(f"{s.power[j]:.10g}" for s in spectra)
        for j in range(len(spectra[0].freqs))
    )
    (outdir / "mode_spectra.tsv").write_text(f"freq\t{header}\n{body}\n")


def analyze_series(series: FluxSeries, cfg: PipelineConfig, plot_root: Optional[Path] = None):
    """All filter x method combinations for one series.

    Returns ``(results, timings)``; failures become result records with
    ``status = "error"`` instead of propagating.
    """
    results, timings = [], []
    label = series.label
    base = {"series": label, "site": series.site_id, "variable": series.variable, "n": series.n}
    for filt in cfg.filters:
        t0 = time.perf_counter()
        try:
            signal = series.values if filt == "none" else lowpass(series.values, float(filt))
            W = cfg.window or default_window(series.n)
            if W > series.n / 2:
                raise FluxHarmonicsError(f"window {W} exceeds half the series length {series.n}")
            X = standardize_rows(delay_embed(signal, W))
            charac = characterize(signal, series.qf, cfg.regularity_harmonics).to_dict()
            spec = fft_power(signal)
        except (FluxHarmonicsError, ValueError) as exc:
            for method in cfg.methods:
                results.append(_error_record(base, filt, method, exc))
            continue
        t_embed = time.perf_counter() - t0
        for method in cfg.methods:
            t1 = time.perf_counter()
            try:
                ms, est = _decompose(method, X, cfg)
                labels = classify_modes(ms, cfg.eps_f, cfg.eps_p, cfg.harmonic_set)
                inv = pair_harmonics(labels)
                # pairs without the fundamental still reconstruct; the category stays deficient
                cycle = build_seasonal_cycle(ms, inv, X) if inv.pairs else None
            except (FluxHarmonicsError, ValueError, np.linalg.LinAlgError) as exc:
                results.append(_error_record(base, filt, method, exc))
                continue
            rec = dict(base)
            rec.update(
                filter=filt,
                method=method,
                status="ok",
                window=W,
                n_modes=ms.k,
                category=inv.category,
                n_pairs=inv.n_pairs,
                harmonics_used=list(cycle.harmonics_used) if cycle is not None else [],
                inventory=inv.to_dict(),
                characterization=charac,
                spectrum=ms.spectrum,
                variance=ms.variance,
            )
            if method == "NLSA":
                rec["eigenvalues"] = ms.eigenvalues
                rec["epsilon"] = ms.metadata["epsilon"]
                rec["normalization"] = ms.metadata["normalization"]
                if est is not None:
                    rec["epsilon_runs"] = list(est.runs)
                    rec["epsilon_fit_converged"] = est.all_fits_converged
            results.append(rec)
            timings.append(
                {
                    "series": label,
                    "filter": filt,
                    "method": method,
                    "embed_s": t_embed,
                    "decompose_s": time.perf_counter() - t1,
                }
            )
            if plot_root is not None:
                _plot_files(plot_root / label / f"filter_{filt}" / method, series, signal, ms, cycle, spec)
    return results, timings


def _error_record(base: dict, filt: str, method: str, exc: Exception) -> dict:
    rec = dict(base)
    rec.update(filter=filt, method=method, status="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def _load(path, cfg: PipelineConfig) -> FluxSeries:
    s = read_flux_csv(path, cfg.column_spec, interpolate_gaps=cfg.interpolate_gaps)
    return validate_series(s, min_len=2 * MIN_WINDOW)


def _assign_bins(results: list) -> None:
    ok = [r for r in results if r["status"] == "ok"]
    # one characterization per (series, filter); methods share it
    seen = {}
    for r in ok:
        seen.setdefault((r["series"], r["filter"]), r["characterization"])
    keys = list(seen)
    chars = [seen[k] for k in keys]
    for metric in ("regularity", "sample_entropy"):
        vals = [np.nan if c[metric] is None else c[metric] for c in chars]
        if vals:
            labels, _ = bin_metrics(vals)
            for c, lab in zip(chars, labels):
                c["bins"][metric] = lab
    unfiltered = [i for i, k in enumerate(keys) if k[1] == "none"]
    if unfiltered:
        labels, _ = bin_metrics([chars[i]["hf_variability"] for i in unfiltered])
        for i, lab in zip(unfiltered, labels):
            chars[i]["bins"]["hf_variability"] = lab
    for c in chars:
        c["bins"].setdefault("hf_variability", None)
    for r in ok:
        r["characterization"] = seen[(r["series"], r["filter"])]


def _task(args):
    path, cfg, plot_root = args
    try:
        series = _load(path, cfg)
    except (FluxHarmonicsError, ValueError, OSError) as exc:
        return None, [], [], {"input": str(path), "error": f"{type(exc).__name__}: {exc}"}
    results, timings = analyze_series(series, cfg, plot_root)
    return series.label, results, timings, None


def run_pipeline(cfg: PipelineConfig, series: Optional[Sequence[FluxSeries]] = None) -> RunReport:
    """Run every series x filter x method combination.

    Series come from ``series`` when given, otherwise from ``cfg.inputs``
    (files or directories of delimited files). With ``cfg.output_dir`` set,
    ``report.json``, ``summary.tsv``, ``timings.json`` and per-combination
    plot data are written there.
    """
    report = RunReport(config=cfg.to_dict())
    out = Path(cfg.output_dir) if cfg.output_dir else None
    plot_root = out / "plots" if (out is not None and cfg.write_plots) else None

    if series is not None:
        outcomes = []
        for s in series:
            try:
                validate_series(s, min_len=2 * MIN_WINDOW)
            except FluxHarmonicsError as exc:
                outcomes.append((None, [], [], {"input": s.label, "error": f"{type(exc).__name__}: {exc}"}))
                continue
            res, tim = analyze_series(s, cfg, plot_root)
            outcomes.append((s.label, res, tim, None))
    else:
        paths = list(iter_series_files(cfg.inputs))
        if not paths:
            report.errors.append({"input": ", ".join(cfg.inputs), "error": "no input series found"})
        tasks = [(p, cfg, plot_root) for p in paths]
        if cfg.jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                outcomes = list(pool.map(_task, tasks))
        else:
            outcomes = [_task(t) for t in tasks]

    for _, res, tim, err in outcomes:
        if err is not None:
            report.errors.append(err)
        report.results.extend(res)
        report.timings.extend(tim)
    _assign_bins(report.results)

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        (out / "summary.tsv").write_text(format_summary(summarize([report])))
        (out / "timings.json").write_text(json.dumps(report.timings, indent=1) + "\n")
    return report


SUMMARY_CLASSES = ("no H", "H=1", "H>=2")
_CLASS_OF = {"none": "no H", "deficient": "no H", "fundamental": "H=1", "multiple": "H>=2"}


def summarize(reports: Iterable[RunReport]) -> list:
    """Percentage of series per detection class for every method x filter.

    Deficient results count as "no H". Returns rows
    ``(method, filter, n, pct_noH, pct_H1, pct_H2)``.
    """
    counts: dict = {}
    for rep in reports:
        for r in rep.results:
            if r.get("status") != "ok":
                continue
            key = (r["method"], r["filter"])
            c = counts.setdefault(key, dict.fromkeys(SUMMARY_CLASSES, 0))
            c[_CLASS_OF[r["category"]]] += 1
    order_f = {f: i for i, f in enumerate(FILTERS)}
    rows = []
    for (method, filt) in sorted(counts, key=lambda k: (METHODS.index(k[0]), order_f.get(k[1], 99), k[1])):
        c = counts[(method, filt)]
        n = sum(c.values())
        rows.append((method, filt, n) + tuple(100.0 * c[k] / n for k in SUMMARY_CLASSES))
    return rows


def format_summary(rows: list) -> str:
    lines = ["method\tfilter\tn\tno H\tH=1\tH>=2"]
    for method, filt, n, a, b, c in rows:
        lines.append(f"{method}\t{filt}\t{n}\t{a:.1f}\t{b:.1f}\t{c:.1f}")
    return "\n".join(lines) + "\n"


def format_table(rows: list) -> str:
    """Classes as rows and method/filter as columns."""
    cols = [(m, f) for m, f, *_ in rows]
    by = {(m, f): vals for m, f, _, *vals in rows}
    head = "class\t" + "\t".join(f"{m}/{f}" for m, f in cols)
    lines = [head]
    for i, cls in enumerate(SUMMARY_CLASSES):
        lines.append(cls + "\t" + "\t".join(f"{by[c][i]:.1f}%" for c in cols))
    return "\n".join(lines) + "\n"


def parse_summary(text: str) -> list:
    rows = []
    for line in text.strip().splitlines()[1:]:
        m, f, n, a, b, c = line.split("\t")
        rows.append((m, f, int(n), float(a), float(b), float(c)))
    return rows
