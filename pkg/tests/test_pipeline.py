import json

import numpy as np
import pytest

from fluxharmonics.exceptions import ConfigError
from fluxharmonics.ingest import FluxSeries, write_flux_csv
from fluxharmonics.pipeline import (
    PipelineConfig,
    RunReport,
    format_summary,
    format_table,
    parse_summary,
    run_pipeline,
    summarize,
)
from fluxharmonics.synth import Noise, SignalRecipe, generate

CASE1 = ((1, 1.0, 0.0), (2, 0.5, 0.4), (3, 0.3, 1.1), (4, 0.2, 2.0))


def _report(*records):
    results = [
        {"series": f"s{i}", "filter": f, "method": m, "status": "ok", "category": c}
        for i, (m, f, c) in enumerate(records)
    ]
    return RunReport(config={}, results=results)


def test_config_invariants():
    with pytest.raises(ConfigError):
        PipelineConfig(methods=())
    with pytest.raises(ConfigError):
        PipelineConfig(filters=())
    with pytest.raises(ConfigError):
        PipelineConfig(methods=("PCA",))
    with pytest.raises(ConfigError):
        PipelineConfig(filters=("x",))
    cfg = PipelineConfig(methods=("both",), filters=("none", 6, "6.0", 3))
    assert cfg.methods == ("SSA", "NLSA") and cfg.filters == ("none", "6", "3")


def test_summarize_examples():
    rows = summarize([_report(("NLSA", "none", "multiple"))])
    assert rows == [("NLSA", "none", 1, 0.0, 0.0, 100.0)]
    rows = summarize([_report(("SSA", "none", "fundamental")), _report(("SSA", "none", "none"))])
    assert rows == [("SSA", "none", 2, 50.0, 50.0, 0.0)]
    rows = summarize([_report(("SSA", "6", "deficient"))])
    assert rows[0][3] == 100.0


def test_summary_rows_sum_to_100():
    rng = np.random.default_rng(0)
    cats = ["none", "deficient", "fundamental", "multiple"]
    recs = [(m, f, cats[rng.integers(4)]) for m in ("SSA", "NLSA") for f in ("none", "6", "4", "3") for _ in range(63)]
    rows = summarize([_report(*recs)])
    assert len(rows) == 8
    for row in rows:
        assert row[2] == 63 and sum(row[3:]) == pytest.approx(100.0)
    assert parse_summary(format_summary(rows)) == [r[:3] + tuple(round(v, 1) for v in r[3:]) for r in rows]
    assert format_table(rows).splitlines()[0].startswith("class\tSSA/none")


def test_run_in_memory_both_methods():
    syn = generate(SignalRecipe(4, CASE1, Noise.white(0.1), seed=0))
    rep = run_pipeline(PipelineConfig(filters=("none", "6")), series=[syn.series])
    assert len(rep.results) == 4 and not rep.errors
    cats = {(r["filter"], r["method"]): r["category"] for r in rep.results}
    assert any(cats[(f, "SSA")] == "multiple" and cats[(f, "NLSA")] == "multiple" for f in ("none", "6"))
    r = rep.results[0]
    assert r["characterization"]["bins"]["hf_variability"] == "low"
    assert "epsilon" in rep.results[1] and len(r["spectrum"]) == 16
    assert len(rep.timings) == 4


def test_noiseless_filters_agree():
    syn = generate(SignalRecipe(4, ((1, 1, 0), (2, 0.5, 0.2))))
    rep = run_pipeline(PipelineConfig(filters=("none", "6"), methods=("SSA",)), series=[syn.series])
    cats = [r["category"] for r in rep.results]
    assert cats[0] == cats[1]


def test_failures_are_recorded_not_raised():
    import datetime as dt

    short = FluxSeries(np.arange(100.0), dt.date(2000, 1, 1), site_id="X")
    flat = FluxSeries(np.ones(1500), dt.date(2000, 1, 1), site_id="F")
    rep = run_pipeline(PipelineConfig(methods=("SSA",)), series=[short, flat])
    assert rep.errors[0]["input"] == "X" and "TooShort" in rep.errors[0]["error"]
    assert rep.results[0]["status"] == "error" and "ConstantRow" in rep.results[0]["error"]
    assert rep.all_failed


def test_outputs_and_determinism(tmp_path):
    data = tmp_path / "in"
    data.mkdir()
    for seed in (0, 1):
        s = generate(SignalRecipe(4, CASE1[:2], Noise.white(0.2), seed=seed, site_id=f"S{seed}", variable="GPP")).series
        (data / f"{s.label}.csv").write_text(write_flux_csv(s))
    (data / "BAD_GPP.csv").write_text("2000-01-01,1\n2000-01-05,2\n")
    outs = []
    for name in ("a", "b"):
        cfg = PipelineConfig(inputs=(str(data),), filters=("none", "4"), output_dir=str(tmp_path / name))
        run_pipeline(cfg)
        outs.append((tmp_path / name / "report.json").read_bytes())
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert len(rep["results"]) == 8 and rep["errors"][0]["input"].endswith("BAD_GPP.csv")
    assert "timings" not in rep
    plot = tmp_path / "a" / "plots" / "S0_GPP" / "filter_4" / "NLSA"
    names = sorted(p.name for p in plot.iterdir())
    assert names == ["dimred_spectrum.tsv", "fft_spectrum.tsv", "mode_spectra.tsv", "modes.tsv", "signal.tsv"]
    header = (plot / "modes.tsv").read_text().splitlines()[0].split("\t")
    assert header[0] == "lag" and len(header) == 13
    summary = (tmp_path / "a" / "summary.tsv").read_text().splitlines()
    assert summary[0] == "method\tfilter\tn\tno H\tH=1\tH>=2" and len(summary) == 5


def test_empty_input_directory(tmp_path):
    rep = run_pipeline(PipelineConfig(inputs=(str(tmp_path),), output_dir=str(tmp_path / "out")))
    assert rep.all_failed and rep.results == [] and rep.errors
    assert json.loads((tmp_path / "out" / "report.json").read_text())["errors"]
