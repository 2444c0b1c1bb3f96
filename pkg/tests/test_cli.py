import json
from pathlib import Path

import numpy as np
import pytest

from swbindex.cli import run_command
from swbindex.sem import builtin_swb_model, simulate_observations


def run(data_dir, *args):
    return run_command(["--data-dir", str(data_dir), *args])


@pytest.fixture(scope="module")
def pipeline_dir(fixture_corpus, tmp_path_factory):
    """Fixture corpus ingested and estimated once for the read-only tests."""
    data = tmp_path_factory.mktemp("cli_data")
    assert run(data, "ingest", str(fixture_corpus["posts"]), "--lang", "ja", "--country", "jp") == 0
    assert run(data, "estimate", "--training-dir", str(fixture_corpus["training"]),
               "--bootstrap", "8", "--workers", "2") == 0
    assert run(data, "index") == 0
    return data


class TestSubcommands:
    def test_index_row_per_day(self, pipeline_dir):
        lines = (pipeline_dir / "corpus/default/index.csv").read_text().splitlines()
        assert lines[0] == "date,emo,sat,vit,res,fun,tru,rel,wor,swb"
        assert len(lines) == 1 + 10  # header + one row per corpus day

    def test_every_day_complete(self, pipeline_dir):
        for line in (pipeline_dir / "corpus/default/index.csv").read_text().splitlines()[1:]:
            assert "" not in line.split(",")

    def test_estimate_reports_embed_config(self, pipeline_dir):
        report = json.loads(next((pipeline_dir / "corpus/default/estimates").glob("*.json")).read_text())
        assert report["config"]["seed"] == 0
        assert report["config"]["bootstrap"] == 8
        assert set(report["proportions"]) == {"positive", "neutral", "negative", "offtopic"}
        assert report["se"] is not None

    def test_aggregate_trend_report(self, pipeline_dir, capsys):
        assert run(pipeline_dir, "aggregate", "--period", "week") == 0
        assert run(pipeline_dir, "trend", "--bandwidth", "5") == 0
        assert run(pipeline_dir, "corr") == 0
        assert run(pipeline_dir, "report") == 0
        out = capsys.readouterr().out
        assert "report ->" in out
        manifest = json.loads((pipeline_dir / "report.json").read_text())
        hashed = {Path(a["path"]).name for a in manifest["artifacts"]}
        assert {"index.csv", "aggregate_week.csv", "trend_swb.csv", "corr.csv"} <= hashed
        trend_lines = (pipeline_dir / "corpus/default/trend_swb.csv").read_text().splitlines()
        assert trend_lines[0] == "date,value,se"
        assert len(trend_lines) == 11

    def test_aggregate_bundled_japan_matches_reference(self, tmp_path, capsys):
        assert run(tmp_path, "aggregate", "--period", "year", "--components", "japan") == 0
        out = capsys.readouterr().out
        assert "54.4" in out  # 2015 composite
        assert "52.5" in out  # 2018 composite

    def test_corr_prints_reference_values(self, tmp_path, capsys):
        assert run(tmp_path, "corr") == 0
        out = capsys.readouterr().out
        row = next(l for l in out.splitlines() if "swb_japan" in l and "hdi_japan" in l)
        assert "-0.99" in row

    def test_sem_subcommand(self, tmp_path, capsys):
        model = builtin_swb_model()
        lam_swb = float(np.sqrt(0.95 / 1.13))
        theta = np.array([0.8, 0.7, 0.6, -0.5, lam_swb, 0.3, -0.2, -0.2, 0.1, 0.1, -0.1,
                          0.36, 0.51, 0.64, 0.75, 1.0])
        X = simulate_observations(model, theta, 48, np.random.default_rng(3))
        lines = ["date," + ",".join(model.observed)]
        year, month = 2015, 1
        for row in X:
            lines.append(f"{year}-{month:02d}," + ",".join(f"{v:.6f}" for v in row))
            month += 1
            if month == 13:
                year, month = year + 1, 1
        (tmp_path / "panel.csv").write_text("\n".join(lines) + "\n")
        (tmp_path / "panel.json").write_text(json.dumps({n: "monthly" for n in model.observed}))
        assert run(tmp_path, "sem", "--panel", str(tmp_path / "panel.csv")) == 0
        out = capsys.readouterr().out
        assert "N = 48" in out
        assert "wellbeing" in out

    def test_unknown_subcommand_usage_exit(self, tmp_path):
        assert run(tmp_path, "frobnicate") == 2

    def test_pipeline_error_is_one_line(self, tmp_path, capsys):
        rc = run(tmp_path, "index")
        assert rc == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("error: index_error:")
        assert "\n" not in err


class TestDeterminism:
    def _produce(self, fixture_corpus, base, workers):
        data = base / f"w{workers}"
        assert run(data, "ingest", str(fixture_corpus["posts"]), "--lang", "ja", "--country", "jp") == 0
        assert run(data, "estimate", "--training-dir", str(fixture_corpus["training"]),
                   "--bootstrap", "8", "--workers", str(workers), "--seed", "7") == 0
        assert run(data, "index", "--seed", "7") == 0
        return data

    def test_byte_identical_across_parallelism(self, fixture_corpus, tmp_path):
        a = self._produce(fixture_corpus, tmp_path, workers=1)
        b = self._produce(fixture_corpus, tmp_path, workers=4)
        index_a = (a / "corpus/default/index.csv").read_bytes()
        index_b = (b / "corpus/default/index.csv").read_bytes()
        assert index_a == index_b
        reports_a = sorted((a / "corpus/default/estimates").glob("*.json"))
        reports_b = sorted((b / "corpus/default/estimates").glob("*.json"))
        assert [p.name for p in reports_a] == [p.name for p in reports_b]
        for pa, pb in zip(reports_a, reports_b):
            ja, jb = json.loads(pa.read_text()), json.loads(pb.read_text())
            # the embedded config legitimately differs in location and worker count
            for doc in (ja, jb):
                doc["config"].pop("data_dir")
                doc["config"].pop("workers")
            assert ja == jb
