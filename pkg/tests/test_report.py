import json

import pytest

from retirement_eval.config import RunConfig
from retirement_eval.report import ReportBundle, csv_text, emit_reproduction_report, sha256_text


@pytest.fixture(scope="module")
def report():
    return emit_reproduction_report()


def test_fixture_means(report):
    assert report.values["treated_mean"] == pytest.approx(0.03, abs=1e-9)
    assert report.values["donor_mean"] == pytest.approx(0.05, abs=1e-9)
    assert report.tables["fixture_means.csv"].splitlines()[1].startswith("treated,1,")


def test_ladder_values(report):
    v = report.values
    assert v["ladder_gross_67"] == pytest.approx(3 / 27, abs=1e-12)
    assert v["ladder_after_other_67"] == pytest.approx(1.5 / 27, abs=1e-12)
    assert v["ladder_net_67"] == pytest.approx(0.75 / 27, abs=1e-12)
    assert v["ladder_gross_69"] == pytest.approx(3 / 29, abs=1e-12)
    assert v["ladder_net_69"] == pytest.approx(0.75 / 29, abs=1e-12)


def test_simulation_matches_analytic(report):
    v = report.values
    assert v["sim_vcr_mandate"] == pytest.approx(v["analytic_vcr_mandate"], abs=1e-12)
    assert v["sim_vcr_abolished"] == pytest.approx(v["analytic_vcr_abolished"], abs=1e-12)
    assert v["analytic_vcr_mandate"] == pytest.approx(1 / 27)
    assert v["analytic_vcr_abolished"] == pytest.approx(1 / 30)


def test_bootstrap_more_conservative_than_hc(report):
    assert report.values["p_bootstrap"] > report.values["p_hc_robust"]
    assert report.values["p_ratio"] == pytest.approx(report.values["p_bootstrap"] / report.values["p_hc_robust"])


def test_expected_files(report):
    names = set(report.files())
    assert {"ladder.csv", "simulation.csv", "fixture_means.csv", "did_table.csv", "event_study.csv",
            "synth.csv", "report.md", "transient.svg", "event_study.svg", "synth_gap.svg", "run.log"} <= names
    manifest = json.loads(report.manifest_text())
    assert [f["name"] for f in manifest["files"]] == sorted(names)
    assert all(f["sha256"] == sha256_text(report.files()[f["name"]]) for f in manifest["files"])


def test_rerun_is_byte_identical(tmp_path):
    cfg = RunConfig().with_command("report", {"replications": "199", "seed": "7"})
    a = emit_reproduction_report(cfg)
    b = emit_reproduction_report(cfg)
    assert a.files() == b.files()
    assert a.manifest_text() == b.manifest_text()
    a.write(str(tmp_path))
    assert (tmp_path / "manifest.json").read_text() == a.manifest_text()


def test_seed_changes_only_bootstrap(tmp_path):
    a = emit_reproduction_report(RunConfig().with_command("report", {"replications": "199", "seed": "7"}))
    b = emit_reproduction_report(RunConfig().with_command("report", {"replications": "199", "seed": "8"}))
    assert a.tables["ladder.csv"] == b.tables["ladder.csv"]
    assert a.tables["simulation.csv"] == b.tables["simulation.csv"]
    assert a.values["delta"] == b.values["delta"]
    assert a.manifest()["config_hash"] != b.manifest()["config_hash"]


def test_csv_text_uses_round_trip_floats():
    text = csv_text(["a", "b"], [[0.1 + 0.2, "x"]])
    assert float(text.splitlines()[1].split(",")[0]) == 0.1 + 0.2


def test_duplicate_file_names_rejected():
    bundle = ReportBundle("x", RunConfig())
    bundle.tables["a.csv"] = "1\n"
    bundle.figures["a.csv"] = "<svg/>"
    with pytest.raises(ValueError):
        bundle.files()
