"""Output bundles and the end-to-end reproduction report.

Every command produces a :class:`ReportBundle`: CSV tables (the canonical
output), optional SVG figures, log lines and a JSON manifest listing each
emitted file with its SHA-256 digest. Nothing time-dependent goes into a
bundle, so rerunning a deterministic command with the same config
reproduces the same digests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .cohort import PolicyScenario, initialize_uniform, load_scenario, run, steady_state, summarize_window
from .config import RunConfig
from .did import (
    DesignSpec,
    FirstStageWarning,
    detrend_pre,
    did_of_means,
    event_study,
    fit_twfe_did,
    student_adjust,
    synthetic_control,
    wild_cluster_bootstrap,
)
from .errors import UsageError
from .fixtures import FIXTURE_SEED, POLICY_YEAR, TREATED, resolve_reference
from .panel import PanelDataset, group_mean_rate, ingest_panel
from .proportionality import QueueParameters, proportionality_verdict, vcr_uplift
from .svg import line_chart

MANIFEST = "manifest.json"
LOG = "run.log"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def csv_text(header: List[str], rows: List[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@dataclass
class ReportBundle:
    """Everything one command emits, held in memory until :meth:`write`."""

    command: str
    config: RunConfig
    seed: Optional[int] = None
    inputs: Dict[str, str] = field(default_factory=dict)
    tables: Dict[str, str] = field(default_factory=dict)
    figures: Dict[str, str] = field(default_factory=dict)
    documents: Dict[str, str] = field(default_factory=dict)
    logs: List[str] = field(default_factory=list)
    values: Dict[str, float] = field(default_factory=dict)

    def add_input(self, reference: str, path: str) -> None:
        self.inputs[reference] = sha256_file(path)

    def log(self, line: str) -> None:
        self.logs.extend(line.splitlines() or [""])

    def files(self) -> Dict[str, str]:
        out: Dict[str, str] = {}
        for group in (self.tables, self.figures, self.documents):
            for name, text in group.items():
                if name in out or name in (MANIFEST, LOG):
                    raise ValueError(f"duplicate bundle file {name!r}")
                out[name] = text
        if self.logs:
            out[LOG] = "\n".join(self.logs) + "\n"
        return dict(sorted(out.items()))

    def manifest(self) -> dict:
        return {
            "toolkit": "retirement_eval",
            "version": __version__,
            "command": self.command,
            "format_version": self.config.format_version,
            "config": self.config.to_text(),
            "config_hash": self.config.digest(),
            "seed": self.seed,
            "inputs": [{"reference": k, "sha256": v} for k, v in sorted(self.inputs.items())],
            "files": [{"name": name, "sha256": sha256_text(text), "bytes": len(text.encode("utf-8"))}
                      for name, text in self.files().items()],
        }

    def manifest_text(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"

    def write(self, directory: str) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        written = []
        for name, text in list(self.files().items()) + [(MANIFEST, self.manifest_text())]:
            path = os.path.join(directory, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
        return written


# --- the reproduction report ------------------------------------------------------

REPORT_DEFAULTS = {
    "panel": "@calibrated",
    "treated": TREATED,
    "policy_year": str(POLICY_YEAR),
    "seed": str(FIXTURE_SEED),
    "replications": "999",
    "mandate_scenario": "@mandate67",
    "abolished_scenario": "@abolished",
}


def _load_panel(reference: str, bundle: ReportBundle) -> PanelDataset:
    path = resolve_reference(reference)
    bundle.add_input(reference, path)
    with open(path, encoding="utf-8", newline="") as fh:
        return ingest_panel(fh)


def _load_scenario(reference: str, bundle: ReportBundle) -> PolicyScenario:
    path = resolve_reference(reference)
    bundle.add_input(reference, path)
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh)


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


def _ladder(bundle: ReportBundle) -> List[str]:
    rows = []
    for mandatory in (67, 69):
        params = QueueParameters(40, mandatory, 3, 0.5, 0.5)
        res = vcr_uplift(params)
        rows.append([40, mandatory, 3, 0.5, 0.5, res.career_length, res.gross_uplift, res.after_other_causes,
                     res.net_uplift, proportionality_verdict(res).value])
    bundle.tables["ladder.csv"] = csv_text(
        ["appointment_age", "mandatory_age", "extension", "other_share", "voluntary_share", "career_length",
         "gross_uplift", "after_other_causes", "net_uplift", "verdict"], rows)
    bundle.values.update({"ladder_gross_67": rows[0][6], "ladder_after_other_67": rows[0][7],
                          "ladder_net_67": rows[0][8], "ladder_gross_69": rows[1][6], "ladder_net_69": rows[1][8]})
    md = ["## Proportionality ladder", "", "Source: `ladder.csv`, one row per mandatory age.", "",
          "| mandatory age | career | gross uplift | after other causes | net uplift | verdict |",
          "|---|---|---|---|---|---|"]
    for r in rows:
        md.append(f"| {r[1]} | {r[5]:g} | {_pct(r[6])} | {_pct(r[7])} | {_pct(r[8])} | {r[9]} |")
    return md


def _simulation(bundle: ReportBundle, mandate: PolicyScenario, abolished: PolicyScenario) -> List[str]:
    years = 60
    rows = []
    for key, sc in (("mandate", mandate), ("abolished", abolished)):
        trace = run(sc, years, initialize_uniform(sc))
        sim = summarize_window(trace, (years - 29, years))
        ana = steady_state(sc)
        rows.append([key, sc.name, sim.vcr, ana.vcr, abs(sim.vcr - ana.vcr), sim.littles_residual,
                     ana.mean_career_length])
    uplift_sim = rows[0][2] / rows[1][2] - 1.0
    extension = abolished.exit_age() - mandate.exit_age()
    closed = vcr_uplift(QueueParameters(mandate.mean_entry_age, mandate.exit_age(), extension)).gross_uplift
    rows.append(["uplift", "mandate vs abolished", uplift_sim, closed, abs(uplift_sim - closed), "", ""])

    # transient: raise the mandate by two years part-way through a run
    raised = mandate.replace(mandatory_age=mandate.mandatory_age + 2, name=f"{mandate.name} raised by 2")
    change_at = 11
    tr = run(mandate, 20, initialize_uniform(mandate), changes={change_at: raised})
    mandatory = tr.column("mandatory")
    zero_years = [int(r.year_index) for r, m in zip(tr.records, mandatory) if r.year_index >= change_at and m == 0]
    run_len = 0
    for y in range(change_at, len(mandatory) + 1):
        if mandatory[y - 1] == 0:
            run_len += 1
        else:
            break
    bundle.tables["simulation.csv"] = csv_text(
        ["quantity", "scenario", "simulated", "analytic", "abs_difference", "littles_residual", "residence"], rows)
    bundle.tables["transient.csv"] = csv_text(
        ["year_index", "mandatory_exits", "hires"],
        [[r.year_index, float(r.mandatory), float(r.hires)] for r in tr.records])
    bundle.figures["transient.svg"] = line_chart(
        {"mandatory exits": (tr.column("year_index"), mandatory), "hires": (tr.column("year_index"),
                                                                            tr.column("hires"))},
        title="Raising the mandatory age by two years", xlabel="simulated year", ylabel="people per year",
        vline=change_at)
    bundle.values.update({"sim_vcr_mandate": rows[0][2], "analytic_vcr_mandate": rows[0][3],
                          "sim_vcr_abolished": rows[1][2], "analytic_vcr_abolished": rows[1][3],
                          "zero_mandatory_run": float(run_len)})
    md = ["## Simulator against the closed form", "",
          "Source: `simulation.csv` (years 31-60 of a 60-year run from a uniform age profile) and "
          "`transient.csv`.", "",
          "| scenario | simulated VCR | analytic VCR | abs. difference | Little's-law residual |",
          "|---|---|---|---|---|"]
    for r in rows[:2]:
        md.append(f"| {r[1]} | {r[2]:.6f} | {r[3]:.6f} | {r[4]:.2e} | {r[5]:.2e} |")
    md += ["", f"Relative uplift from the simulator {_pct(uplift_sim)}; closed form {_pct(closed)}.",
           f"After raising the mandate at year {change_at}, mandatory exits are zero for {run_len} consecutive "
           f"years (years {', '.join(map(str, zero_years[:run_len]))})."]
    return md


def _fixture_means(bundle: ReportBundle, data: PanelDataset, treated: str) -> List[str]:
    years = [int(y) for y in data.years]
    donors = [u for u in data.institutions if u != treated]
    t_mean = group_mean_rate(data, [treated], years)
    d_mean = group_mean_rate(data, donors, years)
    bundle.tables["fixture_means.csv"] = csv_text(["series", "institutions", "mean_job_creation_rate"],
                                                  [["treated", 1, t_mean], ["donor_average", len(donors), d_mean]])
    bundle.values.update({"treated_mean": t_mean, "donor_mean": d_mean})
    return ["## Panel means", "", "Source: `fixture_means.csv`.", "",
            f"Mean job creation rate {years[0]}-{years[-1]}: treated ({treated}) {_pct(t_mean)}, "
            f"average over {len(donors)} comparators {_pct(d_mean)}."]


def _did_table(bundle: ReportBundle, data: PanelDataset, spec: DesignSpec, seed: int, reps: int) -> List[str]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FirstStageWarning)
        columns = {"none": data, "detrend": detrend_pre(data, spec).panel,
                   "student_adjust": student_adjust(data, spec).panel}
    stats_rows: Dict[str, list] = {k: [] for k in
                                   ("delta", "did_of_means", "se_iid", "p_iid", "se_hc_robust", "p_hc_robust",
                                    "se_cluster_by_unit", "p_cluster_by_unit", "p_wild_cluster_bootstrap",
                                    "n_obs")}
    for name, panel in columns.items():
        fit = fit_twfe_did(panel, spec, se_kind="hc_robust")
        boot = wild_cluster_bootstrap(panel, spec, replications=reps, seed=seed)
        stats_rows["delta"].append(fit.delta)
        stats_rows["did_of_means"].append(did_of_means(panel, spec))
        for kind in ("iid", "hc_robust", "cluster_by_unit"):
            stats_rows[f"se_{kind}"].append(fit.se_all[kind])
            stats_rows[f"p_{kind}"].append(fit.p_value_for(kind))
        stats_rows["p_wild_cluster_bootstrap"].append(boot.p_value)
        stats_rows["n_obs"].append(fit.n_obs)
    bundle.tables["did_table.csv"] = csv_text(["statistic"] + list(columns),
                                              [[k] + v for k, v in stats_rows.items()])
    ratio = stats_rows["p_wild_cluster_bootstrap"][0] / stats_rows["p_hc_robust"][0]
    bundle.values.update({"delta": stats_rows["delta"][0], "p_hc_robust": stats_rows["p_hc_robust"][0],
                          "p_bootstrap": stats_rows["p_wild_cluster_bootstrap"][0], "p_ratio": ratio})

    es = event_study(data, spec)
    buf = io.StringIO()
    es.to_csv(buf)
    bundle.tables["event_study.csv"] = buf.getvalue()
    bundle.figures["event_study.svg"] = line_chart(
        {"treated minus comparators": (es.years, es.estimates)}, band=(es.years, es.lower, es.upper),
        title=f"Event study, base year {spec.base_year}", xlabel="academic year (start)",
        ylabel="difference in job creation rate", hline=0.0, vline=spec.policy_year)

    sc = synthetic_control(data, spec)
    buf = io.StringIO()
    sc.to_csv(buf)
    bundle.tables["synth.csv"] = buf.getvalue()
    gy = np.array(list(sc.gap_series))
    bundle.figures["synth_gap.svg"] = line_chart(
        {"treated minus synthetic": (gy, np.array(list(sc.gap_series.values())))},
        title="Synthetic control gap", xlabel="academic year (start)", ylabel="gap in job creation rate",
        hline=0.0, vline=spec.policy_year)
    post_gap = float(np.mean([g for y, g in sc.gap_series.items() if y >= spec.policy_year]))
    bundle.values.update({"synth_pre_rmse": sc.pre_fit_rmse, "synth_post_gap": post_gap})

    fmt = lambda v: f"{v:.4g}" if isinstance(v, float) else str(v)
    md = ["## Difference in differences on the panel", "",
          f"Source: `did_table.csv`. Treated unit {spec.treated_unit}, policy year {spec.policy_year}, "
          f"wild cluster bootstrap with {reps} Rademacher replications, seed {seed}.", "",
          "| statistic | " + " | ".join(columns) + " |", "|---" * (len(columns) + 1) + "|"]
    for k, v in stats_rows.items():
        md.append(f"| {k} | " + " | ".join(fmt(x) for x in v) + " |")
    md += ["", f"Without adjustment the bootstrap p-value is {ratio:.1f} times the heteroskedasticity-robust one.",
           "The adjusted columns treat first-stage estimates as data; their standard errors ignore that step.",
           "", "Source: `event_study.csv`, `event_study.svg`. The base-year entry is zero by construction and "
           "the intervals rest on comparator residuals only.", "",
           f"Source: `synth.csv`, `synth_gap.svg`. Pre-period RMSE {sc.pre_fit_rmse:.4g}; mean post-period gap "
           f"{post_gap:.4g}."]
    top = sorted(sc.weights.items(), key=lambda kv: -kv[1])[:5]
    md.append("Largest donor weights: " + ", ".join(f"{u} {w:.3f}" for u, w in top if w > 0) + ".")
    return md


def emit_reproduction_report(config: Optional[RunConfig] = None) -> ReportBundle:
    """Run the whole pipeline on the bundled fixtures and collect one report.

    Parameters come from the ``[report]`` section of ``config``; missing keys
    take the defaults in ``REPORT_DEFAULTS``. The resolved parameters are
    what the manifest records.
    """
    config = config or RunConfig()
    params = {**REPORT_DEFAULTS, **config.for_command("report")}
    resolved = config.with_command("report", params)
    resolved.validate("report")
    try:
        seed = int(params["seed"])
        reps = int(params["replications"])
        policy_year = int(params["policy_year"])
    except ValueError as exc:
        raise UsageError(f"report: {exc}") from None
    bundle = ReportBundle("report", resolved, seed=seed)
    data = _load_panel(params["panel"], bundle)
    mandate = _load_scenario(params["mandate_scenario"], bundle)
    abolished = _load_scenario(params["abolished_scenario"], bundle)
    spec = DesignSpec(params["treated"], policy_year=policy_year, base_year=policy_year)

    md = ["# Reproduction report", "",
          f"retirement_eval {__version__}; config sha256 `{resolved.digest()}`. "
          "Each section names the table it was read from; `manifest.json` lists the digests.", ""]
    md += _ladder(bundle) + [""]
    md += _simulation(bundle, mandate, abolished) + [""]
    md += _fixture_means(bundle, data, spec.treated_unit) + [""]
    md += _did_table(bundle, data, spec, seed, reps) + [""]
    table_list = ", ".join(f"`{n}` {sha256_text(t)[:12]}" for n, t in sorted(bundle.tables.items()))
    md += ["## Tables", "", table_list]
    bundle.documents["report.md"] = "\n".join(md) + "\n"
    for key in ("treated_mean", "donor_mean", "delta", "p_hc_robust", "p_bootstrap"):
        bundle.log(f"{key} = {bundle.values[key]!r}")
    if not all(math.isfinite(v) for v in bundle.values.values()):
        bundle.log("warning: non-finite values in report")
    return bundle
