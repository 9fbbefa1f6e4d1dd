"""Command-line front end.

Each subcommand maps to one module operation and writes a bundle (CSV
tables, SVG figures, ``run.log`` and ``manifest.json``) to an output
directory. The directory is ``--out`` when given; otherwise
``$RETIREMENT_EVAL_OUT/<command>``; otherwise ``./retirement_eval_out/<command>``.

Exit status: 0 on success, 2 for usage errors, 3 for data errors, 4 for
numerical failures and 1 for anything unexpected. Failures print exactly one
JSON line on stderr (usage errors print the usage text first).
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import warnings
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .cohort import (
    CohortState,
    PolicyScenario,
    compare_scenarios,
    initialize_uniform,
    load_scenario,
    run,
    stationary_state,
    steady_state,
    summarize_window,
)
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
from .did.estimators import EVENT_MODES
from .did.ols import SE_KINDS
from .errors import DataError, NumericalError, ToolkitError, UsageError
from .fixtures import resolve_reference
from .panel import (
    PanelDataset,
    classify_staff_record,
    group_mean_rate,
    ingest_panel,
    job_creation_rate,
    read_staff_records,
)
from .proportionality import QueueParameters, ladder_csv, proportionality_verdict, summary_text, vcr_uplift
from .report import REPORT_DEFAULTS, ReportBundle, csv_text, emit_reproduction_report
from .svg import line_chart

ENV_OUT = "RETIREMENT_EVAL_OUT"
DEFAULT_OUT = "retirement_eval_out"
COMMANDS = ("ingest", "classify", "vcr", "proportionality", "simulate", "compare", "did", "event-study",
            "bootstrap", "synth", "report")
# flags shared by every subcommand; never recorded in the run config
_COMMON = ("config", "out", "quiet")
ADJUSTMENTS = ("none", "detrend", "student", "student_per_unit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


# --- argument types -------------------------------------------------------------


def _year_range(text: str) -> Tuple[int, int]:
    try:
        lo, hi = (int(p) for p in text.replace("-", ":").split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected FIRST:LAST, got {text!r}") from None
    return lo, hi


def _band(text: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH, got {text!r}") from None
    return lo, hi


def _mapping(items: Optional[Sequence[str]]) -> Dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--col expects FIELD=COLUMN, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


# --- parser -----------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="sectioned key = value file; flags override it")
    p.add_argument("--out", metavar="DIR", help=f"output directory (default ${ENV_OUT}/<command>)")
    p.add_argument("--quiet", action="store_true", help="do not echo the run log")


def _design(p: argparse.ArgumentParser) -> None:
    p.add_argument("--panel", metavar="CSV", help="panel file, or @calibrated / @noiseless for bundled data")
    p.add_argument("--treated", metavar="UNIT", help="treated institution")
    p.add_argument("--policy-year", type=int, default=2012)
    p.add_argument("--base-year", type=int, help="event-study pivot (default: policy year)")
    p.add_argument("--pre-window", type=_year_range, metavar="FIRST:LAST")
    p.add_argument("--post-window", type=_year_range, metavar="FIRST:LAST")
    p.add_argument("--group", help="staff group (EAC, EAR, Unclassified)")
    p.add_argument("--outcome", default="job_creation_rate")
    p.add_argument("--adjust", choices=ADJUSTMENTS, default="none", help="pre-trend adjustment")


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="retirement-eval", description="Retirement-policy evaluation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    subs: Dict[str, argparse.ArgumentParser] = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _common(p)
        subs[name] = p
        return p

    p = add("ingest", "validate a panel or staff-record file and write the canonical panel CSV")
    p.add_argument("--input", metavar="FILE")
    p.add_argument("--col", action="append", metavar="FIELD=COLUMN", help="map a field to a column name")
    p.add_argument("--delimiter", choices=("comma", "tab"))
    p.add_argument("--default-group", default="EAC")

    p = add("classify", "assign each staff record to EAC, EAR or Unclassified")
    p.add_argument("--input", metavar="FILE")
    p.add_argument("--col", action="append", metavar="FIELD=COLUMN")
    p.add_argument("--delimiter", choices=("comma", "tab"))

    p = add("vcr", "job creation rates per institution and year")
    p.add_argument("--panel", metavar="CSV")
    p.add_argument("--group")
    p.add_argument("--treated", metavar="UNIT", help="also report treated vs comparator means")
    p.add_argument("--years", type=_year_range, metavar="FIRST:LAST")

    p = add("proportionality", "closed-form vacancy-creation uplift of a mandatory retirement age")
    p.add_argument("--appointment-age", type=float)
    p.add_argument("--mandatory-age", type=float)
    p.add_argument("--extension", type=float, help="mean years worked beyond the mandate without it")
    p.add_argument("--other-share", type=float, default=0.0)
    p.add_argument("--voluntary-share", type=float, default=0.0)
    p.add_argument("--mode", choices=("career", "extended"), default="career")
    p.add_argument("--band", type=_band, default=(0.02, 0.04), metavar="LOW:HIGH")

    p = add("simulate", "run the cohort queue for one scenario")
    p.add_argument("--scenario", metavar="INI", help="scenario file, or @mandate67 / @abolished")
    p.add_argument("--years", type=int, default=60)
    p.add_argument("--initial", choices=("uniform", "stationary"), default="uniform")
    p.add_argument("--change-at", type=int, metavar="STEP", help="step at which --change-scenario takes over")
    p.add_argument("--change-scenario", metavar="INI")
    p.add_argument("--window", type=_year_range, metavar="FIRST:LAST", help="summary window (default last 30)")

    p = add("compare", "vacancies under two scenarios from the same starting state")
    p.add_argument("--scenario-a", metavar="INI")
    p.add_argument("--scenario-b", metavar="INI")
    p.add_argument("--years", type=int, default=60)

    p = add("did", "two-way fixed effects difference in differences")
    _design(p)
    p.add_argument("--se-kind", choices=SE_KINDS, default="cluster_by_unit")

    p = add("event-study", "per-year treated-minus-comparator contrasts")
    _design(p)
    p.add_argument("--mode", choices=EVENT_MODES, default="base_year")
    p.add_argument("--se-kind", choices=SE_KINDS, default="cluster_by_unit")
    p.add_argument("--level", type=float, default=0.95)

    p = add("bootstrap", "wild cluster bootstrap p-value for the DiD coefficient")
    _design(p)
    p.add_argument("--replications", type=int, default=999)
    p.add_argument("--seed", type=int, help="required")
    p.add_argument("--observation-level", action="store_true", help="one sign per cell instead of per unit")
    p.add_argument("--jobs", type=int, default=1)

    p = add("synth", "synthetic control weights and gap series")
    _design(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=100_000)

    p = add("report", "full reproduction report on the bundled fixtures")
    p.add_argument("--panel", metavar="CSV")
    p.add_argument("--treated", metavar="UNIT")
    p.add_argument("--policy-year", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--mandate-scenario", metavar="INI")
    p.add_argument("--abolished-scenario", metavar="INI")
    return parser, subs


REQUIRED = {
    "ingest": ("input",),
    "classify": ("input",),
    "vcr": ("panel",),
    "proportionality": ("appointment_age", "mandatory_age", "extension"),
    "simulate": ("scenario",),
    "compare": ("scenario_a", "scenario_b"),
    "did": ("panel", "treated"),
    "event-study": ("panel", "treated"),
    "bootstrap": ("panel", "treated", "seed"),
    "synth": ("panel", "treated"),
    "report": (),
}


def _apply_config(sub: argparse.ArgumentParser, command: str, config: RunConfig) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help",)}
    defaults = {}
    for key, value in config.for_command(command).items():
        dest = key.replace("-", "_")
        if dest not in actions or dest in ("config",):
            raise UsageError(f"config [{command}] has unknown key {key!r}")
        action = actions[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = _to_bool(value)
        elif isinstance(action, argparse._AppendAction):
            defaults[dest] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config [{command}] {key}: {value!r} is not one of {list(action.choices)}")
            defaults[dest] = value
    sub.set_defaults(**defaults)


def _recordable(value) -> Optional[str]:
    if value is None:
        return None
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        sep = ":" if isinstance(value, tuple) else ","
        return sep.join(str(v) for v in value)
    return str(value)


def parse(argv: Sequence[str]) -> Tuple[argparse.Namespace, RunConfig]:
    parser, subs = build_parser()
    argv = list(argv)
    if not argv:
        raise UsageError("no command given", parser.format_usage())
    if argv[0] not in subs and not argv[0].startswith("-"):
        raise UsageError(f"unknown command {argv[0]!r}; choose from {', '.join(COMMANDS)}", parser.format_usage())
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("no command given", parser.format_usage())
    config = RunConfig()
    if args.config:
        config = RunConfig.load(args.config)
        _apply_config(subs[args.command], args.command, config)
        args = parser.parse_args(argv)
    missing = [d for d in REQUIRED[args.command] if getattr(args, d, None) is None]
    if missing:
        raise UsageError(f"{args.command}: missing " + ", ".join("--" + m.replace("_", "-") for m in missing),
                         subs[args.command].format_usage())
    params = {}
    for dest, value in vars(args).items():
        if dest in _COMMON or dest == "command":
            continue
        text = _recordable(value)
        if text is not None:
            params[dest] = text
    if args.command == "report":
        params = {**REPORT_DEFAULTS, **params}
    resolved = config.with_command(args.command, params)
    resolved.validate(args.command)
    return args, resolved


# --- helpers --------------------------------------------------------------------


def _open_input(reference: str, bundle: ReportBundle, newline: Optional[str] = ""):
    try:
        path = resolve_reference(reference)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    try:
        bundle.add_input(reference, path)
        return open(path, encoding="utf-8", newline=newline)
    except OSError as exc:
        raise DataError(f"cannot read {reference!r}: {exc.strerror}") from None


def _panel(args, bundle: ReportBundle) -> PanelDataset:
    with _open_input(args.panel, bundle) as fh:
        return ingest_panel(fh)


def _scenario(reference: str, bundle: ReportBundle) -> PolicyScenario:
    with _open_input(reference, bundle, newline=None) as fh:
        return load_scenario(fh)


def _spec(args, base_year: Optional[int] = None) -> DesignSpec:
    return DesignSpec(
        treated_unit=args.treated,
        policy_year=args.policy_year,
        base_year=base_year if base_year is not None else (args.base_year or args.policy_year),
        pre_window=args.pre_window,
        post_window=args.post_window,
        outcome=args.outcome,
        group=args.group,
    )


def _adjusted(data: PanelDataset, spec: DesignSpec, how: str, bundle: ReportBundle):
    if how == "none":
        return data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FirstStageWarning)
        if how == "detrend":
            res = detrend_pre(data, spec)
        else:
            res = student_adjust(data, spec, per_unit=(how == "student_per_unit"))
    for note in res.notes:
        bundle.log(f"note: {note}")
    return res.panel


def _stream_text(obj) -> str:
    buf = io.StringIO()
    obj.to_csv(buf)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return f"{v:.6g}"


# --- commands ---------------------------------------------------------------------


def cmd_ingest(args, bundle: ReportBundle) -> None:
    delim = {"comma": ",", "tab": "\t", None: None}[args.delimiter]
    with _open_input(args.input, bundle) as fh:
        data = ingest_panel(fh, _mapping(args.col), delim, args.default_group)
    bundle.tables["panel.csv"] = data.to_csv_text()
    bundle.log(f"{len(data.institutions)} institutions, years {data.years[0].label}-{data.years[-1].label}, "
               f"groups {', '.join(g.value for g in data.groups)}, {len(data)} cells")
    for key, note in sorted(data.provenance.items()):
        bundle.log(f"provenance {key}: {note}")


def cmd_classify(args, bundle: ReportBundle) -> None:
    delim = {"comma": ",", "tab": "\t", None: None}[args.delimiter]
    with _open_input(args.input, bundle) as fh:
        header, records = read_staff_records(fh, _mapping(args.col), delim)
    rows, counts = [], {}
    for _, raw, rec in records:
        g = classify_staff_record(rec).value
        counts[g] = counts.get(g, 0) + 1
        rows.append(list(raw) + [g])
    bundle.tables["classified.csv"] = csv_text(list(header) + ["group"], rows)
    order = ("EAC", "EAR", "Unclassified")
    bundle.tables["group_counts.csv"] = csv_text(["group", "records"], [[g, counts.get(g, 0)] for g in order])
    bundle.log(", ".join(f"{g} {counts.get(g, 0)}" for g in order) + f" ({len(records)} records)")


def cmd_vcr(args, bundle: ReportBundle) -> None:
    data = _panel(args, bundle)
    g = data.resolve_group(args.group)
    years = [int(y) for y in data.years]
    if args.years:
        years = [y for y in years if args.years[0] <= y <= args.years[1]]
        if not years:
            raise DataError(f"no panel years in {args.years[0]}:{args.years[1]}")
    rows, means = [], []
    for inst in data.institutions:
        rates = [job_creation_rate(data.cell(inst, y, g)) for y in years]
        rows += [[inst, y, g.value, r] for y, r in zip(years, rates)]
        means.append([inst, g.value, float(np.mean(rates))])
    bundle.tables["rates.csv"] = csv_text(["institution", "year", "group", "job_creation_rate"], rows)
    if args.treated:
        if args.treated not in data.institutions:
            raise DataError(f"treated unit {args.treated!r} not in panel")
        donors = [u for u in data.institutions if u != args.treated]
        t = group_mean_rate(data, [args.treated], years, g)
        d = group_mean_rate(data, donors, years, g)
        means += [["treated_mean", g.value, t], ["comparator_mean", g.value, d]]
        bundle.log(f"mean job creation rate {years[0]}-{years[-1]}: {args.treated} {_fmt(t)}, "
                   f"average of {len(donors)} comparators {_fmt(d)}")
    bundle.tables["means.csv"] = csv_text(["institution", "group", "mean_job_creation_rate"], means)
    bundle.log(f"{len(data.institutions)} institutions x {len(years)} years, group {g.value}")


def cmd_proportionality(args, bundle: ReportBundle) -> None:
    params = QueueParameters(args.appointment_age, args.mandatory_age, args.extension, args.other_share,
                             args.voluntary_share)
    res = vcr_uplift(params, args.mode)
    verdict = proportionality_verdict(res, args.band)
    bundle.tables["proportionality.csv"] = ladder_csv(params, res, verdict)
    bundle.log(summary_text(params, res, verdict, args.band))
    bundle.log(f"net_uplift {res.net_uplift:.4f}")


def _initial(sc: PolicyScenario, how: str) -> CohortState:
    return initialize_uniform(sc) if how == "uniform" else stationary_state(sc)


def cmd_simulate(args, bundle: ReportBundle) -> None:
    sc = _scenario(args.scenario, bundle)
    changes = None
    if (args.change_at is None) != (args.change_scenario is None):
        raise UsageError("--change-at and --change-scenario go together")
    if args.change_at is not None:
        if not 1 <= args.change_at <= args.years:
            raise UsageError(f"--change-at must lie in 1..{args.years}")
        changes = {args.change_at: _scenario(args.change_scenario, bundle)}
    trace = run(sc, args.years, _initial(sc, args.initial), changes=changes)
    window = args.window or (max(1, args.years - 29), args.years)
    sim = summarize_window(trace, window)
    final = changes[args.change_at] if changes else sc
    ana = steady_state(final)
    bundle.tables["trace.csv"] = _stream_text(trace)
    bundle.tables["summary.csv"] = csv_text(
        ["quantity", "simulated", "analytic"],
        [["vcr", sim.vcr, ana.vcr], ["mean_residence", sim.mean_career_length, ana.mean_career_length],
         ["littles_residual", sim.littles_residual, ana.littles_residual]])
    x = trace.column("year_index")
    bundle.figures["trace.svg"] = line_chart(
        {"hires": (x, trace.column("hires")), "mandatory exits": (x, trace.column("mandatory")),
         "voluntary exits": (x, trace.column("voluntary"))},
        title=f"Cohort queue: {sc.name or 'scenario'}", xlabel="simulated year", ylabel="people per year",
        vline=args.change_at)
    bundle.log(f"window {window[0]}-{window[1]}: simulated VCR {_fmt(sim.vcr)}, analytic {_fmt(ana.vcr)}, "
               f"Little's-law residual {sim.littles_residual:.2e}")


def cmd_compare(args, bundle: ReportBundle) -> None:
    a = _scenario(args.scenario_a, bundle)
    b = _scenario(args.scenario_b, bundle)
    cmp = compare_scenarios(a, b, args.years)
    bundle.tables["compare.csv"] = _stream_text(cmp)
    bundle.tables["decades.csv"] = csv_text(
        ["decade", "first_year", "last_year", "mean_difference"],
        [[k + 1, 10 * k + 1, min(10 * k + 10, args.years), m] for k, m in enumerate(cmp.decade_means)])
    bundle.tables["steady_state.csv"] = csv_text(
        ["scenario", "vcr", "mean_residence", "hires"],
        [[a.name or "a", cmp.steady_state_a.vcr, cmp.steady_state_a.mean_career_length, cmp.steady_state_hires_a],
         [b.name or "b", cmp.steady_state_b.vcr, cmp.steady_state_b.mean_career_length, cmp.steady_state_hires_b]])
    bundle.figures["compare.svg"] = line_chart(
        {a.name or "a": (cmp.year_index, cmp.vacancies_a), b.name or "b": (cmp.year_index, cmp.vacancies_b)},
        title="Vacancies per year", xlabel="simulated year", ylabel="vacancies")
    bundle.log("decade mean differences (a - b): " + ", ".join(_fmt(m) for m in cmp.decade_means))
    bundle.log(f"steady-state hires difference {_fmt(cmp.steady_state_delta)}")


def cmd_did(args, bundle: ReportBundle) -> None:
    data = _panel(args, bundle)
    spec = _spec(args)
    panel = _adjusted(data, spec, args.adjust, bundle)
    fit = fit_twfe_did(panel, spec, args.se_kind)
    rows = [["delta", fit.delta], ["se", fit.se_delta], ["t", fit.t_stat], ["p_normal", fit.p_value],
            ["did_of_means", did_of_means(panel, spec)], ["n_obs", fit.n_obs]]
    rows += [[f"se_{k}", v] for k, v in fit.se_all.items()]
    bundle.tables["did.csv"] = csv_text(["statistic", "value"], rows)
    eff = [["unit", u, v] for u, v in fit.unit_effects.items()] + [["year", y, v] for y, v in fit.time_effects.items()]
    bundle.tables["effects.csv"] = csv_text(["kind", "key", "effect"], eff)
    bundle.log(f"delta {fit.delta!r}")
    bundle.log(f"se ({fit.se_kind}) {_fmt(fit.se_delta)}, p {_fmt(fit.p_value)}, n {fit.n_obs}, "
               f"adjustment {args.adjust}")


def cmd_event_study(args, bundle: ReportBundle) -> None:
    data = _panel(args, bundle)
    spec = _spec(args)
    panel = _adjusted(data, spec, args.adjust, bundle)
    es = event_study(panel, spec, args.mode, args.se_kind, args.level)
    bundle.tables["event_study.csv"] = _stream_text(es)
    bundle.figures["event_study.svg"] = line_chart(
        {"estimate": (es.years, es.estimates)}, band=(es.years, es.lower, es.upper),
        title=f"Event study ({es.mode}, base {es.base_year})", xlabel="academic year (start)",
        ylabel=spec.outcome, hline=0.0, vline=spec.policy_year)
    for y, v in es.as_dict().items():
        bundle.log(f"{y} {v!r}")
    for note in es.notes:
        bundle.log(f"note: {note}")


def cmd_bootstrap(args, bundle: ReportBundle) -> None:
    data = _panel(args, bundle)
    spec = _spec(args)
    panel = _adjusted(data, spec, args.adjust, bundle)
    res = wild_cluster_bootstrap(panel, spec, args.replications, args.seed, cluster=not args.observation_level,
                                 n_jobs=args.jobs)
    bundle.seed = args.seed
    bundle.tables["bootstrap.csv"] = csv_text(
        ["statistic", "value"],
        [["delta", res.delta], ["p_value", res.p_value], ["replications", res.replications], ["seed", res.seed],
         ["weights", res.weight_scheme], ["level", "cluster" if res.cluster else "observation"]])
    bundle.tables["replicates.csv"] = _stream_text(res)
    bundle.log(f"delta {res.delta!r}, bootstrap p {res.p_value!r} ({res.replications} replications)")
    for note in res.notes:
        bundle.log(f"note: {note}")


def cmd_synth(args, bundle: ReportBundle) -> None:
    data = _panel(args, bundle)
    spec = _spec(args)
    panel = _adjusted(data, spec, args.adjust, bundle)
    res = synthetic_control(panel, spec, args.tol, args.max_iter)
    bundle.tables["synth.csv"] = _stream_text(res)
    years = np.array(list(res.gap_series))
    bundle.figures["synth_gap.svg"] = line_chart(
        {"treated minus synthetic": (years, np.array(list(res.gap_series.values())))},
        title="Synthetic control gap", xlabel="academic year (start)", ylabel=spec.outcome, hline=0.0,
        vline=spec.policy_year)
    top = sorted(res.weights.items(), key=lambda kv: -kv[1])
    bundle.log("weights: " + ", ".join(f"{u} {w:.4f}" for u, w in top if w > 1e-6))
    bundle.log(f"pre-period RMSE {_fmt(res.pre_fit_rmse)}; converged {res.converged} after {res.iterations} iterations")
    if not res.converged:
        raise NumericalError(f"synthetic control did not converge in {res.iterations} iterations")


def cmd_report(args, bundle: ReportBundle) -> ReportBundle:
    config = bundle.config
    out = emit_reproduction_report(config)
    out.logs = list(bundle.logs) + out.logs
    return out


HANDLERS: Dict[str, Callable] = {
    "ingest": cmd_ingest, "classify": cmd_classify, "vcr": cmd_vcr, "proportionality": cmd_proportionality,
    "simulate": cmd_simulate, "compare": cmd_compare, "did": cmd_did, "event-study": cmd_event_study,
    "bootstrap": cmd_bootstrap, "synth": cmd_synth, "report": cmd_report,
}


def output_dir(args) -> str:
    if args.out:
        return args.out
    root = os.environ.get(ENV_OUT) or DEFAULT_OUT
    return os.path.join(root, args.command)


def _error_line(exc: BaseException, status: int, kind: str) -> str:
    message = " ".join(str(exc.args[0] if exc.args else exc).split())
    return json.dumps({"error": kind, "type": type(exc).__name__, "exit": status, "message": message})


def run_command(argv: Sequence[str], stdout=None, stderr=None) -> Tuple[int, Optional[ReportBundle]]:
    """Parse ``argv``, run the command, write its bundle; returns (status, bundle)."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        try:
            args, config = parse(argv)
        except SystemExit as exc:  # --help / --version
            return int(exc.code or 0), None
        bundle = ReportBundle(args.command, config)
        result = HANDLERS[args.command](args, bundle)
        bundle = result if isinstance(result, ReportBundle) else bundle
        directory = output_dir(args)
        try:
            bundle.write(directory)
        except OSError as exc:
            raise DataError(f"cannot write to {directory!r}: {exc.strerror}") from None
        if not args.quiet:
            for line in bundle.logs:
                print(line, file=stdout)
            print(f"wrote {len(bundle.files()) + 1} files to {directory}", file=stdout)
        return 0, bundle
    except UsageError as exc:
        if len(exc.args) > 1 and exc.args[1]:
            stderr.write(exc.args[1])
        print(_error_line(exc, exc.exit_code, exc.kind), file=stderr)
        return exc.exit_code, None
    except ToolkitError as exc:
        print(_error_line(exc, exc.exit_code, exc.kind), file=stderr)
        return exc.exit_code, None
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(_error_line(exc, NumericalError.exit_code, NumericalError.kind), file=stderr)
        return NumericalError.exit_code, None
    except (ValueError, OSError) as exc:
        print(_error_line(exc, DataError.exit_code, DataError.kind), file=stderr)
        return DataError.exit_code, None
    except Exception as exc:  # pragma: no cover - a bug, still reported on one line
        print(_error_line(exc, 1, "InternalError"), file=stderr)
        return 1, None


def main(argv: Optional[Sequence[str]] = None) -> int:
    status, _ = run_command(sys.argv[1:] if argv is None else argv)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
