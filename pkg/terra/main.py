"""Main executable for the TERRA simulator."""

import argparse
import concurrent.futures
import csv
import io
import json
import os
import pathlib
import sys

import numpy as np

import terra.analysis as analysis
import terra.array as array
import terra.baselines as baselines
import terra.deployment as deployment
import terra.mobility as mobility
import terra.protocol as protocol
import terra.sweep as sweep
import terra.trace as trace
from terra.errors import error_collector, ConfigError, SimError
from terra.scenario import ANALYSIS_DEFAULTS, ARRAY_DEFAULTS, load_scenario

JOBS_VARIABLE = "TERRA_SIM_JOBS"


def main(argv=None):
    """Run the terra command line and return its exit status."""
    arguments = get_arguments(argv)
    try:
        arguments.command(arguments)
    except SimError as e:
        error_collector.add(e)

    error_collector.show(warnings=not arguments.quiet)
    return 0 if error_collector.ok() else 1


def run_one(scenario):
    """Simulate one seeded scenario; return (Trace, warning texts).

    Warnings are collected apart from the caller's, so that worker
    processes and inline runs report them the same way.
    """
    saved = error_collector.issues
    error_collector.issues = []
    try:
        result = sweep.run(scenario)
        return result, error_collector.warnings()
    finally:
        error_collector.issues = saved


def simulate_batch(scenario, runs, seed_base, jobs=1):
    """Return the Traces of `runs` runs seeded seed_base, seed_base+1, ...

    Runs go to a process pool when jobs > 1; traces come back in run order
    either way.
    """
    seeded = [sweep.with_seed(scenario, seed_base + i) for i in range(runs)]
    if jobs > 1 and runs > 1:
        with concurrent.futures.ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(run_one, seeded))
    else:
        results = [run_one(s) for s in seeded]

    warned = {}
    for _, warnings in results:
        for text in warnings:
            warned.setdefault(text, None)
    for text in warned:
        error_collector.add(SimError(text, warning=True))
    return [tr for tr, _ in results]


def _overhead_strategies(codebook):
    try:
        baselines.hierarchy_levels(codebook)
    except ConfigError:
        return ("terra", "exhaustive")
    return ("terra", "exhaustive", "hierarchical")


def make_report(traces, settings, codebook=None):
    """Return the JSON-ready report of `traces`.

    settings (dict) - The analysis section of a scenario file.
    codebook (Codebook) - Mobile codebook; adds the tracking overhead table.
    """
    report = analysis.metric_report(traces, settings["floor"],
                                    settings["margin"], settings["link"],
                                    settings["search_purpose"])
    out = analysis.report_dict(report)
    out["scenario"] = traces[0].header.get("scenario")
    out["seeds"] = [tr.header.get("seed") for tr in traces]
    if codebook is not None:
        rows = baselines.tracking_overhead_report(
            traces, codebook, _overhead_strategies(codebook))
        out["tracking_overhead"] = [row._asdict() for row in rows]
    return out


def _dump(payload):
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except IOError:
        raise ConfigError(f"could not write output file '{path}'")


def _csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _emit(path, text):
    if path:
        _write_text(path, text)
    else:
        sys.stdout.write(text)


def _jobs_default():
    value = os.environ.get(JOBS_VARIABLE)
    if not value:
        return 1
    try:
        jobs = int(value)
    except ValueError:
        raise ConfigError(f"{JOBS_VARIABLE} must be an integer, "
                          f"got '{value}'")
    if jobs < 1:
        raise ConfigError(f"{JOBS_VARIABLE} must be at least 1")
    return jobs


def cmd_simulate(args):
    """Simulate a scenario file; write traces and the report."""
    parsed = load_scenario(args.scenario, args.horizon)
    if parsed.scenario is None:
        raise ConfigError(f"'{args.scenario}' has no simulation sections")
    scenario = parsed.scenario

    runs = args.runs if args.runs is not None else parsed.analysis["runs"]
    if runs < 1:
        raise ConfigError("need at least one run")
    seed_base = args.seed_base if args.seed_base is not None \
        else scenario.seed
    jobs = args.jobs if args.jobs is not None else _jobs_default()

    traces = simulate_batch(scenario, runs, seed_base, jobs)
    _, codebook = scenario.mobile
    report = make_report(traces, parsed.analysis, codebook)

    if args.out:
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for i, tr in enumerate(traces):
            tr.write(out / f"run_{i:04d}.trace.jsonl")
        _write_text(out / "report.json", _dump(report))
        if args.trajectory:
            model, _ = scenario.mobile
            model = model._replace(seed=seed_base)
            times = np.arange(0.0, scenario.horizon, args.trajectory)
            rows = mobility.trajectory_rows(model, times)
            _write_text(out / "trajectory.csv",
                        _csv_text(("t", "x", "y", "boresight_az"), rows))
    else:
        sys.stdout.write(_dump(report))


def cmd_analyze(args):
    """Recompute the report of saved traces."""
    settings = dict(ANALYSIS_DEFAULTS)
    codebook = None
    if args.scenario:
        parsed = load_scenario(args.scenario)
        settings.update(parsed.analysis)
        if parsed.scenario is not None:
            codebook = parsed.scenario.mobile[1]
    for key in ("floor", "margin", "link"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)

    if args.overhead and codebook is None:
        raise ConfigError("--overhead needs a --scenario with a mobile "
                          "codebook")

    traces = [trace.read_trace(path) for path in args.traces]
    report = make_report(traces, settings, codebook)
    _emit(args.out, _dump(report))

    if args.overhead:
        rows = [(row["strategy"], row["max_measurements"], row["source"])
                for row in report["tracking_overhead"]]
        _write_text(args.overhead,
                    _csv_text(("strategy", "max_measurements", "source"),
                              rows))

    if args.cdf:
        samples = analysis.blockage_samples(traces)
        if samples is None:
            error_collector.add(SimError("traces contain no blockage, no "
                                         "CDF written", warning=True))
        else:
            rows = analysis.cdf(samples.values)
            _write_text(args.cdf, _csv_text(("rss_dbm", "cum_prob"), rows))


def cmd_density(args):
    """Emit the deployment density table as CSV."""
    ranges = args.range_list
    query = deployment.DensityQuery(ranges[0], args.target_prob, args.k,
                                    args.grid)
    monte_carlo = args.monte_carlo
    if args.scenario:
        parsed = load_scenario(args.scenario)
        if parsed.density is None:
            raise ConfigError(f"'{args.scenario}' has no density section")
        ranges = parsed.density.ranges
        query = parsed.density.query
        monte_carlo = parsed.density.monte_carlo or monte_carlo

    rows = deployment.density_table(ranges, query)
    header = ["R_m", "lambda_per_km2", "prob"]
    if monte_carlo:
        header.append("mc_prob")
    lines = deployment.table_rows(rows, query.k, monte_carlo, args.seed)
    text = _csv_text(header, lines)
    if args.annotate:
        notes = [f"# unverified: {note} (model: "
                 f"{deployment.VISIBILITY_MODEL})\n"
                 for _, _, note in deployment.UNVERIFIED_ANNOTATIONS]
        text += "".join(notes)
    _emit(args.out, text)


def _requested_codebook(args):
    if args.scenario:
        parsed = load_scenario(args.scenario)
        if parsed.scenario is None:
            raise ConfigError(f"'{args.scenario}' has no codebooks")
        if args.station is None:
            return parsed.scenario.mobile[1]
        for station in parsed.scenario.stations:
            if station.id == args.station:
                return station.codebook
        raise ConfigError(f"no station '{args.station}' in "
                          f"'{args.scenario}'")

    kind = array.PLANAR if args.elements[1] > 1 else array.LINEAR
    geometry = array.ArrayGeometry(kind, args.elements[0], args.elements[1],
                                   carrier=args.carrier)
    return array.make_codebook(geometry, tuple(args.sector_az),
                               tuple(args.sector_zen), args.grid[0],
                               args.grid[1])


def cmd_codebook(args):
    """Emit a codebook, or the patterns of its beams, as CSV."""
    book = _requested_codebook(args)
    if args.pattern:
        angles = np.arange(-90.0, 90.0 + args.step / 2, args.step)
        rows = array.pattern_rows(book, range(len(book)), angles,
                                  args.axis)
        text = _csv_text(("beam_id", "angle_deg", "gain_db"), rows)
    else:
        rows = []
        for row in array.codebook_rows(book):
            widths = [array.half_power_beamwidth(book, row[0], axis)
                      for axis in ("az", "zen")]
            rows.append(row + tuple("" if w is None else w for w in widths))
        text = _csv_text(("beam_id", "row", "col", "steer_az_deg",
                          "steer_zen_deg", "hpbw_az_deg", "hpbw_zen_deg"),
                         rows)
    _emit(args.out, text)


def cmd_states(args):
    """Emit the protocol's transition graph as DOT."""
    _emit(args.out, protocol.transition_graph_dot())


def _probability(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return value


def get_arguments(argv=None):
    """Get the command-line arguments.

    Returns the parsed namespace; its `command` attribute is the function
    that carries out the chosen subcommand.
    """
    desc = """Simulate and evaluate beam management for a millimeter-wave
    mobile link."""
    parser = argparse.ArgumentParser(prog="terra", description=desc)
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="do not print warnings")
    sub = parser.add_subparsers(dest="name", metavar="command")
    sub.required = True

    sim = sub.add_parser("simulate", help="run a scenario file")
    sim.add_argument("scenario")
    sim.add_argument("--out", help="directory for traces and report.json")
    sim.add_argument("--runs", type=int,
                     help="number of seeded runs (default from scenario)")
    sim.add_argument("--seed-base", type=int,
                     help="seed of the first run (default from scenario)")
    sim.add_argument("--jobs", type=_positive_int,
                     help=f"parallel runs (default ${JOBS_VARIABLE} or 1)")
    sim.add_argument("--horizon", type=float,
                     help="override the simulated duration, seconds")
    sim.add_argument("--trajectory", type=float, metavar="STEP",
                     help="also write the first run's trajectory sampled "
                          "every STEP seconds")
    sim.set_defaults(command=cmd_simulate)

    ana = sub.add_parser("analyze", help="recompute the report of traces")
    ana.add_argument("traces", nargs="+")
    ana.add_argument("--scenario",
                     help="scenario file supplying analysis settings")
    ana.add_argument("--floor", type=float)
    ana.add_argument("--margin", type=float)
    ana.add_argument("--link", choices=("serving", "neighbor"))
    ana.add_argument("--out", help="report file (default stdout)")
    ana.add_argument("--cdf", help="write the blocked-rss CDF to this CSV")
    ana.add_argument("--overhead",
                     help="write the tracking-overhead table to this CSV")
    ana.set_defaults(command=cmd_analyze)

    den = sub.add_parser("density", help="deployment density table")
    den.add_argument("--range-list", type=float, nargs="+",
                     default=[100.0, 200.0, 300.0, 400.0, 500.0],
                     metavar="R")
    den.add_argument("--target-prob", type=_probability, default=0.9)
    den.add_argument("--k", type=_positive_int, default=2)
    den.add_argument("--grid", type=float, nargs="+", metavar="LAMBDA",
                     help="densities per km^2 to sample")
    den.add_argument("--monte-carlo", type=int, default=0, metavar="N",
                     help="add a sampled column with N samples per point")
    den.add_argument("--seed", type=int, default=0)
    den.add_argument("--scenario", help="density scenario file")
    den.add_argument("--annotate", action="store_true",
                     help="append published figures as comment lines")
    den.add_argument("--out", help="CSV file (default stdout)")
    den.set_defaults(command=cmd_density)

    cb = sub.add_parser("codebook", help="export a codebook or its patterns")
    cb.add_argument("--scenario", help="take the codebook from a scenario")
    cb.add_argument("--station", help="station id (default: the mobile)")
    cb.add_argument("--elements", type=int, nargs=2, default=[12, 1],
                    metavar=("NX", "NY"))
    cb.add_argument("--grid", type=int, nargs=2, default=[25, 1],
                    metavar=("N_AZ", "N_ZEN"))
    cb.add_argument("--sector-az", type=float, nargs=2,
                    default=list(ARRAY_DEFAULTS["sector_az"]),
                    metavar=("START", "END"))
    cb.add_argument("--sector-zen", type=float, nargs=2,
                    default=list(ARRAY_DEFAULTS["sector_zen"]),
                    metavar=("START", "END"))
    cb.add_argument("--carrier", type=float, default=60e9)
    cb.add_argument("--pattern", action="store_true",
                    help="emit gain cuts instead of the beam list")
    cb.add_argument("--axis", choices=("az", "zen"), default="az")
    cb.add_argument("--step", type=float, default=1.0,
                    help="angle step of the pattern cuts, degrees")
    cb.add_argument("--out", help="CSV file (default stdout)")
    cb.set_defaults(command=cmd_codebook)

    st = sub.add_parser("states", help="export the transition graph")
    st.add_argument("--out", help="DOT file (default stdout)")
    st.set_defaults(command=cmd_states)

    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
