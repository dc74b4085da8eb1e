"""Evaluation quantities computed from traces.

Everything here is a pure function of one or more Traces, so a report
recomputed from saved trace files is identical to the one produced right
after simulation. The operating link is logged only when it changes; a
sample holds until the next link event, which gives one value per slot.
"""

import bisect
import math
from collections import namedtuple

import numpy as np
from scipy import stats

import terra.baselines as baselines
import terra.trace as trace
from terra.actions import SERVING
from terra.errors import ConfigError, DomainError

DEFAULT_FLOOR = -70.0
DEFAULT_MARGIN = 6.0
ORACLE_MARGIN = 3.0


def _traces(traces):
    if isinstance(traces, trace.Trace):
        return [traces]
    return list(traces)


def _slot_of(tr, t):
    return int(round(t / tr.header["slot"]))


class LinkSeries:
    """The operating-link rss of one trace as a step function of slots."""

    def __init__(self, tr):
        """Collect the link events of `tr`."""
        self.starts = []
        self.values = []
        for e in tr.of_kind(trace.MEASUREMENT, trace.LINK):
            n = _slot_of(tr, e.t)
            if self.starts and self.starts[-1] == n:
                self.values[-1] = e.payload["rss"]
            else:
                self.starts.append(n)
                self.values.append(e.payload["rss"])
        self.floor = tr.header.get("noise_floor", -math.inf)

    def at(self, n):
        """Return the rss held at slot n."""
        i = bisect.bisect_right(self.starts, n) - 1
        return self.values[i] if i >= 0 else self.floor

    def between(self, a, b):
        """Return a numpy array with the rss of every slot in [a, b)."""
        out = np.empty(max(b - a, 0))
        i = bisect.bisect_right(self.starts, a) - 1
        n = a
        while n < b:
            value = self.values[i] if i >= 0 else self.floor
            nxt = self.starts[i + 1] if i + 1 < len(self.starts) else b
            end = min(max(nxt, n + 1), b)
            out[n - a:end - a] = value
            n = end
            i += 1
        return out


def blockage_intervals(tr):
    """Return the blockages of `tr` as [start, end) slot pairs."""
    spans = tr.intervals(trace.BLOCKAGE_START, (trace.BLOCKAGE_END,),
                         tr.header.get("horizon"))
    return [(_slot_of(tr, a), _slot_of(tr, b)) for a, b in spans]


BlockageSamples = namedtuple("BlockageSamples",
                             ["values", "reference", "event"])


def blockage_samples(traces):
    """Return the link rss of every blocked slot across `traces`.

    Also returns, per slot, the rss just before the blockage began and the
    index of the blockage event it belongs to.
    """
    values, refs, events = [], [], []
    index = 0
    for tr in _traces(traces):
        series = LinkSeries(tr)
        for a, b in blockage_intervals(tr):
            if b <= a:
                continue
            chunk = series.between(a, b)
            values.append(chunk)
            refs.append(np.full(len(chunk), series.at(a - 1)))
            events.append(np.full(len(chunk), index))
            index += 1
    if not values:
        return None
    return BlockageSamples(np.concatenate(values), np.concatenate(refs),
                           np.concatenate(events))


def outage_fraction(traces, floor=DEFAULT_FLOOR):
    """Return the fraction of blocked slots with link rss at or below floor.

    Returns None when the traces contain no blockage.
    """
    samples = blockage_samples(traces)
    if samples is None:
        return None
    return float(np.mean(samples.values <= floor))


BlockageReport = namedtuple(
    "BlockageReport",
    ["events", "outage_fraction", "gr_availability", "gr_quality",
     "within_margin_fraction"])
BlockageReport.__doc__ = """Blockage performance split in two factors.

gr_availability (float) - Share of blockages with no slot at or below the
floor.
gr_quality (float) - Among blocked slots above the floor, the share within
the margin of the pre-blockage rss.
within_margin_fraction (float) - Share of all blocked slots above the floor
and within the margin; the combined figure.
"""


def blockage_report(traces, floor=DEFAULT_FLOOR, margin=DEFAULT_MARGIN):
    """Return a BlockageReport, or None without blockages."""
    samples = blockage_samples(traces)
    if samples is None:
        return None
    values, refs, events = samples
    above = values > floor
    within = above & (values >= refs - margin)
    n_events = int(events.max()) + 1
    failed = np.bincount(events[~above].astype(np.int64),
                         minlength=n_events) > 0
    quality = float(np.mean(within[above])) if above.any() else 0.0
    return BlockageReport(n_events, float(np.mean(~above)),
                          float(np.mean(~failed)), quality,
                          float(np.mean(within)))


def within_6db_fraction(traces, margin=DEFAULT_MARGIN, floor=DEFAULT_FLOOR):
    """Return the share of blocked slots within `margin` of normal rss."""
    report = blockage_report(traces, floor, margin)
    return None if report is None else report.within_margin_fraction


def oracle_pairs(traces, link=SERVING):
    """Return (oracle, achieved) arrays from the oracle sweeps of `link`."""
    oracle, achieved = [], []
    for tr in _traces(traces):
        for e in tr.of_kind(trace.MEASUREMENT, trace.ORACLE):
            if e.payload.get("link") == link:
                oracle.append(e.payload["oracle"])
                achieved.append(e.payload["rss"])
    return np.array(oracle), np.array(achieved)


def rms_loss_vs_oracle(traces, link=SERVING):
    """Return the RMS of (oracle rss - achieved rss) in dB."""
    oracle, achieved = oracle_pairs(traces, link)
    if not len(oracle):
        raise ConfigError(f"trace has no oracle sweeps of the {link} link")
    return float(np.sqrt(np.mean((oracle - achieved) ** 2)))


def time_within_3db_of_oracle(traces, link=SERVING, margin=ORACLE_MARGIN):
    """Return the seconds during which achieved rss was within 3 dB."""
    total = 0.0
    for tr in _traces(traces):
        stride = tr.header.get("oracle_stride", 0) * tr.header["period"]
        oracle, achieved = oracle_pairs(tr, link)
        total += float(np.sum(oracle - achieved <= margin)) * stride
    return total


RunsTestResult = namedtuple("RunsTestResult",
                            ["z", "p", "reject_at_95", "applicable"])


def runs_test(deltas):
    """Wald-Wolfowitz runs test on the signs of `deltas`.

    Zero deltas are dropped. The test does not apply to fewer than two
    signs or to a single sign; it then returns applicable=False.
    """
    signs = np.sign(np.asarray(deltas, dtype=float))
    signs = signs[signs != 0]
    n = len(signs)
    n1 = int(np.sum(signs > 0))
    n2 = n - n1
    if n < 2 or n1 == 0 or n2 == 0:
        return RunsTestResult(None, None, False, False)

    runs = 1 + int(np.sum(signs[1:] != signs[:-1]))
    mean = 2.0 * n1 * n2 / n + 1
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1))
    if var <= 0:
        return RunsTestResult(None, None, False, False)
    z = (runs - mean) / math.sqrt(var)
    p = float(2 * stats.norm.sf(abs(z)))
    return RunsTestResult(z, p, abs(z) > 1.96, True)


def scan_counts(traces, purpose="initial_access"):
    """Return the dwell count of the first scan of `purpose` per trace."""
    counts = []
    for tr in _traces(traces):
        for e in tr.of_kind(trace.MEASUREMENT, trace.SCAN):
            if e.payload.get("purpose") == purpose:
                counts.append(e.payload["dwells"])
                break
    return counts


def search_count_stats(traces, purpose="initial_access"):
    """Return (median, standard deviation) of scan dwell counts."""
    counts = scan_counts(traces, purpose)
    if not counts:
        return None
    return float(np.median(counts)), float(np.std(counts))


KsResult = namedtuple("KsResult", ["statistic", "p"])


def ks_uniform(counts, n):
    """Kolmogorov-Smirnov test of `counts` against uniform on {1..n}.

    Both distribution functions are compared at the support points only,
    which is the right statistic for discrete data; the p-value from the
    continuous null distribution is conservative.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if not len(counts):
        raise DomainError("no counts to test")
    if counts.min() < 1 or counts.max() > n:
        return KsResult(1.0, 0.0)
    ecdf = np.cumsum(np.bincount(counts, minlength=n + 1)[1:]) / len(counts)
    model = np.arange(1, n + 1) / n
    d = float(np.max(np.abs(ecdf - model)))
    return KsResult(d, float(stats.kstwo.sf(d, len(counts))))


def cdf(samples):
    """Return the empirical CDF of `samples` as (value, cum_prob) steps."""
    samples = np.asarray(samples, dtype=float)
    if not len(samples):
        raise DomainError("cannot take the CDF of no samples")
    values, counts = np.unique(samples, return_counts=True)
    cum = np.cumsum(counts) / len(samples)
    return [(float(v), float(p)) for v, p in zip(values, cum)]


def beam_deltas(tr, link=SERVING, axis="az"):
    """Return grid-index differences between successive beams of `link`.

    axis selects the grid column ("az") or row ("zen") index.
    """
    n_zen, n_az = tr.header["rx_grid"]
    beams = [e.payload["to"] for e in tr.of_kind(trace.BEAM_SWITCH)
             if e.payload.get("link") == link and e.payload["to"] is not None]
    coords = [divmod(b, n_az) for b in beams]
    index = [c[1] if axis == "az" else c[0] for c in coords]
    return [b - a for a, b in zip(index, index[1:])]


MetricReport = namedtuple(
    "MetricReport",
    ["runs", "outage_fraction", "within_6db_fraction", "gr_availability",
     "gr_quality", "blockage_events", "rms_loss_vs_oracle",
     "time_within_3db_of_oracle", "search_count_stats",
     "max_adaptation_probes", "runs_test", "cdf_points"])


def metric_report(traces, floor=DEFAULT_FLOOR, margin=DEFAULT_MARGIN,
                  link=SERVING, purpose="initial_access"):
    """Return the MetricReport of a batch of traces.

    Metrics a trace cannot support (no blockage, no oracle sweeps, no
    scans) are None.
    """
    traces = _traces(traces)
    blockage = blockage_report(traces, floor, margin)
    samples = blockage_samples(traces)

    oracle, _ = oracle_pairs(traces, link)
    rms = rms_loss_vs_oracle(traces, link) if len(oracle) else None
    within_3 = time_within_3db_of_oracle(traces, link) if len(oracle) \
        else None

    counts = baselines.adaptation_probe_counts(traces)
    deltas = []
    for tr in traces:
        deltas.extend(beam_deltas(tr))
    runs = runs_test(deltas)

    return MetricReport(
        runs=len(traces),
        outage_fraction=blockage.outage_fraction if blockage else None,
        within_6db_fraction=(blockage.within_margin_fraction if blockage
                             else None),
        gr_availability=blockage.gr_availability if blockage else None,
        gr_quality=blockage.gr_quality if blockage else None,
        blockage_events=blockage.events if blockage else 0,
        rms_loss_vs_oracle=rms,
        time_within_3db_of_oracle=within_3,
        search_count_stats=search_count_stats(traces, purpose),
        max_adaptation_probes=max(counts) if counts else None,
        runs_test=runs._asdict() if runs.applicable else None,
        cdf_points=cdf(samples.values) if samples is not None else None)


def report_dict(report):
    """Return the report as a JSON-ready dict."""
    out = report._asdict()
    if out["search_count_stats"] is not None:
        median, std = out["search_count_stats"]
        out["search_count_stats"] = {"median": median, "std": std}
    return out
