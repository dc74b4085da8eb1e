"""Reference beam-alignment strategies.

Each strategy gets a probe function (a set of leaf beam ids -> rss, where a
set of more than one beam stands for the wide beam covering them) and
reports how many measurements it needed.
"""

from collections import namedtuple

import numpy as np

import terra.trace as trace
from terra.errors import ConfigError

SIMULATED = "simulated"
REPORTED = "reported"

# Maximum measurements per alignment published for schemes that are not
# simulated here.
REPORTED_OVERHEAD = (
    ("HBA", 63),
    ("FALP", 70),
    ("Agile Link", 110),
)


AlignmentResult = namedtuple("AlignmentResult",
                             ["beam", "measurements", "rss"])


def oracle_best(probe, codebook):
    """Probe every beam once and return the strongest.

    Ties go to the lowest beam id.
    """
    values = np.array([probe((b,)) for b in range(len(codebook))])
    best = int(np.argmax(values))
    return AlignmentResult(best, len(codebook), float(values[best]))


def _power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


def hierarchy_levels(codebook):
    """Return the number of descent levels of `codebook`.

    Each level halves every axis that still spans more than one beam, so a
    grid needs power-of-two sides.
    """
    if not (_power_of_two(codebook.n_az) and _power_of_two(codebook.n_zen)):
        raise ConfigError(f"hierarchical search needs power-of-two grid "
                          f"sides, got {codebook.n_zen}x{codebook.n_az}")
    return max(codebook.n_az, codebook.n_zen).bit_length() - 1


def hierarchy_measurements(codebook):
    """Return the number of probes of a full hierarchical descent."""
    if hierarchy_levels(codebook) == 0:
        return 1
    rows, cols = codebook.n_zen, codebook.n_az
    count = 0
    while rows > 1 or cols > 1:
        count += (2 if rows > 1 else 1) * (2 if cols > 1 else 1)
        rows = max(rows // 2, 1)
        cols = max(cols // 2, 1)
    return count


def _split(lo, hi):
    if hi - lo <= 1:
        return [(lo, hi)]
    mid = (lo + hi) // 2
    return [(lo, mid), (mid, hi)]


def hierarchical_search(probe, codebook):
    """Return the leaf found by descending a tree of widening beams.

    Wide beams are the gain envelope of the leaves under them. At each
    level the 2 (one-axis) or 4 (planar) children of the current winner are
    probed and the best one is kept; ties go to the child listed first.
    """
    levels = hierarchy_levels(codebook)
    if levels == 0:
        return AlignmentResult(0, 1, float(probe((0,))))

    rows = (0, codebook.n_zen)
    cols = (0, codebook.n_az)
    measurements = 0
    best = None
    for _ in range(levels):
        children = [(r, c) for r in _split(*rows) for c in _split(*cols)]
        best = None
        for r, c in children:
            leaves = tuple(codebook.beam_at(i, j)
                           for i in range(*r) for j in range(*c))
            value = float(probe(leaves))
            measurements += 1
            if best is None or value > best[0]:
                best = (value, r, c)
        _, rows, cols = best
    leaf = codebook.beam_at(rows[0], cols[0])
    return AlignmentResult(leaf, measurements, best[0])


def adaptation_probe_counts(traces):
    """Return the probe counts of every adaptation event in `traces`."""
    counts = []
    for tr in traces:
        for e in tr.of_kind(trace.MEASUREMENT, trace.PROBE):
            if e.payload.get("purpose") in ("los_adapt", "neighbor_adapt"):
                counts.append(e.payload["count"])
    return counts


OverheadRow = namedtuple("OverheadRow",
                         ["strategy", "max_measurements", "source"])


def tracking_overhead_report(traces, codebook,
                             strategies=("terra", "exhaustive",
                                         "hierarchical")):
    """Return OverheadRows of the maximum measurements per adaptation.

    The TERRA row comes from the adaptation probes in `traces`, the others
    from the structure of `codebook`. Published figures for schemes not
    simulated here follow as "reported" rows.
    """
    rows = []
    for strategy in strategies:
        if strategy == "terra":
            counts = adaptation_probe_counts(traces)
            rows.append(OverheadRow("TERRA", max(counts, default=0),
                                    SIMULATED))
        elif strategy == "exhaustive":
            rows.append(OverheadRow("Exhaustive Search", len(codebook),
                                    SIMULATED))
        elif strategy == "hierarchical":
            rows.append(OverheadRow("Hierarchical",
                                    hierarchy_measurements(codebook),
                                    SIMULATED))
        else:
            raise ConfigError(f"unknown strategy '{strategy}'")
    for name, count in REPORTED_OVERHEAD:
        rows.append(OverheadRow(name, count, REPORTED))
    return rows


def envelope_probe(budget, tx_beam, rx_book):
    """Return a probe function measuring (wide) receive beams on a link.

    budget (LinkBudget) - The link at the instant of the search.
    tx_beam (tuple) - (Codebook, beam id) the station transmits on.
    """
    def probe(leaves):
        return budget.rss_envelope(tx_beam, rx_book, leaves)
    return probe
