"""Simulation traces and their trace_v1 JSON-lines form.

The first line of a trace file is a header object carrying the schema
version and the run metadata analysis needs (slot, horizon, thresholds).
Every following line is one event: {"t": seconds, "kind": kind, ...payload}.
"""

import json
from collections import namedtuple

from terra.errors import ConfigError, Location

SCHEMA = "trace_v1"

MEASUREMENT = "measurement"
STATE_TRANSITION = "state_transition"
BEAM_SWITCH = "beam_switch"
BLOCKAGE_START = "blockage_start"
BLOCKAGE_END = "blockage_end"
OUTAGE_START = "outage_start"
OUTAGE_END = "outage_end"
RECONNECT = "reconnect"

KINDS = (MEASUREMENT, STATE_TRANSITION, BEAM_SWITCH, BLOCKAGE_START,
         BLOCKAGE_END, OUTAGE_START, OUTAGE_END, RECONNECT)

# Measurement roles.
LINK = "link"
PROBE = "probe"
ORACLE = "oracle"
SCAN = "scan"
NEIGHBOR = "neighbor"


Event = namedtuple("Event", ["t", "kind", "payload"])


class Trace:
    """An ordered list of simulation events plus run metadata.

    header (dict) - Run metadata; always contains "schema".
    events (list of Event) - Events in non-decreasing time order.
    """

    def __init__(self, header=None):
        """Initialize an empty trace."""
        self.header = {"schema": SCHEMA}
        self.header.update(header or {})
        self.events = []
        self._open_outages = 0

    def add(self, t, kind, **payload):
        """Append an event at time t (seconds)."""
        if kind not in KINDS:
            raise ConfigError(f"unknown trace event kind '{kind}'")
        if self.events and t < self.events[-1].t:
            raise ConfigError(f"trace event at {t} s is earlier than the "
                              f"previous one at {self.events[-1].t} s")
        if kind == OUTAGE_START:
            self._open_outages += 1
        elif kind in (OUTAGE_END, RECONNECT) and self._open_outages:
            self._open_outages -= 1
        self.events.append(Event(t, kind, payload))

    def in_outage(self):
        """Return True iff an outage_start is still unmatched."""
        return self._open_outages > 0

    def of_kind(self, kind, role=None):
        """Return the events of `kind`, optionally of one measurement role."""
        return [e for e in self.events
                if e.kind == kind and
                (role is None or e.payload.get("role") == role)]

    def intervals(self, start_kind, end_kinds, horizon=None):
        """Return (start, end) pairs delimited by the given event kinds.

        An interval still open at the end of the trace closes at `horizon`
        (or at its own start when no horizon is known).
        """
        spans = []
        opened = None
        for e in self.events:
            if e.kind == start_kind and opened is None:
                opened = e.t
            elif e.kind in end_kinds and opened is not None:
                spans.append((opened, e.t))
                opened = None
        if opened is not None:
            end = horizon if horizon is not None else opened
            spans.append((opened, max(end, opened)))
        return spans

    def lines(self):
        """Return the trace_v1 text lines of this trace."""
        out = [json.dumps(self.header)]
        for e in self.events:
            record = {"t": e.t, "kind": e.kind}
            record.update(e.payload)
            out.append(json.dumps(record))
        return out

    def write(self, path):
        """Write the trace to `path` as UTF-8 JSON lines."""
        with open(path, "w", encoding="utf-8") as f:
            for line in self.lines():
                f.write(line + "\n")


def parse_trace(text, filename="<trace>"):
    """Return the Trace in trace_v1 `text`.

    Raises ConfigError with the offending line if the header is missing,
    the schema version differs or a line is not a valid event.
    """
    lines = text.splitlines()
    if not lines:
        raise ConfigError("trace file is empty", Location(filename, 1))

    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise ConfigError("trace header is not valid JSON",
                          Location(filename, 1, lines[0]))
    if not isinstance(header, dict) or "schema" not in header:
        raise ConfigError("trace header has no schema field",
                          Location(filename, 1, lines[0]))
    if header["schema"] != SCHEMA:
        raise ConfigError(f"unsupported trace version '{header['schema']}', "
                          f"expected '{SCHEMA}'",
                          Location(filename, 1, lines[0]))

    trace = Trace(header)
    for index, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            t = record.pop("t")
            kind = record.pop("kind")
        except (json.JSONDecodeError, KeyError, AttributeError, TypeError):
            raise ConfigError("malformed trace event",
                              Location(filename, index, line))
        try:
            trace.add(t, kind, **record)
        except ConfigError as e:
            raise ConfigError(e.descrip, Location(filename, index, line))
    return trace


def read_trace(path):
    """Return the Trace stored at `path`."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except IOError:
        raise ConfigError(f"could not read trace file '{path}'")
    return parse_trace(text, str(path))
