"""Actions the protocol state machine asks the engine to carry out.

Transition functions in terra.protocol never touch the simulation. They
return Action objects; the engine applies them in order at the current slot.
An action may need measurements, in which case it calls back into the
engine and returns the follow-up actions produced by feeding the results to
the protocol.
"""

import terra.trace as trace

SERVING = "serving"
NEIGHBOR = "neighbor"


class Action:
    """Base interface for all protocol actions."""

    def apply(self, engine):
        """Carry out this action at the engine's current slot.

        engine - The running Engine. Actions use its log() to write trace
        events and its probe methods to take measurements.

        Returns the list of follow-up actions, which the engine applies
        before anything else happens in the slot.
        """
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and vars(self) == vars(other)

    def __repr__(self):  # pragma: no cover
        fields = ", ".join(f"{k}={v!r}" for k, v in vars(self).items())
        return f"{type(self).__name__}({fields})"


class Transition(Action):
    """Record a state change in one region of the state machine.

    The state itself is already updated by the transition function; this
    only puts it in the trace.
    """

    def __init__(self, region, source, target, reason):
        self.region = region
        self.source = source
        self.target = target
        self.reason = reason

    def apply(self, engine):
        engine.log(trace.STATE_TRANSITION, **{
            "region": self.region, "from": str(self.source),
            "to": str(self.target), "reason": self.reason})
        return []


class SwitchBeam(Action):
    """Move the serving or neighbor link to another receive beam."""

    def __init__(self, link, old, new, reason):
        self.link = link
        self.old = old
        self.new = new
        self.reason = reason

    def apply(self, engine):
        engine.log(trace.BEAM_SWITCH, **{
            "link": self.link, "from": self.old, "to": self.new,
            "reason": self.reason})
        return []


class StartOutage(Action):
    """Open an outage interval."""

    def __init__(self, reason):
        self.reason = reason

    def apply(self, engine):
        if not engine.trace.in_outage():
            engine.log(trace.OUTAGE_START, reason=self.reason)
        return []


class EndOutage(Action):
    """Close the open outage interval, if there is one.

    reconnect (bool) - The link came back only after a failed search, so
    the interval ends with a reconnect event instead of outage_end.
    """

    def __init__(self, reason, reconnect=False):
        self.reason = reason
        self.reconnect = reconnect

    def apply(self, engine):
        if engine.trace.in_outage():
            kind = trace.RECONNECT if self.reconnect else trace.OUTAGE_END
            engine.log(kind, reason=self.reason,
                       station=engine.serving_station.id)
        return []


class ProbeAdjacent(Action):
    """Probe the grid neighbors of the LoS beam and adapt to the best."""

    def apply(self, engine):
        return engine.adapt_los()


class DiscoverGr(Action):
    """Look for a ground-reflected beam to keep as blockage fallback."""

    def apply(self, engine):
        return engine.discover_gr()


class SearchServing(Action):
    """Scan every receive beam for the serving station, one dwell each."""

    def apply(self, engine):
        return engine.search_serving()


class RetryLater(Action):
    """Wait `delay` seconds with no link, then search again."""

    def __init__(self, delay):
        self.delay = delay

    def apply(self, engine):
        engine.schedule_retry(self.delay)
        return []


class Handover(Action):
    """Move the connection to a tracked neighbor station and beam."""

    def __init__(self, station, beam, duration):
        self.station = station
        self.beam = beam
        self.duration = duration

    def apply(self, engine):
        engine.start_handover(self.station, self.beam, self.duration)
        return []


class AcquireNeighbor(Action):
    """Start an exhaustive scan for any neighbor station."""

    def apply(self, engine):
        return engine.acquire_neighbor()


class ProbeNeighborBeams(Action):
    """Probe the grid neighbors of the tracked neighbor beam."""

    def apply(self, engine):
        return engine.adapt_neighbor()
