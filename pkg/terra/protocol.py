"""The TERRA beam-management state machine.

Two regions run side by side. The serving region keeps the link to the
serving station up: it tracks the LoS beam, keeps a ground-reflected beam in
reserve and falls back to it, or to a full search, when the LoS is blocked.
The neighbor region silently keeps a receive beam aligned to a neighbor
station the mobile is not connected to.

Every function here is a pure transition: it takes the current state and
BeamStore and returns the new ones plus the actions (terra.actions) the
engine must carry out. Measurements come in as arguments.
"""

from collections import namedtuple

import terra.array as array
from terra.actions import (SERVING, NEIGHBOR, AcquireNeighbor, DiscoverGr,
                           EndOutage, Handover, ProbeAdjacent,
                           ProbeNeighborBeams, RetryLater, SearchServing,
                           StartOutage, SwitchBeam, Transition)
from terra.errors import ConfigError, DomainError, SimError, error_collector


class ProtocolState:
    """One state of the state machine.

    name (str) - Name used in traces and in the transition graph.
    region (str) - SERVING or NEIGHBOR.
    """

    def __init__(self, name, region, region_states):
        """Initialize the state and register it with its region."""
        self.name = name
        self.region = region
        region_states.append(self)

    def __str__(self):
        return self.name

    def __repr__(self):  # pragma: no cover
        return self.name


serving_states = []
neighbor_states = []

LOS_OPERATION = ProtocolState("LosOperation", SERVING, serving_states)
GR_DISCOVERY = ProtocolState("GroundReflectedDiscovery", SERVING,
                             serving_states)
EXHAUSTIVE_SEARCH = ProtocolState("ExhaustiveSearch", SERVING, serving_states)
NLOS_OPERATION = ProtocolState("NlosOperation", SERVING, serving_states)

NEIGHBOR_ACQUISITION = ProtocolState("NeighborAcquisition", NEIGHBOR,
                                     neighbor_states)
NEIGHBOR_TRACKING = ProtocolState("NeighborTracking", NEIGHBOR,
                                  neighbor_states)

STATES = {s.name: s for s in serving_states + neighbor_states}


Arc = namedtuple("Arc", ["source", "target", "reason", "described"])
Arc.__doc__ = """One allowed transition.

described (bool) - False for arcs added to make the machine total, which
are drawn dashed in the exported graph.
"""

ARCS = (
    Arc(EXHAUSTIVE_SEARCH, GR_DISCOVERY, "beam_found", True),
    Arc(EXHAUSTIVE_SEARCH, GR_DISCOVERY, "handover", False),
    Arc(EXHAUSTIVE_SEARCH, LOS_OPERATION, "los_found", False),
    Arc(EXHAUSTIVE_SEARCH, NLOS_OPERATION, "gr_found", False),
    Arc(LOS_OPERATION, GR_DISCOVERY, "los_adapted", True),
    Arc(LOS_OPERATION, NLOS_OPERATION, "blockage_detected", True),
    Arc(LOS_OPERATION, NLOS_OPERATION, "link_lost", False),
    Arc(LOS_OPERATION, EXHAUSTIVE_SEARCH, "blockage_detected", True),
    Arc(LOS_OPERATION, EXHAUSTIVE_SEARCH, "link_lost", False),
    Arc(GR_DISCOVERY, LOS_OPERATION, "gr_found", True),
    Arc(GR_DISCOVERY, LOS_OPERATION, "gr_not_found", True),
    Arc(GR_DISCOVERY, LOS_OPERATION, "no_zenith_steering", False),
    Arc(NLOS_OPERATION, LOS_OPERATION, "los_restored", True),
    Arc(NLOS_OPERATION, EXHAUSTIVE_SEARCH, "gr_lost", True),
    Arc(NEIGHBOR_ACQUISITION, NEIGHBOR_TRACKING, "neighbor_found", True),
    Arc(NEIGHBOR_TRACKING, NEIGHBOR_ACQUISITION, "neighbor_lost", True),
    Arc(NEIGHBOR_TRACKING, NEIGHBOR_ACQUISITION, "handover", False),
)

_ARC_SET = {(a.source, a.target, a.reason) for a in ARCS}


def _transition(source, target, reason):
    """Return the Transition action for an arc of the machine."""
    if (source, target, reason) not in _ARC_SET:
        raise DomainError(f"no transition {source} -> {target} "
                          f"on '{reason}'")
    return Transition(source.region, source, target, reason)


ProtocolConfig = namedtuple(
    "ProtocolConfig",
    ["blockage_drop", "adapt_drop", "pose_available", "revert_margin",
     "ref_window", "reconnect_penalty", "decode_threshold",
     "handover_duration", "confirm_scan"],
    defaults=[15.0, 3.0, True, 3.0, 10, 1.0, -68.0, 0.05, False])
ProtocolConfig.__doc__ = """Thresholds and timings of the protocol.

blockage_drop (float) - Sudden drop below the reference that means blockage.
adapt_drop (float) - Drop below the adoption anchor that triggers probing
of adjacent beams.
pose_available (bool) - The mobile knows its orientation, so ground
reflection discovery can go straight to the beams below the LoS beam.
revert_margin (float) - LoS is restored once it is back within this margin
of the reference.
ref_window (int) - Number of recent samples in the running reference.
reconnect_penalty (float) - Seconds without link after a failed search.
decode_threshold (float) - Weakest rss at which a beam is usable.
handover_duration (float) - Seconds to complete a handover to a tracked
neighbor.
confirm_scan (bool) - Scans need a second dwell on the same beam to accept.
"""


def check_protocol_config(cfg):
    """Raise ConfigError unless the thresholds are consistent."""
    if not cfg.blockage_drop > cfg.adapt_drop > 0:
        raise ConfigError("need blockage_drop > adapt_drop > 0")
    if cfg.revert_margin < 0:
        raise ConfigError("revert_margin must be non-negative")
    if cfg.ref_window < 1:
        raise ConfigError("ref_window must be at least 1")
    if cfg.reconnect_penalty < 0 or cfg.handover_duration < 0:
        raise ConfigError("protocol delays must be non-negative")


BeamStore = namedtuple(
    "BeamStore",
    ["los_beam", "gr_beam", "neighbor_beam", "los_ref_rss", "neighbor_ref_rss",
     "los_window", "los_anchor_rss"],
    defaults=[None, None, None, None, None, (), None])
BeamStore.__doc__ = """Beams and references the protocol remembers.

los_beam (int) - Receive beam of the LoS path to the serving station.
gr_beam (int) - Receive beam of the ground reflection, kept as fallback.
neighbor_beam (tuple) - (station id, beam id) silently tracked.
los_ref_rss (float) - Maximum of los_window; blockage is a sudden drop
below it.
neighbor_ref_rss (float) - Best neighbor rss since the beam was adopted.
los_window (tuple) - The last ref_window LoS samples.
los_anchor_rss (float) - Best LoS rss since the LoS beam was adopted.
"""


def check_store(store):
    """Raise DomainError if the store breaks its invariants."""
    if store.gr_beam is not None and store.gr_beam == store.los_beam:
        raise DomainError("ground-reflected beam equals the LoS beam")
    if store.los_beam is None and store.gr_beam is not None:
        raise DomainError("ground-reflected beam stored without a LoS beam")


def adopt_los(store, beam, rss):
    """Return the store after making `beam` the LoS beam.

    Any stored ground-reflected beam belongs to the old LoS direction, so it
    is erased whenever the LoS beam changes.
    """
    gr_beam = store.gr_beam if beam == store.los_beam else None
    return store._replace(los_beam=beam, gr_beam=gr_beam, los_window=(rss,),
                          los_ref_rss=rss, los_anchor_rss=rss)


def push_los_sample(store, cfg, rss):
    """Return the store with `rss` added to the running references."""
    window = (store.los_window + (rss,))[-cfg.ref_window:]
    anchor = rss if store.los_anchor_rss is None else max(
        store.los_anchor_rss, rss)
    return store._replace(los_window=window, los_ref_rss=max(window),
                          los_anchor_rss=anchor)


Sample = namedtuple("Sample", ["t", "beam", "rss"])
Sample.__doc__ = """One measurement on the beam the mobile listens on.

beam is None for a measurement occasion with nothing to listen to, which
asks the neighbor region to start acquisition.
"""


def listening_beam(state, store):
    """Return the receive beam the mobile listens on in `state`, or None."""
    if state is LOS_OPERATION:
        return store.los_beam
    elif state is NLOS_OPERATION:
        return store.gr_beam
    elif state is NEIGHBOR_TRACKING:
        return store.neighbor_beam[1]
    return None


def _fall_back(store, reason):
    """Leave LoS operation after the LoS beam stopped working."""
    if store.gr_beam is not None:
        return NLOS_OPERATION, store, [
            _transition(LOS_OPERATION, NLOS_OPERATION, reason),
            SwitchBeam(SERVING, store.los_beam, store.gr_beam, reason)]
    return EXHAUSTIVE_SEARCH, store, [
        _transition(LOS_OPERATION, EXHAUSTIVE_SEARCH, reason),
        StartOutage(reason), SearchServing()]


def _lose_gr(store):
    return EXHAUSTIVE_SEARCH, store, [
        _transition(NLOS_OPERATION, EXHAUSTIVE_SEARCH, "gr_lost"),
        StartOutage("gr_lost"), SearchServing()]


def on_sample(state, store, cfg, sample):
    """Return (state, store, actions) after one measurement.

    In LoS operation a drop of blockage_drop below the windowed reference
    (or below the decode threshold) switches to the stored ground-reflected
    beam, or starts a search and an outage if there is none; a drop of
    adapt_drop below the adoption anchor asks for adjacent-beam probes. In
    NLoS operation a ground-reflected sample below the decode threshold
    starts a search. In neighbor tracking a drop of adapt_drop asks for
    probes of the neighbor beam's grid neighbors. Every other (state,
    sample) pair leaves everything unchanged.
    """
    expected = listening_beam(state, store)
    if state is NEIGHBOR_ACQUISITION:
        return state, store, [AcquireNeighbor()]
    if expected is None or sample.beam != expected:
        if sample.beam is not None:
            error_collector.add(SimError(
                f"sample at {sample.t} s is for beam {sample.beam}, not the "
                f"listened beam {expected}; ignored", warning=True))
        return state, store, []

    if state is LOS_OPERATION:
        ref = store.los_ref_rss
        if ref is not None and sample.rss <= ref - cfg.blockage_drop:
            return _fall_back(store, "blockage_detected")
        if sample.rss < cfg.decode_threshold:
            return _fall_back(store, "link_lost")
        store = push_los_sample(store, cfg, sample.rss)
        if sample.rss <= store.los_anchor_rss - cfg.adapt_drop:
            return state, store, [ProbeAdjacent()]
        return state, store, []

    elif state is NLOS_OPERATION:
        if sample.rss < cfg.decode_threshold:
            return _lose_gr(store)
        return state, store, []

    else:
        ref = store.neighbor_ref_rss
        if ref is not None and sample.rss <= ref - cfg.adapt_drop:
            return state, store, [ProbeNeighborBeams()]
        ref = sample.rss if ref is None else max(ref, sample.rss)
        return state, store._replace(neighbor_ref_rss=ref), []


def _argmax_beam(results):
    """Return the beam with the highest rss; ties go to the lowest id."""
    return min(results, key=lambda beam: (-results[beam], beam))


def los_adapt(store, codebook, probes):
    """Return the LoS beam to use after probing adjacent beams.

    probes (dict) - beam id -> rss. Only the incumbent and its grid
    neighbors are considered; an empty probe set keeps the incumbent.
    """
    allowed = array.angular_neighbors(codebook, store.los_beam)
    results = {b: r for b, r in probes.items()
               if b in allowed or b == store.los_beam}
    if not results:
        return store.los_beam
    return _argmax_beam(results)


def finish_los_adapt(state, store, cfg, codebook, probes):
    """Return (state, store, actions) once adjacent-beam probes are in."""
    new = los_adapt(store, codebook, probes)
    old = store.los_beam
    if new == old:
        # Re-anchor so the same decay does not trigger probes every slot.
        if old in probes:
            store = store._replace(los_anchor_rss=probes[old])
        return state, store, []
    store = adopt_los(store, new, probes[new])
    return GR_DISCOVERY, store, [
        _transition(LOS_OPERATION, GR_DISCOVERY, "los_adapted"),
        SwitchBeam(SERVING, old, new, "los_adapted"), DiscoverGr()]


def _best_above(results, threshold):
    usable = {b: r for b, r in results.items() if r >= threshold}
    return _argmax_beam(usable) if usable else None


def grd_search(store, cfg, codebook, probe):
    """Return (gr_beam, probes_used) for the current LoS beam.

    probe - Function taking a beam id and returning its rss now.

    With the pose known only the (up to two) beams right below the LoS beam
    are probed. Without it, or if those find nothing, every other beam is
    probed and the best one steered below the horizon and below the LoS
    beam is taken. A codebook with no zenith steering cannot separate the
    reflection from the LoS, so nothing is probed.
    """
    los = store.los_beam
    if codebook.n_zen < 2 or los is None:
        return None, 0

    used = 0
    if cfg.pose_available:
        below = array.zenith_neighbors_below(codebook, los)
        results = {b: probe(b) for b in below}
        used += len(results)
        found = _best_above(results, cfg.decode_threshold)
        if found is not None:
            return found, used

    los_zen = codebook.beam(los).steer_zen
    results = {b: probe(b) for b in range(len(codebook)) if b != los}
    used += len(results)
    candidates = {b: r for b, r in results.items()
                  if codebook.beams[b].steer_zen > max(los_zen, 0.0)}
    return _best_above(candidates, cfg.decode_threshold), used


def finish_grd(state, store, cfg, gr_beam, probes_used):
    """Return (state, store, actions) once discovery has finished."""
    if gr_beam == store.los_beam:
        gr_beam = None
    store = store._replace(gr_beam=gr_beam)
    if gr_beam is not None:
        reason = "gr_found"
    elif probes_used == 0:
        reason = "no_zenith_steering"
    else:
        reason = "gr_not_found"
    return LOS_OPERATION, store, [
        _transition(GR_DISCOVERY, LOS_OPERATION, reason)]


def blockage_recovery_step(state, store, cfg, los_rss, gr_rss=None):
    """Return (state, store, actions) after a LoS probe in NLoS operation.

    Reverts to the LoS beam once it is back within revert_margin of the
    reference, and gives up the ground-reflected beam when it falls below
    the decode threshold.
    """
    if state is not NLOS_OPERATION:
        return state, store, []
    if gr_rss is not None and gr_rss < cfg.decode_threshold:
        return _lose_gr(store)
    if los_rss >= store.los_ref_rss - cfg.revert_margin:
        return LOS_OPERATION, store, [
            _transition(NLOS_OPERATION, LOS_OPERATION, "los_restored"),
            SwitchBeam(SERVING, store.gr_beam, store.los_beam,
                       "los_restored")]
    return state, store, []


def complete_search(state, store, cfg, codebook, found, rss, retried=False):
    """Return (state, store, actions) after a search of the serving station.

    found (int) - The best beam above the decode threshold, or None.
    retried (bool) - An earlier search of this outage failed.

    A found beam equal to the LoS beam restores LoS operation. A different
    beam steered below the LoS beam is taken as a ground reflection while
    the LoS stays blocked; anything else becomes the new LoS beam.
    """
    if found is None:
        return search_failed(state, store, cfg)

    end = EndOutage("beam_found", reconnect=retried)
    old = listening_beam(state, store)
    los = store.los_beam
    if los is not None and found == los:
        store = store._replace(los_window=(rss,), los_ref_rss=rss,
                               los_anchor_rss=rss)
        if store.gr_beam is None:
            return GR_DISCOVERY, store, [
                _transition(EXHAUSTIVE_SEARCH, GR_DISCOVERY, "beam_found"),
                SwitchBeam(SERVING, old, found, "beam_found"), end,
                DiscoverGr()]
        return LOS_OPERATION, store, [
            _transition(EXHAUSTIVE_SEARCH, LOS_OPERATION, "los_found"),
            SwitchBeam(SERVING, old, found, "los_found"), end]

    if (los is not None and codebook.n_zen > 1 and
            codebook.beam(found).steer_zen > codebook.beam(los).steer_zen):
        store = store._replace(gr_beam=found)
        return NLOS_OPERATION, store, [
            _transition(EXHAUSTIVE_SEARCH, NLOS_OPERATION, "gr_found"),
            SwitchBeam(SERVING, old, found, "gr_found"), end]

    store = adopt_los(store, found, rss)
    return GR_DISCOVERY, store, [
        _transition(EXHAUSTIVE_SEARCH, GR_DISCOVERY, "beam_found"),
        SwitchBeam(SERVING, old, found, "beam_found"), end, DiscoverGr()]


def search_failed(state, store, cfg):
    """Return (state, store, actions) when no beam was found.

    A tracked neighbor beam allows a handover; otherwise the mobile waits
    out the reconnect penalty and searches again.
    """
    if store.neighbor_beam is not None:
        station, beam = store.neighbor_beam
        return state, store, [Handover(station, beam, cfg.handover_duration)]
    return state, store, [RetryLater(cfg.reconnect_penalty)]


def complete_handover(state, nstate, store, cfg, beam, rss):
    """Return (state, nstate, store, actions) once a handover finished.

    The tracked neighbor beam becomes the LoS beam toward the new serving
    station and the neighbor region starts over.
    """
    old = listening_beam(state, store)
    store = adopt_los(store._replace(gr_beam=None, neighbor_beam=None,
                                     neighbor_ref_rss=None), beam, rss)
    actions = [_transition(state, GR_DISCOVERY, "handover"),
               SwitchBeam(SERVING, old, beam, "handover"),
               EndOutage("handover")]
    if nstate is NEIGHBOR_TRACKING:
        actions.append(_transition(NEIGHBOR_TRACKING, NEIGHBOR_ACQUISITION,
                                   "handover"))
    actions.append(DiscoverGr())
    return GR_DISCOVERY, NEIGHBOR_ACQUISITION, store, actions


def neighbor_acquire(ctx, start_slot):
    """Return (station id, beam id, dwells) of a neighbor scan.

    ctx - The simulation context; its neighbor_scan runs an exhaustive scan
    against every neighbor carrier at once, one dwell per measurement
    occasion, and the first station found wins. Station and beam are None
    if the scan failed.
    """
    result = ctx.neighbor_scan(start_slot)
    return result.station, result.beam, result.dwells


def finish_neighbor_acquire(nstate, store, cfg, station, beam, rss):
    """Return (nstate, store, actions) once a neighbor scan ended."""
    if station is None:
        return nstate, store, []
    store = store._replace(neighbor_beam=(station, beam),
                           neighbor_ref_rss=rss)
    return NEIGHBOR_TRACKING, store, [
        _transition(NEIGHBOR_ACQUISITION, NEIGHBOR_TRACKING,
                    "neighbor_found"),
        SwitchBeam(NEIGHBOR, None, beam, "neighbor_found")]


def nrba_adapt(store, codebook, probes):
    """Return the neighbor beam to track after probing its grid neighbors.

    probes (dict) - beam id -> rss for at most 8 adjacent beams and
    possibly the incumbent.
    """
    current = store.neighbor_beam[1]
    allowed = array.angular_neighbors(codebook, current)
    results = {b: r for b, r in probes.items()
               if b in allowed or b == current}
    if not results:
        return current
    return _argmax_beam(results)


def finish_nrba(nstate, store, cfg, codebook, probes):
    """Return (nstate, store, actions) once neighbor probes are in."""
    station, old = store.neighbor_beam
    if all(r < cfg.decode_threshold for r in probes.values()):
        store = store._replace(neighbor_beam=None, neighbor_ref_rss=None)
        return NEIGHBOR_ACQUISITION, store, [
            _transition(NEIGHBOR_TRACKING, NEIGHBOR_ACQUISITION,
                        "neighbor_lost"),
            SwitchBeam(NEIGHBOR, old, None, "neighbor_lost")]
    new = nrba_adapt(store, codebook, probes)
    store = store._replace(neighbor_beam=(station, new),
                           neighbor_ref_rss=probes[new])
    if new == old:
        return nstate, store, []
    return nstate, store, [SwitchBeam(NEIGHBOR, old, new, "neighbor_adapted")]


def transition_graph_dot():
    """Return the transition graph in DOT format.

    Arcs not spelled out in the protocol description are dashed.
    """
    lines = ["digraph terra {", "  rankdir=LR;"]
    for region, states in ((SERVING, serving_states),
                           (NEIGHBOR, neighbor_states)):
        lines.append(f"  subgraph cluster_{region} {{")
        lines.append(f'    label="{region}";')
        for state in states:
            lines.append(f"    {state.name};")
        lines.append("  }")
    for arc in ARCS:
        style = "" if arc.described else ", style=dashed"
        lines.append(f'  {arc.source.name} -> {arc.target.name} '
                     f'[label="{arc.reason}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
