"""Base-station sweeps, receive-beam scans and the slot-clock engine.

Time advances in integer slots. Every station transmits its reference
signal on one beam per beam_dwell, cycling through beam_order once per
sweep period with a phase the mobile does not know. The engine evaluates
the channel for the beams the protocol listens on, feeds the samples to
terra.protocol and carries out the returned actions, writing everything to
a Trace.
"""

import math
from collections import namedtuple

import numpy as np

import terra.array as array
import terra.mobility as mobility
import terra.protocol as protocol
import terra.trace as trace
from terra.actions import NEIGHBOR, SERVING
from terra.channel import LinkBudget
from terra.errors import ConfigError, DomainError

# Random stream of the engine itself (sweep phases, scan start beams).
_STREAM_ENGINE = 10

SCAN_RANDOM = "random"
SCAN_FIRST = "first"

# Scan purpose of the full search after a lost link.
SEARCH = "search"

# Cached link budgets per context before the cache is dropped.
_CACHE_LIMIT = 4096


SweepSchedule = namedtuple("SweepSchedule",
                           ["beam_dwell", "period", "beam_order", "phase"],
                           defaults=[800e-6, 0.02, tuple(range(25)), 0.0])
SweepSchedule.__doc__ = """When a station transmits on which beam.

period is beam_dwell * len(beam_order); use make_schedule to get it
derived and checked.
"""


def make_schedule(n_beams, beam_dwell=800e-6, beam_order=None, phase=0.0):
    """Return a checked SweepSchedule over a codebook of n_beams."""
    order = tuple(range(n_beams)) if beam_order is None else tuple(
        beam_order)
    if sorted(order) != list(range(n_beams)):
        raise ConfigError("beam order must be a permutation of the "
                          "codebook's beam ids")
    if beam_dwell <= 0:
        raise ConfigError("beam dwell must be positive")
    period = beam_dwell * len(order)
    if not 0 <= phase < period:
        raise ConfigError(f"sweep phase must be in [0, {period})")
    return SweepSchedule(beam_dwell, period, order, phase)


def bs_beam_at(schedule, t):
    """Return the beam a station transmits on at time t seconds."""
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    offset = (t - schedule.phase) % schedule.period
    index = int(offset / schedule.beam_dwell + 1e-9)
    return schedule.beam_order[min(index, len(schedule.beam_order) - 1)]


Station = namedtuple("Station",
                     ["id", "pose", "codebook", "schedule", "carrier"])
Station.__doc__ = """A base station. The first station of a scenario serves
the mobile at the start; the others are neighbors on their own carriers."""


Scenario = namedtuple(
    "Scenario",
    ["name", "stations", "mobile", "channel", "blockers", "protocol",
     "horizon", "slot", "seed", "oracle_stride", "neighbor_every",
     "random_phase", "scan_start"],
    defaults=[100e-6, 0, 1, 4, True, SCAN_RANDOM])
Scenario.__doc__ = """Everything one run needs.

mobile (tuple) - (MobilityModel, Codebook) of the mobile.
oracle_stride (int) - Sweep periods between oracle sweeps, 0 for none.
neighbor_every (int) - Every this many sweep periods the mobile spends one
period measuring neighbor carriers.
random_phase (bool) - Draw each station's sweep phase from the seed.
scan_start (str) - "random" starts scans on a seeded random beam, "first"
on beam 0.
"""


def _slots(seconds, slot, what):
    ratio = seconds / slot
    count = int(round(ratio))
    if count < 1 or abs(ratio - count) > 1e-6:
        raise ConfigError(f"slot of {slot} s does not divide {what} of "
                          f"{seconds} s")
    return count


def check_scenario(scenario):
    """Raise ConfigError if the scenario cannot be simulated."""
    if scenario.horizon <= 0:
        raise ConfigError("horizon must be positive")
    if scenario.slot <= 0:
        raise ConfigError("slot must be positive")
    if not scenario.stations:
        raise ConfigError("scenario needs at least one station")
    ids = [s.id for s in scenario.stations]
    if len(set(ids)) != len(ids):
        raise ConfigError("station ids must be unique")
    periods = set()
    for station in scenario.stations:
        if len(station.schedule.beam_order) != len(station.codebook):
            raise ConfigError(f"station '{station.id}' sweeps "
                              f"{len(station.schedule.beam_order)} beams "
                              f"but has {len(station.codebook)}")
        dwell = _slots(station.schedule.beam_dwell, scenario.slot,
                       "beam dwell")
        periods.add((dwell, dwell * len(station.schedule.beam_order)))
    if len(periods) != 1:
        raise ConfigError("all stations must share one beam dwell and "
                          "sweep period")
    model, codebook = scenario.mobile
    mobility.check_mobility(model)
    mobility.check_blockers(scenario.blockers)
    protocol.check_protocol_config(scenario.protocol)
    if scenario.oracle_stride < 0:
        raise ConfigError("oracle stride must be non-negative")
    if scenario.neighbor_every < 2:
        raise ConfigError("neighbor_every must be at least 2")
    if scenario.scan_start not in (SCAN_RANDOM, SCAN_FIRST):
        raise ConfigError(f"unknown scan start '{scenario.scan_start}'")


def with_seed(scenario, seed):
    """Return the scenario with every random stream derived from `seed`."""
    model, codebook = scenario.mobile
    return scenario._replace(
        seed=seed, mobile=(model._replace(seed=seed), codebook),
        blockers=scenario.blockers._replace(seed=seed))


ScanHit = namedtuple("ScanHit", ["rss", "station", "tx_beam"])

ScanResult = namedtuple("ScanResult",
                        ["dwells", "beam", "rss", "station", "end_slot"])
ScanResult.__doc__ = """Outcome of an exhaustive scan.

dwells (int) - Dwells used, counting from 1.
beam (int) - Receive beam found, None if the scan failed.
station (int) - Index of the station found.
end_slot (int) - First slot after the last dwell.
"""


class SimContext:
    """Channel evaluation at slot granularity for one scenario.

    phases (list of int) - Sweep phase of each station, in slots.

    Budgets and rss values are cached by pose, so static stretches of a run
    cost a dictionary lookup per slot.
    """

    def __init__(self, scenario, phases):
        """Initialize the context with the sweep phases in slots."""
        self.scenario = scenario
        self.slot = scenario.slot
        self.model, self.rx_book = scenario.mobile
        self.static = mobility.is_static(self.model)
        self.phases = phases

        schedule = scenario.stations[0].schedule
        self.dwell_slots = _slots(schedule.beam_dwell, self.slot, "beam dwell")
        self.period_slots = self.dwell_slots * len(schedule.beam_order)

        self._pose = None
        self._budgets = {}
        self._rss = {}
        self._tx = {}
        self._blocker_slot = None
        self._blockers = []

    def time(self, n):
        """Return the time of slot n in seconds."""
        return round(n * self.slot, 9)

    def pose(self, n):
        """Return the mobile's pose at slot n."""
        if self.static:
            if self._pose is None:
                self._pose = mobility.pose_at(self.model, 0.0)
            return self._pose
        return mobility.pose_at(self.model, self.time(n))

    def blockers(self, n):
        """Return the blockers alive at slot n."""
        if n != self._blocker_slot:
            self._blocker_slot = n
            self._blockers = mobility.active_blockers(
                self.scenario.blockers, self.time(n))
        return self._blockers

    def _base_budget(self, si, pose):
        key = (si, pose)
        budget = self._budgets.get(key)
        if budget is None:
            if len(self._budgets) > _CACHE_LIMIT:
                self._budgets.clear()
                self._rss.clear()
                self._tx.clear()
            station = self.scenario.stations[si]
            budget = LinkBudget(self.scenario.channel, station.pose, pose)
            self._budgets[key] = budget
        return budget

    def budget(self, n, si):
        """Return the LinkBudget from station si to the mobile at slot n."""
        base = self._base_budget(si, self.pose(n))
        blockers = self.blockers(n)
        return base.occluded_by(blockers) if blockers else base

    def sweep_beam(self, n, si):
        """Return the beam station si sweeps at slot n."""
        order = self.scenario.stations[si].schedule.beam_order
        offset = (n - self.phases[si]) % self.period_slots
        return order[offset // self.dwell_slots]

    def serving_tx(self, n, si):
        """Return the beam station si serves the mobile on at slot n."""
        pose = self.pose(n)
        key = (si, pose)
        beam = self._tx.get(key)
        if beam is None:
            book = self.scenario.stations[si].codebook
            beam = self._base_budget(si, pose).best_tx_beam(book)
            self._tx[key] = beam
        return beam

    def rss(self, n, si, tx_beam, rx_beam, budget=None):
        """Return the rss at slot n from station si on a beam pair."""
        budget = budget or self.budget(n, si)
        key = (si, budget.rx, budget.occlusion(), tx_beam, rx_beam)
        value = self._rss.get(key)
        if value is None:
            book = self.scenario.stations[si].codebook
            value = budget.rss((book, tx_beam), (self.rx_book, rx_beam))
            self._rss[key] = value
        return value

    def best_tx_rss(self, n, si, rx_beam):
        """Return the rss of rx_beam at the peak of station si's sweep."""
        book = self.scenario.stations[si].codebook
        return self.budget(n, si).rss_best_tx(book, (self.rx_book, rx_beam))

    def dwell_detect(self, start, rx_beam, stations, threshold):
        """Return the best ScanHit of one dwell starting at slot `start`.

        Within the dwell, each station's channel is evaluated once for
        every beam it sweeps. Returns None if nothing reaches `threshold`.
        """
        best = None
        end = start + self.period_slots
        for si in stations:
            first = start + (-(start - self.phases[si])) % self.dwell_slots
            slots = sorted(set([start]) | set(range(first, end,
                                                    self.dwell_slots)))
            for m in slots:
                tx = self.sweep_beam(m, si)
                value = self.rss(m, si, tx, rx_beam)
                if value >= threshold and (best is None or value > best.rss):
                    best = ScanHit(value, si, tx)
        return best


def exhaustive_scan(ctx, rx_codebook, threshold, start_slot=0, stations=(0,),
                    dwell_every=1, start_beam=0, confirm=False, full=False):
    """Return the ScanResult of scanning receive beams for a station.

    Each receive beam is held for one sweep period (a dwell); dwell i
    starts at start_slot + i * dwell_every periods. A dwell succeeds if any
    slot of it sees one of `stations` at or above `threshold`. With
    `confirm`, the next dwell on the same beam must see the same station
    beam again. Beams are tried in id order starting at `start_beam`.

    A `full` scan dwells on every beam and returns the strongest success
    instead of the first; it ignores `confirm`.
    """
    period = ctx.period_slots
    n_beams = len(rx_codebook)

    def dwell_slot(d):
        return start_slot + d * dwell_every * period

    if full:
        best, best_beam = None, None
        for d in range(n_beams):
            beam = (start_beam + d) % n_beams
            hit = ctx.dwell_detect(dwell_slot(d), beam, stations, threshold)
            if hit is not None and (best is None or hit.rss > best.rss):
                best, best_beam = hit, beam
        end = dwell_slot(n_beams - 1) + period
        if best is None:
            return ScanResult(n_beams, None, ctx.scenario.channel.noise_floor,
                              None, end)
        return ScanResult(n_beams, best_beam, best.rss, best.station, end)

    d = 0
    for i in range(n_beams):
        beam = (start_beam + i) % n_beams
        hit = ctx.dwell_detect(dwell_slot(d), beam, stations, threshold)
        d += 1
        if hit is None:
            continue
        if confirm:
            again = ctx.dwell_detect(dwell_slot(d), beam, stations,
                                     threshold)
            d += 1
            if again is None or again[1:] != hit[1:]:
                continue
        return ScanResult(d, beam, hit.rss, hit.station,
                          dwell_slot(d - 1) + period)
    return ScanResult(d, None, ctx.scenario.channel.noise_floor, None,
                      dwell_slot(d - 1) + period)


def _round(value):
    return round(float(value), 4)


class Engine:
    """One simulation run.

    state / nstate (ProtocolState) - Active state of the serving and the
    neighbor region.
    store (BeamStore) - What the protocol remembers.
    serving (int) - Index of the serving station.
    """

    def __init__(self, scenario):
        """Check the scenario and set up the run at slot 0."""
        check_scenario(scenario)
        self.scenario = scenario
        self.cfg = scenario.protocol
        self.rng = np.random.default_rng([int(scenario.seed), _STREAM_ENGINE])

        phases = []
        for station in scenario.stations:
            dwell = _slots(station.schedule.beam_dwell, scenario.slot,
                           "beam dwell")
            period = dwell * len(station.schedule.beam_order)
            if scenario.random_phase:
                phases.append(int(self.rng.integers(period)))
            else:
                phases.append(int(round(station.schedule.phase /
                                        scenario.slot)) % period)
        self.ctx = SimContext(scenario, phases)
        self.rx_book = self.ctx.rx_book
        self.period = self.ctx.period_slots
        self.horizon_slots = int(round(scenario.horizon / scenario.slot))
        self.index = {s.id: i for i, s in enumerate(scenario.stations)}

        self.trace = trace.Trace({
            "scenario": scenario.name, "seed": scenario.seed,
            "slot": scenario.slot, "horizon": scenario.horizon,
            "period": self.period * scenario.slot,
            "oracle_stride": scenario.oracle_stride,
            "noise_floor": scenario.channel.noise_floor,
            "decode_threshold": self.cfg.decode_threshold,
            "rx_grid": [self.rx_book.n_zen, self.rx_book.n_az],
            "stations": [s.id for s in scenario.stations],
            "sweep_phases": [p * scenario.slot for p in phases]})

        self.state = protocol.EXHAUSTIVE_SEARCH
        self.nstate = protocol.NEIGHBOR_ACQUISITION
        self.store = protocol.BeamStore()
        self.serving = 0
        self.n = 0

        self.pending_search = None
        self.retry_at = None
        self.retry_kind = None
        self.retried = False
        self.handover = None
        self.neighbor_pending = None
        self.los_check_at = None
        self.in_blockage = False
        self.last_link = None
        self.connected = False
        self.samples = {}

    @property
    def serving_station(self):
        return self.scenario.stations[self.serving]

    def neighbors(self):
        """Return the indices of the neighbor stations."""
        return [i for i in range(len(self.scenario.stations))
                if i != self.serving]

    def log(self, kind, **payload):
        """Add an event at the current slot to the trace."""
        self.trace.add(self.ctx.time(self.n), kind, **payload)

    def _start_beam(self):
        if self.scenario.scan_start == SCAN_FIRST:
            return 0
        return int(self.rng.integers(len(self.rx_book)))

    def _slots_for(self, seconds):
        return int(math.ceil(seconds / self.scenario.slot - 1e-6))

    def apply(self, actions):
        """Carry out actions in order, follow-ups first."""
        queue = list(actions)
        while queue:
            follow = queue.pop(0).apply(self)
            queue[0:0] = follow

    def _update(self, state, store):
        if (state is protocol.NLOS_OPERATION and
                self.state is not protocol.NLOS_OPERATION):
            self.los_check_at = self.n + self.period
        protocol.check_store(store)
        self.state = state
        self.store = store

    def serving_rss(self, beam):
        """Return the rss on receive beam `beam` from the serving station."""
        n = self.n
        tx = self.ctx.serving_tx(n, self.serving)
        return self.ctx.rss(n, self.serving, tx, beam)

    def _sampled(self, region, beam, measure, measured):
        """Return the rss of `beam`, reusing this slot's sample of `region`.

        Beams that had to be measured are appended to `measured`.
        """
        sample = self.samples.get(region)
        if (sample is not None and sample.beam == beam and
                sample.t == self.ctx.time(self.n)):
            return sample.rss
        measured.append(beam)
        return measure(beam)

    def _log_probe(self, purpose, beams, found, value=None):
        payload = {"role": trace.PROBE, "purpose": purpose,
                   "count": len(beams), "beams": sorted(beams),
                   "found": found}
        if value is not None:
            payload["rss"] = _round(value)
        self.log(trace.MEASUREMENT, **payload)

    # Serving-region measurements requested by actions.

    def adapt_los(self):
        """Probe the LoS beam's grid neighbors and adapt."""
        los = self.store.los_beam
        adjacent = sorted(array.angular_neighbors(self.rx_book, los))
        measured = list(adjacent)
        probes = {b: self.serving_rss(b) for b in adjacent}
        probes[los] = self._sampled(SERVING, los, self.serving_rss, measured)
        new = protocol.los_adapt(self.store, self.rx_book, probes)
        self._log_probe("los_adapt", measured, new, probes[new])
        state, store, actions = protocol.finish_los_adapt(
            self.state, self.store, self.cfg, self.rx_book, probes)
        self._update(state, store)
        return actions

    def discover_gr(self):
        """Run ground-reflection discovery for the current LoS beam."""
        probed = []

        def probe(beam):
            probed.append(beam)
            return self.serving_rss(beam)

        gr, used = protocol.grd_search(self.store, self.cfg, self.rx_book,
                                       probe)
        self._log_probe("gr_discovery", probed, gr)
        state, store, actions = protocol.finish_grd(
            self.state, self.store, self.cfg, gr, used)
        self._update(state, store)
        return actions

    def search_serving(self):
        """Start a full scan of every receive beam for the serving station.

        The result arrives one dwell per beam later.
        """
        self._start_scan(SEARCH, full=True)
        return []

    def _finish_search(self, found, value, kind):
        retried = self.retried
        if found is None:
            self.retry_kind = kind
        else:
            self.retried = False
        state, store, actions = protocol.complete_search(
            self.state, self.store, self.cfg, self.rx_book, found, value,
            retried)
        self._update(state, store)
        return actions

    def schedule_retry(self, delay):
        """Search again after `delay` seconds."""
        self.retried = True
        self.retry_at = self.n + max(self._slots_for(delay), 1)

    def start_handover(self, station, beam, duration):
        """Begin a handover that completes after `duration` seconds."""
        self.handover = (self.n + max(self._slots_for(duration), 1),
                         self.index[station], beam)

    def _start_scan(self, kind, full=False):
        start_beam = self._start_beam()
        result = exhaustive_scan(
            self.ctx, self.rx_book, self.cfg.decode_threshold, self.n,
            (self.serving,), 1, start_beam, self.cfg.confirm_scan, full)
        self.pending_search = (result.end_slot, kind, result)

    def _finish_scan(self):
        _, kind, result = self.pending_search
        self.pending_search = None
        self.log(trace.MEASUREMENT, role=trace.SCAN, purpose=kind,
                 dwells=result.dwells, found=result.beam is not None,
                 beam=result.beam, station=self.serving_station.id,
                 rss=_round(result.rss))
        self.apply(self._finish_search(result.beam, result.rss, kind))

    def _retry(self):
        self.retry_at = None
        if self.retry_kind == SEARCH:
            self.apply(self.search_serving())
        else:
            self._start_scan("retry")

    def _finish_handover(self):
        _, si, beam = self.handover
        self.handover = None
        self.serving = si
        value = self.serving_rss(beam)
        state, nstate, store, actions = protocol.complete_handover(
            self.state, self.nstate, self.store, self.cfg, beam, value)
        self.neighbor_pending = None
        self.nstate = nstate
        self._update(state, store)
        self.apply(actions)

    # Neighbor region.

    def neighbor_scan(self, start_slot):
        """Return the ScanResult of scanning for any neighbor station.

        One dwell per measurement occasion.
        """
        return exhaustive_scan(
            self.ctx, self.rx_book, self.cfg.decode_threshold, start_slot,
            self.neighbors(), self.scenario.neighbor_every,
            self._start_beam(), self.cfg.confirm_scan)

    def acquire_neighbor(self):
        """Start a neighbor scan at the current occasion."""
        start = self.n
        station, beam, dwells = protocol.neighbor_acquire(self, start)
        period = self.period * self.scenario.neighbor_every
        due = start + (dwells - 1) * period + self.period
        self.neighbor_pending = (due, station, beam, dwells)
        return []

    def _finish_neighbor_scan(self):
        _, si, beam, dwells = self.neighbor_pending
        self.neighbor_pending = None
        station = None if si is None else self.scenario.stations[si].id
        value = (self.ctx.best_tx_rss(self.n, si, beam) if si is not None
                 else self.scenario.channel.noise_floor)
        self.log(trace.MEASUREMENT, role=trace.SCAN, purpose="neighbor",
                 dwells=dwells, found=si is not None, beam=beam,
                 station=station, rss=_round(value))
        nstate, store, actions = protocol.finish_neighbor_acquire(
            self.nstate, self.store, self.cfg, station, beam, value)
        self.nstate = nstate
        self.store = store
        self.apply(actions)

    def neighbor_rss(self, beam):
        """Return the rss of `beam` toward the tracked neighbor station."""
        si = self.index[self.store.neighbor_beam[0]]
        return self.ctx.best_tx_rss(self.n, si, beam)

    def adapt_neighbor(self):
        """Probe the tracked neighbor beam's grid neighbors and adapt."""
        current = self.store.neighbor_beam[1]
        adjacent = sorted(array.angular_neighbors(self.rx_book, current))
        measured = list(adjacent)
        probes = {b: self.neighbor_rss(b) for b in adjacent}
        probes[current] = self._sampled(NEIGHBOR, current, self.neighbor_rss,
                                        measured)
        new = protocol.nrba_adapt(self.store, self.rx_book, probes)
        self._log_probe("neighbor_adapt", measured, new, probes[new])
        nstate, store, actions = protocol.finish_nrba(
            self.nstate, self.store, self.cfg, self.rx_book, probes)
        self.nstate = nstate
        self.store = store
        return actions

    def _occasion(self, n):
        """Return True iff slot n is in a neighbor measurement occasion."""
        if len(self.scenario.stations) < 2:
            return False
        k = self.scenario.neighbor_every
        return (n // self.period) % k == k - 1

    def _next_occasion(self, n):
        if len(self.scenario.stations) < 2:
            return None
        k = self.scenario.neighbor_every
        p = n // self.period
        q = p + (k - 1 - p % k) % k
        if q == p and n % self.period:
            q += k
        return q * self.period

    def _neighbor_occasion(self):
        t = self.ctx.time(self.n)
        if self.nstate is protocol.NEIGHBOR_ACQUISITION:
            if self.neighbor_pending is not None:
                return
            sample = protocol.Sample(t, None, None)
        else:
            station, beam = self.store.neighbor_beam
            value = self.neighbor_rss(beam)
            self.log(trace.MEASUREMENT, role=trace.NEIGHBOR, station=station,
                     beam=beam, rss=_round(value))
            sample = protocol.Sample(t, beam, value)
            self.samples[NEIGHBOR] = sample
        nstate, store, actions = protocol.on_sample(self.nstate, self.store,
                                                    self.cfg, sample)
        self.nstate = nstate
        self.store = store
        self.apply(actions)

    # Serving region.

    def _serve(self):
        beam = protocol.listening_beam(self.state, self.store)
        if beam is None:
            return
        t = self.ctx.time(self.n)
        sample = protocol.Sample(t, beam, self.serving_rss(beam))
        self.samples[SERVING] = sample
        state, store, actions = protocol.on_sample(self.state, self.store,
                                                   self.cfg, sample)
        self._update(state, store)
        self.apply(actions)

        if (self.state is protocol.NLOS_OPERATION and
                self.los_check_at is not None and
                self.n >= self.los_check_at):
            self.los_check_at = self.n + self.period
            los_rss = self.serving_rss(self.store.los_beam)
            self._log_probe("los_check", [self.store.los_beam],
                            self.store.los_beam, los_rss)
            state, store, actions = protocol.blockage_recovery_step(
                self.state, self.store, self.cfg, los_rss)
            self._update(state, store)
            self.apply(actions)

    def _link_rss(self):
        beam = protocol.listening_beam(self.state, self.store)
        if beam is None:
            return None, self.scenario.channel.noise_floor
        return beam, self.serving_rss(beam)

    def _log_link(self):
        beam, value = self._link_rss()
        key = (self.serving, beam, _round(value))
        if beam is not None:
            self.connected = True
        if key != self.last_link:
            self.last_link = key
            self.log(trace.MEASUREMENT, role=trace.LINK,
                     station=self.serving_station.id, beam=beam,
                     rss=key[2])

    def _log_oracle(self):
        if not self.connected:
            return
        n = self.n
        budget = self.ctx.budget(n, self.serving)
        tx = self.ctx.serving_tx(n, self.serving)
        values = budget.rss_all_rx((self.serving_station.codebook, tx),
                                   self.rx_book)
        best = int(np.argmax(values))
        _, achieved = self._link_rss()
        self.log(trace.MEASUREMENT, role=trace.ORACLE, link=SERVING,
                 oracle=_round(values[best]), oracle_beam=best,
                 rss=_round(achieved))

        if self.nstate is protocol.NEIGHBOR_TRACKING:
            station, beam = self.store.neighbor_beam
            si = self.index[station]
            nb_budget = self.ctx.budget(n, si)
            book = self.scenario.stations[si].codebook
            values = np.max([nb_budget.rss_all_rx((book, tx), self.rx_book)
                             for tx in range(len(book))], axis=0)
            best = int(np.argmax(values))
            self.log(trace.MEASUREMENT, role=trace.ORACLE, link=NEIGHBOR,
                     station=station, oracle=_round(values[best]),
                     oracle_beam=best, rss=_round(self.neighbor_rss(beam)))

    def _quiescent(self):
        """Return True iff nothing can change until the next scheduled event."""
        if (self.state is not protocol.LOS_OPERATION or
                self.pending_search or self.retry_at is not None or
                self.handover or not self.ctx.static or
                self.ctx.blockers(self.n)):
            return False
        store = self.store
        window = store.los_window
        return (len(window) == self.cfg.ref_window and
                min(window) == max(window) == store.los_anchor_rss)

    def _skip_target(self):
        """Return the next slot at which something can happen."""
        n = self.n
        targets = [self.horizon_slots]
        stride = self.scenario.oracle_stride * self.period
        if stride:
            targets.append((n // stride + 1) * stride)
        occasion = self._next_occasion(n + 1)
        if occasion is not None:
            targets.append(occasion)
        if self.neighbor_pending is not None:
            targets.append(self.neighbor_pending[0])
        arrival = mobility.next_arrival(self.scenario.blockers,
                                        self.ctx.time(n),
                                        self.scenario.horizon)
        if arrival is not None:
            targets.append(self._slots_for(arrival))
        return max(min(targets), n + 1)

    def step(self, n):
        """Simulate slot n; return the next slot to simulate."""
        self.n = n

        blocked = self.ctx.budget(n, self.serving).los_occluded()
        if blocked != self.in_blockage:
            self.in_blockage = blocked
            kind = trace.BLOCKAGE_START if blocked else trace.BLOCKAGE_END
            self.log(kind, station=self.serving_station.id)

        if self.pending_search and n >= self.pending_search[0]:
            self._finish_scan()
        if self.retry_at is not None and n >= self.retry_at:
            self._retry()
        if self.handover and n >= self.handover[0]:
            self._finish_handover()
        if self.neighbor_pending and n >= self.neighbor_pending[0]:
            self._finish_neighbor_scan()

        occasion = self._occasion(n)
        if occasion and n % self.period == 0:
            self._neighbor_occasion()
        if not occasion:
            self._serve()

        self._log_link()
        stride = self.scenario.oracle_stride * self.period
        if stride and n % stride == 0:
            self._log_oracle()

        if self._quiescent():
            return self._skip_target()
        return n + 1

    def run(self):
        """Run to the horizon and return the Trace."""
        self.n = 0
        self._start_scan("initial_access")
        n = 0
        while n < self.horizon_slots:
            n = self.step(n)

        self.n = self.horizon_slots
        if self.trace.in_outage():
            self.log(trace.OUTAGE_END, reason="horizon")
        if self.in_blockage:
            self.log(trace.BLOCKAGE_END, station=self.serving_station.id)
        return self.trace


def run(scenario):
    """Simulate `scenario` and return its Trace; deterministic in the seed."""
    return Engine(scenario).run()
