"""User trajectories and pedestrian blocker processes.

Both generators are stateless: a pose or a blocker set is a pure function
of the model, its seed and the time asked for. Randomness comes from numpy
generators seeded with (seed, stream, index) so that any instant can be
evaluated without replaying the past.
"""

import bisect
import functools
import math
from collections import namedtuple

import numpy as np

from terra.array import wrap_angle
from terra.channel import Blocker, Pose
from terra.errors import ConfigError

STATIC = "static"
LINEAR_WALK = "linear_walk"
ROTATIONAL = "rotational"
FREE_WALK = "free_walk"

KINDS = (STATIC, LINEAR_WALK, ROTATIONAL, FREE_WALK)

# Fastest boresight jitter of a hand-held phone, rad/s.
MAX_JITTER_RATE = 8.0

# Blocker events are generated in independent epochs of this many seconds.
EPOCH = 10.0

# Random stream ids, so different uses of one seed never share draws.
_STREAM_START = 1
_STREAM_WAYPOINTS = 2
_STREAM_JITTER = 3
_STREAM_BLOCKERS = 4


MobilityModel = namedtuple(
    "MobilityModel",
    ["kind", "speed", "angular_velocity", "trajectory_length", "heading",
     "bounds", "seed", "start", "boresight_az", "boresight_zen", "sector",
     "randomize_start", "look_at", "jitter_amplitude"],
    defaults=[STATIC, 1.0, 90.0, 2.0, 0.0, None, 0, (0.0, 0.0, 1.0), 0.0,
              0.0, (-55.0, 55.0), False, None, 10.0])
MobilityModel.__doc__ = """How the mobile moves and where its array points.

speed (float) - Walking speed, m/s.
angular_velocity (float) - Rotation rate of the rotational model, deg/s.
trajectory_length (float) - Length of a linear walk, meters.
heading (float) - Walking direction of a linear walk, degrees.
bounds (tuple) - (x_min, y_min, x_max, y_max) area of a free walk.
start (tuple) - Initial (x, y, height).
boresight_az (float) - Initial array azimuth.
boresight_zen (float) - Array tilt, positive toward the ground.
sector (tuple) - Azimuth range the rotational model sweeps back and forth.
randomize_start (bool) - Draw the starting point of the walk or of the
rotation sweep from the seed instead of using the configured one.
look_at (tuple) - If set, the array faces this (x, y) point instead of
following the walking direction.
jitter_amplitude (float) - Free-walk boresight jitter, degrees.
"""


def check_mobility(model):
    """Raise ConfigError unless the model can generate poses."""
    if model.kind not in KINDS:
        raise ConfigError(f"unknown mobility kind '{model.kind}'")
    if model.speed < 0:
        raise ConfigError("speed must be non-negative")
    if model.trajectory_length < 0:
        raise ConfigError("trajectory length must be non-negative")
    if model.start[2] < 0:
        raise ConfigError("mobile height must be non-negative")
    if model.kind == FREE_WALK:
        if not model.bounds:
            raise ConfigError("free walk requires bounds")
        x_min, y_min, x_max, y_max = model.bounds
        if x_min >= x_max or y_min >= y_max:
            raise ConfigError("free-walk bounds are empty")
        x, y, _ = model.start
        if not (x_min <= x <= x_max and y_min <= y <= y_max):
            raise ConfigError(f"free-walk start ({x}, {y}) lies outside its "
                              "bounds")
    if model.kind == ROTATIONAL:
        lo, hi = model.sector
        if lo >= hi:
            raise ConfigError("rotation sector is empty")


def _rng(seed, stream, index=0):
    return np.random.default_rng([int(seed), stream, int(index)])


def _facing(model, x, y, default_az):
    """Return the boresight azimuth at (x, y)."""
    if model.look_at is None:
        return default_az
    return math.degrees(math.atan2(model.look_at[1] - y,
                                   model.look_at[0] - x))


def _linear_pose(model, t):
    x0, y0, h = model.start
    heading = math.radians(model.heading)
    offset = 0.0
    if model.randomize_start:
        offset = (_rng(model.seed, _STREAM_START).uniform(-0.5, 0.5)
                  * model.trajectory_length)
    walked = offset + min(model.speed * t, model.trajectory_length)
    x = x0 + walked * math.cos(heading)
    y = y0 + walked * math.sin(heading)
    return Pose((x, y, h), _facing(model, x, y, model.boresight_az),
                model.boresight_zen)


def _rotation_phase(model):
    """Return the initial distance travelled along the unfolded sweep."""
    lo, hi = model.sector
    span = hi - lo
    if model.randomize_start:
        return _rng(model.seed, _STREAM_START).uniform(0.0, 2 * span)
    return min(max(model.boresight_az - lo, 0.0), span)


def _rotational_pose(model, t):
    lo, hi = model.sector
    span = hi - lo
    travelled = (_rotation_phase(model) + model.angular_velocity * t) \
        % (2 * span)
    if travelled <= span:
        az = lo + travelled
    else:
        az = lo + 2 * span - travelled
    return Pose(tuple(model.start), az, model.boresight_zen)


class _WalkPlan:
    """Waypoint legs of one free walk, generated on demand.

    legs - List of (t_start, (x0, y0), (x1, y1), duration) tuples covering
    [0, t_end) without gaps.
    """

    def __init__(self, model):
        self.model = model
        self.legs = []
        self.starts = []
        self.t_end = 0.0
        self.point = tuple(model.start[:2])

    def _waypoint(self, index):
        x_min, y_min, x_max, y_max = self.model.bounds
        rng = _rng(self.model.seed, _STREAM_WAYPOINTS, index)
        return (rng.uniform(x_min, x_max), rng.uniform(y_min, y_max))

    def leg_at(self, t):
        """Return the leg that covers time t, extending the plan if needed."""
        while self.t_end <= t:
            nxt = self._waypoint(len(self.legs))
            duration = math.dist(self.point, nxt) / self.model.speed
            # Degenerate zero-length legs would never cover any time.
            duration = max(duration, 1e-6)
            self.legs.append((self.t_end, self.point, nxt, duration))
            self.starts.append(self.t_end)
            self.t_end += duration
            self.point = nxt
        return self.legs[bisect.bisect_right(self.starts, t) - 1]


@functools.lru_cache(maxsize=256)
def _walk_plan(model):
    return _WalkPlan(model)


@functools.lru_cache(maxsize=256)
def _jitter_terms(model):
    """Return (amplitude deg, frequency Hz, phase rad) sinusoid terms.

    Amplitudes are scaled down if needed so the total angular rate never
    exceeds MAX_JITTER_RATE.
    """
    rng = _rng(model.seed, _STREAM_JITTER)
    freqs = rng.uniform(0.2, 1.0, size=3)
    phases = rng.uniform(0.0, 2 * math.pi, size=3)
    amps = np.full(3, model.jitter_amplitude / 3)
    max_rate = float(np.sum(np.radians(amps) * 2 * math.pi * freqs))
    if max_rate > MAX_JITTER_RATE:
        amps *= MAX_JITTER_RATE / max_rate
    return tuple(zip(amps.tolist(), freqs.tolist(), phases.tolist()))


def boresight_jitter(model, t):
    """Return the free-walk boresight jitter at time t, degrees."""
    return sum(a * math.sin(2 * math.pi * f * t + p) - a * math.sin(p)
               for a, f, p in _jitter_terms(model))


def _free_walk_pose(model, t):
    h = model.start[2]
    if model.speed == 0:
        x, y, _ = model.start
        heading = model.boresight_az
    else:
        t_start, (x0, y0), (x1, y1), duration = _walk_plan(model).leg_at(t)
        share = min((t - t_start) / duration, 1.0)
        x = x0 + share * (x1 - x0)
        y = y0 + share * (y1 - y0)
        heading = math.degrees(math.atan2(y1 - y0, x1 - x0))
    az = _facing(model, x, y, heading) + boresight_jitter(model, t)
    return Pose((x, y, h), wrap_angle(az), model.boresight_zen)


def pose_at(model, t):
    """Return the mobile's Pose at time t seconds.

    Linear walks stop at the end of the trajectory. Rotational motion holds
    position and sweeps the boresight back and forth across the sector at
    the angular velocity. Free walks follow seeded random waypoints inside
    the bounds, facing the walking direction (or look_at) plus jitter.
    """
    if t < 0:
        raise ConfigError(f"time must be non-negative, got {t}")
    if model.kind == STATIC:
        return Pose(tuple(model.start), model.boresight_az,
                    model.boresight_zen)
    elif model.kind == LINEAR_WALK:
        return _linear_pose(model, t)
    elif model.kind == ROTATIONAL:
        return _rotational_pose(model, t)
    else:
        return _free_walk_pose(model, t)


def is_static(model):
    """Return True iff the pose never changes."""
    return (model.kind == STATIC or
            (model.kind == LINEAR_WALK and
             (model.speed == 0 or model.trajectory_length == 0)) or
            (model.kind == ROTATIONAL and model.angular_velocity == 0))


def trajectory_rows(model, times):
    """Return export rows (t, x, y, boresight_az)."""
    rows = []
    for t in times:
        pose = pose_at(model, t)
        rows.append((t, pose.position[0], pose.position[1],
                     pose.boresight_az))
    return rows


BlockerProcess = namedtuple(
    "BlockerProcess",
    ["arrival_rate", "duration_mean", "duration_jitter", "crossing_speed",
     "crossing_line", "seed", "height", "width", "clearance",
     "gr_availability", "interval", "offset"],
    defaults=[0.0, 0.2, 0.25, 1.0, ((3.5, -1.0), (3.5, 1.0)), 0, 1.78, 0.4,
              0.8, 1.0, None, 0.0])
BlockerProcess.__doc__ = """Pedestrians crossing the link.

arrival_rate (float) - Poisson arrivals per second.
duration_mean (float) - Mean time a blocker stays on the crossing, seconds.
duration_jitter (float) - Durations are mean * (1 + jitter * U[-1, 1]).
crossing_speed (float) - Walking speed along the crossing line, m/s.
crossing_line (tuple) - ((x0, y0), (x1, y1)); a blocker is at the middle of
the line halfway through its life.
height, width (float) - Body size of every blocker.
clearance (float) - Leg gap of a blocker that leaves the ground reflection
free.
gr_availability (float) - Probability that a blocker keeps that gap; the
others obstruct down to the ground.
interval (float) - If set, blockers arrive every `interval` seconds starting
at `offset` instead of at Poisson times.
"""


BlockerEvent = namedtuple("BlockerEvent", ["start", "duration", "clearance"])


def check_blockers(process):
    """Raise ConfigError unless the process can generate blockers."""
    if process.arrival_rate < 0:
        raise ConfigError("blocker arrival rate must be non-negative")
    if process.duration_mean <= 0:
        raise ConfigError("blocker duration must be positive")
    if not 0 <= process.duration_jitter < 1:
        raise ConfigError("blocker duration jitter must be in [0, 1)")
    if process.duration_mean * (1 + process.duration_jitter) >= EPOCH:
        raise ConfigError(f"blocker durations must stay below {EPOCH} s")
    if process.crossing_speed < 0:
        raise ConfigError("crossing speed must be non-negative")
    if process.height <= 0 or process.width <= 0:
        raise ConfigError("blocker height and width must be positive")
    if not 0 <= process.gr_availability <= 1:
        raise ConfigError("gr_availability must be a probability")
    if process.interval is not None and process.interval <= 0:
        raise ConfigError("blocker interval must be positive")


@functools.lru_cache(maxsize=1024)
def epoch_events(process, epoch):
    """Return the BlockerEvents that start in the given epoch, by start."""
    if epoch < 0:
        return ()
    rng = _rng(process.seed, _STREAM_BLOCKERS, epoch)
    t0 = epoch * EPOCH
    if process.interval is not None:
        first = math.ceil((t0 - process.offset) / process.interval)
        starts = []
        k = max(first, 0)
        while process.offset + k * process.interval < t0 + EPOCH:
            starts.append(process.offset + k * process.interval)
            k += 1
        starts = np.array(starts)
    elif process.arrival_rate > 0:
        count = rng.poisson(process.arrival_rate * EPOCH)
        starts = np.sort(rng.uniform(t0, t0 + EPOCH, size=count))
    else:
        return ()

    spread = rng.uniform(-1.0, 1.0, size=len(starts))
    keeps_gap = rng.random(size=len(starts)) < process.gr_availability
    events = []
    for start, u, gap in zip(starts.tolist(), spread.tolist(),
                             keeps_gap.tolist()):
        duration = process.duration_mean * (1 + process.duration_jitter * u)
        events.append(BlockerEvent(start, duration,
                                   process.clearance if gap else 0.0))
    return tuple(events)


def events_between(process, t0, t1):
    """Return all BlockerEvents starting in [t0, t1), by start time."""
    events = []
    for epoch in range(int(t0 // EPOCH), int(t1 // EPOCH) + 1):
        events.extend(e for e in epoch_events(process, epoch)
                      if t0 <= e.start < t1)
    return events


def _blocker(process, event, t):
    (x0, y0), (x1, y1) = process.crossing_line
    length = math.hypot(x1 - x0, y1 - y0)
    ux, uy = ((x1 - x0) / length, (y1 - y0) / length) if length else (0, 0)
    shift = process.crossing_speed * (t - event.start - event.duration / 2)
    position = ((x0 + x1) / 2 + ux * shift, (y0 + y1) / 2 + uy * shift)
    return Blocker(position, process.height, process.width, event.clearance)


def active_events(process, t):
    """Return the BlockerEvents alive at time t."""
    epoch = int(t // EPOCH)
    alive = []
    for e in epoch_events(process, epoch - 1) + epoch_events(process, epoch):
        if e.start <= t < e.start + e.duration:
            alive.append(e)
    return alive


def active_blockers(process, t):
    """Return the Blockers on the crossing at time t seconds."""
    if t < 0:
        raise ConfigError(f"time must be non-negative, got {t}")
    return [_blocker(process, e, t) for e in active_events(process, t)]


def next_arrival(process, t, horizon):
    """Return the first blocker start time in [t, horizon), or None."""
    epoch = int(t // EPOCH)
    while epoch * EPOCH < horizon:
        for e in epoch_events(process, epoch):
            if t <= e.start < horizon:
                return e.start
        epoch += 1
    return None
