"""Received signal strength over the LoS and ground-reflected paths.

Positions are (x, y, height) in meters and directions are (az, zen) in
degrees with zenith positive toward the ground. A link carries at most two
paths: the direct LoS ray and one ground bounce found with the image method.
Paths are resolved by the narrow beams at both ends, so the received power
is the strongest single path (no coherent sum), floored at the noise floor.

Pedestrians are vertical cylinders. A blocker obstructs the heights between
its `clearance` (the gap under the torso, 0 for a body that reaches the
ground) and its `height`.
"""

import math
from collections import namedtuple

import numpy as np

import terra.array as array
from terra.errors import ConfigError, DomainError, SimError, error_collector

SPEED_OF_LIGHT = 299792458.0

LOS = "los"
GROUND_REFLECTION = "ground_reflection"

# Measured GR-to-LoS gap in dB per transmitter tilt, one table per surface.
# Each value is -60 dBm minus the mean ground-reflected RSS at that tilt.
CONCRETE = ((0.0, 6.0), (10.0, 4.6), (20.0, 4.05))
GRAVEL = ((0.0, 6.0), (10.0, 4.6), (20.0, 4.35))
INDOOR_TILES = ((0.0, 5.85), (10.0, 4.475), (20.0, 4.35))

SURFACES = {
    "concrete": CONCRETE,
    "gravel": GRAVEL,
    "indoor": INDOOR_TILES,
}

# The measurement link: transmitter 6 m away at 2.5 m, receiver at 1 m,
# a 1.78 m pedestrian in between.
TABLE_D_TR = 6.0
TABLE_H_T = 2.5
TABLE_H_R = 1.0
TABLE_H_B = 1.78
TABLE_RSS_LOS = -60.0


Pose = namedtuple("Pose", ["position", "boresight_az", "boresight_zen"],
                  defaults=[0.0, 0.0])
Pose.__doc__ = """Position (x, y, height) and array orientation.

boresight_zen is the tilt of the array, positive toward the ground.
"""


Blocker = namedtuple("Blocker", ["position", "height", "width", "clearance"],
                     defaults=[TABLE_H_B, 0.4, 0.0])
Blocker.__doc__ = """A pedestrian at 2-D `position`.

height (float) - Top of the body, H_B.
width (float) - Body diameter.
clearance (float) - Height below which the body does not obstruct.
"""


PathComponent = namedtuple("PathComponent",
                           ["kind", "length", "depart", "arrive",
                            "extra_loss"])
PathComponent.__doc__ = """One propagation path.

depart (tuple) - Global (az, zen) at the transmitter.
arrive (tuple) - Global (az, zen) at the receiver, pointing back along the
incoming ray.
extra_loss (float) - Loss in dB on top of free-space spreading.
"""


ChannelConfig = namedtuple(
    "ChannelConfig",
    ["carrier", "tx_power", "system_loss", "gr_loss_table",
     "blockage_attenuation", "noise_floor", "decode_threshold",
     "ground_reflection"],
    defaults=[60e9, 20.0, 0.0, CONCRETE, 20.0, -78.0, None, True])
ChannelConfig.__doc__ = """Link-level constants.

decode_threshold defaults to noise_floor + 10 dB; use make_channel_config
to get the default filled in and the invariants checked.
ground_reflection (bool) - False removes the ground bounce entirely.
"""


def make_channel_config(**fields):
    """Return a checked ChannelConfig with derived defaults filled in."""
    cfg = ChannelConfig(**fields)
    if cfg.decode_threshold is None:
        cfg = cfg._replace(decode_threshold=cfg.noise_floor + 10.0)
    if cfg.carrier <= 0:
        raise ConfigError("carrier frequency must be positive")
    if cfg.blockage_attenuation <= 0:
        raise ConfigError("blockage attenuation must be positive")
    if cfg.decode_threshold <= cfg.noise_floor:
        raise ConfigError("decode threshold must be above the noise floor")
    if not cfg.gr_loss_table:
        raise ConfigError("ground-reflection loss table is empty")
    table = tuple(sorted((float(t), float(l)) for t, l in cfg.gr_loss_table))
    if any(loss < 0 for _, loss in table):
        raise ConfigError("ground-reflection losses must be non-negative")
    return cfg._replace(gr_loss_table=table)


def fspl(d, f):
    """Return the free-space path loss in dB over d meters at f Hz."""
    if d <= 0:
        raise DomainError(f"path length must be positive, got {d}")
    if f <= 0:
        raise DomainError(f"frequency must be positive, got {f}")
    return 20 * math.log10(4 * math.pi * d * f / SPEED_OF_LIGHT)


def d_br_max(d_tr, h_t, h_r, h_b):
    """Return the farthest blocker-to-receiver distance that still blocks.

    A blocker of height h_b standing on the line between a transmitter at
    h_t and a receiver at h_r (d_tr apart horizontally) cuts the LoS ray
    only when it is at most d_tr * (h_b - h_r) / (h_t - h_r) from the
    receiver. Heights outside [h_r, h_t] are clamped, with a warning.
    """
    if h_t <= h_r:
        raise DomainError("transmitter must be higher than the receiver")
    clamped = min(max(h_b, h_r), h_t)
    if clamped != h_b:
        error_collector.add(SimError(
            f"blocker height {h_b} m clamped to {clamped} m", warning=True))
    return d_tr * (clamped - h_r) / (h_t - h_r)


def _direction(src, dst):
    """Return global (az, zen) of the ray from src toward dst."""
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    horizontal = math.hypot(dx, dy)
    dz = dst[2] - src[2]
    az = math.degrees(math.atan2(dy, dx)) if horizontal > 0 else 0.0
    zen = math.degrees(math.atan2(-dz, horizontal))
    return az, zen


def local_direction(pose, direction):
    """Return `direction` relative to the array orientation of `pose`."""
    az, zen = direction
    return (array.wrap_angle(az - pose.boresight_az),
            zen - pose.boresight_zen)


def los_path(tx, rx):
    """Return the direct path from tx to rx."""
    p, q = tx.position, rx.position
    length = math.dist(p, q)
    return PathComponent(LOS, length, _direction(p, q), _direction(q, p),
                         0.0)


def gr_gap(table, tilt):
    """Return the GR-to-LoS gap for `tilt`, interpolated in the table.

    Tilts outside the table take the nearest end value.
    """
    tilts = [t for t, _ in table]
    losses = [l for _, l in table]
    return float(np.interp(tilt, tilts, losses))


def ground_reflection_path(tx, rx, cfg=None):
    """Return the single ground bounce from tx to rx (image method).

    The bounce shares the LoS azimuth at both ends and arrives from below
    the horizon. The table gap is measured against LoS, and part of it is
    the bounce's longer spreading distance, so only the remainder is booked
    as extra_loss.
    """
    cfg = cfg or make_channel_config()
    p, q = tx.position, rx.position
    h_t, h_r = p[2], q[2]
    if h_t <= 0 or h_r <= 0:
        raise DomainError("ground reflection needs both ends above ground")

    horizontal = math.hypot(q[0] - p[0], q[1] - p[1])
    length = math.hypot(horizontal, h_t + h_r)
    dive = math.degrees(math.atan2(h_t + h_r, horizontal))

    if horizontal > 0:
        az_out = math.degrees(math.atan2(q[1] - p[1], q[0] - p[0]))
        az_back = math.degrees(math.atan2(p[1] - q[1], p[0] - q[0]))
    else:
        az_out = az_back = 0.0

    excess = 0.0
    los_length = math.dist(p, q)
    if los_length > 0:
        excess = fspl(length, cfg.carrier) - fspl(los_length, cfg.carrier)
    extra = max(gr_gap(cfg.gr_loss_table, tx.boresight_zen) - excess, 0.0)

    return PathComponent(GROUND_REFLECTION, length, (az_out, dive),
                         (az_back, dive), extra)


def bounce_point(tx, rx):
    """Return the (x, y, 0) point where the ground reflection bounces."""
    p, q = tx.position, rx.position
    share = p[2] / (p[2] + q[2])
    return (p[0] + share * (q[0] - p[0]), p[1] + share * (q[1] - p[1]), 0.0)


def _segment_blocked(p0, p1, blocker):
    """Return True iff the 3-D segment p0-p1 passes through the blocker."""
    cx, cy = blocker.position
    radius = blocker.width / 2
    ax, ay = p0[0] - cx, p0[1] - cy
    bx, by = p1[0] - p0[0], p1[1] - p0[1]

    # Parameter range over which the horizontal projection is inside the
    # blocker's footprint.
    qa = bx * bx + by * by
    qb = 2 * (ax * bx + ay * by)
    qc = ax * ax + ay * ay - radius * radius
    if qa == 0:
        if qc > 0:
            return False
        s_lo, s_hi = 0.0, 1.0
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            return False
        root = math.sqrt(disc)
        s_lo = max((-qb - root) / (2 * qa), 0.0)
        s_hi = min((-qb + root) / (2 * qa), 1.0)
        if s_lo > s_hi:
            return False

    z_lo = p0[2] + s_lo * (p1[2] - p0[2])
    z_hi = p0[2] + s_hi * (p1[2] - p0[2])
    return (min(z_lo, z_hi) <= blocker.height and
            max(z_lo, z_hi) >= blocker.clearance)


def blocker_occludes(tx, rx, blocker):
    """Return True iff the blocker intersects the LoS segment tx-rx."""
    return _segment_blocked(tx.position, rx.position, blocker)


def path_occluded(tx, rx, path, blocker):
    """Return True iff the blocker intersects `path` (both bounce legs)."""
    if path.kind == LOS:
        return blocker_occludes(tx, rx, blocker)
    bounce = bounce_point(tx, rx)
    return (_segment_blocked(tx.position, bounce, blocker) or
            _segment_blocked(bounce, rx.position, blocker))


def link_paths(cfg, tx, rx):
    """Return the paths between tx and rx under `cfg`."""
    paths = [los_path(tx, rx)]
    if (cfg.ground_reflection and tx.position[2] > 0 and
            rx.position[2] > 0):
        paths.append(ground_reflection_path(tx, rx, cfg))
    return paths


class LinkBudget:
    """Everything about one tx-rx link at one instant except the beams.

    Building the budget does the geometry and occlusion work once; the rss
    of any beam pair is then a couple of gain evaluations.

    entries (list) - (path, power, local depart, local arrive, occluded)
    tuples, where power is the received power in dBm before beam gains and
    before any blockage attenuation.
    """

    def __init__(self, cfg, tx, rx, blockers=()):
        """Compute paths, losses and occlusion for the link."""
        self.cfg = cfg
        self.tx = tx
        self.rx = rx
        self.entries = []
        for path in link_paths(cfg, tx, rx):
            if path.length <= 0:
                continue
            power = (cfg.tx_power - fspl(path.length, cfg.carrier)
                     - cfg.system_loss - path.extra_loss)
            self.entries.append((path, power,
                                 local_direction(tx, path.depart),
                                 local_direction(rx, path.arrive),
                                 False))
        if blockers:
            self.entries = self._occlude(blockers)

    def _occlude(self, blockers):
        entries = []
        for path, power, depart, arrive, _ in self.entries:
            occluded = any(path_occluded(self.tx, self.rx, path, b)
                           for b in blockers)
            entries.append((path, power, depart, arrive, occluded))
        return entries

    def occluded_by(self, blockers):
        """Return a copy of this budget with `blockers` in place.

        Occlusion flags of this budget are ignored; the copy reflects
        exactly the given blockers.
        """
        other = LinkBudget.__new__(LinkBudget)
        other.cfg = self.cfg
        other.tx = self.tx
        other.rx = self.rx
        other.entries = self._occlude(blockers)
        return other

    def occlusion(self):
        """Return the tuple of occlusion flags, one per path."""
        return tuple(occluded for *_, occluded in self.entries)

    def los_occluded(self):
        """Return True iff the LoS path is blocked."""
        return any(path.kind == LOS and occluded
                   for path, _, _, _, occluded in self.entries)

    def _powers(self):
        for path, power, depart, arrive, occluded in self.entries:
            if occluded:
                power -= self.cfg.blockage_attenuation
            yield path, power, depart, arrive

    def path_rss(self, tx_beam, rx_beam):
        """Return {path kind: rss before the noise-floor clamp}."""
        tx_book, tx_id = tx_beam
        rx_book, rx_id = rx_beam
        result = {}
        for path, power, depart, arrive in self._powers():
            result[path.kind] = (power
                                 + array.gain(tx_book, tx_id, *depart)
                                 + array.gain(rx_book, rx_id, *arrive))
        return result

    def rss(self, tx_beam, rx_beam):
        """Return the received signal strength for a beam pair."""
        best = max(self.path_rss(tx_beam, rx_beam).values(),
                   default=self.cfg.noise_floor)
        return max(best, self.cfg.noise_floor)

    def rss_envelope(self, tx_beam, rx_book, rx_ids):
        """Return the rss with a wide receive beam covering `rx_ids`."""
        tx_book, tx_id = tx_beam
        best = self.cfg.noise_floor
        for _, power, depart, arrive in self._powers():
            value = (power + array.gain(tx_book, tx_id, *depart)
                     + array.envelope_gain(rx_book, rx_ids, *arrive))
            best = max(best, value)
        return best

    def rss_all_rx(self, tx_beam, rx_book):
        """Return a numpy array of rss over every beam of `rx_book`."""
        tx_book, tx_id = tx_beam
        best = np.full(len(rx_book), self.cfg.noise_floor)
        for _, power, depart, arrive in self._powers():
            value = (power + array.gain(tx_book, tx_id, *depart)
                     + array.gains(rx_book, *arrive))
            best = np.maximum(best, value)
        return best

    def rss_best_tx(self, tx_book, rx_beam):
        """Return the rss of `rx_beam` against the best beam of `tx_book`.

        This is what a receiver sees at the peak of a full transmit sweep.
        """
        rx_book, rx_id = rx_beam
        best = self.cfg.noise_floor
        for _, power, depart, arrive in self._powers():
            value = (power + float(np.max(array.gains(tx_book, *depart)))
                     + array.gain(rx_book, rx_id, *arrive))
            best = max(best, value)
        return best

    def best_tx_beam(self, tx_book):
        """Return the transmit beam with the most gain toward the LoS path.

        Falls back to the first remaining path when there is no LoS.
        """
        if not self.entries:
            return 0
        path, _, depart, _, _ = self.entries[0]
        return array.best_beam(tx_book, *depart)


def rss(cfg, tx, rx, tx_beam, rx_beam, blockers=()):
    """Return the received signal strength in dBm.

    tx_beam and rx_beam are (Codebook, beam id) pairs. Each path gets
    tx_power + both beam gains - free-space loss - system_loss - extra_loss,
    less blockage_attenuation if a blocker cuts it; the result is the
    strongest path, never below the noise floor.
    """
    return LinkBudget(cfg, tx, rx, blockers).rss(tx_beam, rx_beam)


LinkGeometry = namedtuple("LinkGeometry", ["tx", "rx", "tx_beam", "rx_beam"])
LinkGeometry.__doc__ = """A tx-rx pair with the beams each end listens on."""


def calibrate_system_loss(cfg, geometry, target_rss_los):
    """Return the system_loss that makes the LoS rss equal the target.

    The LoS rss is evaluated with system_loss = 0 and without the noise
    floor clamp, so the result is the dB difference to `target_rss_los`.
    """
    bare = cfg._replace(system_loss=0.0)
    budget = LinkBudget(bare, geometry.tx, geometry.rx)
    los_rss = budget.path_rss(geometry.tx_beam, geometry.rx_beam)[LOS]
    return los_rss - target_rss_los


def reference_link(tilt=10.0, rx_zen=None, d_tr=TABLE_D_TR, h_t=TABLE_H_T,
                   h_r=TABLE_H_R, tx_geometry=None, rx_geometry=None):
    """Return the measurement LinkGeometry with exactly aligned beams.

    The transmitter stands at the origin facing +x, tilted by `tilt`; the
    receiver faces back toward it. The receive codebook is a single beam
    steered at zenith `rx_zen` (LoS arrival if None), and the transmit
    codebook a single beam toward the receiver's azimuth.
    """
    tx = Pose((0.0, 0.0, h_t), 0.0, tilt)
    rx = Pose((d_tr, 0.0, h_r), 180.0, 0.0)
    if rx_zen is None:
        rx_zen = local_direction(rx, los_path(tx, rx).arrive)[1]

    tx_geometry = tx_geometry or array.ArrayGeometry(array.LINEAR, 12, 1)
    rx_geometry = rx_geometry or array.ArrayGeometry(array.PLANAR, 6, 6)
    tx_book = array.make_codebook(tx_geometry, (0.0, 0.0))
    rx_book = array.make_codebook(rx_geometry, (0.0, 0.0), (rx_zen, rx_zen))
    return LinkGeometry(tx, rx, (tx_book, 0), (rx_book, 0))
