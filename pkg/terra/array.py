"""Phased-array geometry, beam codebooks and directional gain.

A codebook is a grid of beams: rows step through zenith steering angles and
columns through azimuth steering angles, and beam ids run 0..n-1 in
row-major order. All angles given to the functions in this module are local
to the array: azimuth is measured from boresight, zenith is positive toward
the ground and zero on the horizon.

The beam shape is the uniform-excitation array factor evaluated in sine
space. A planar array is separable, AF(az, zen) = AF_x(sin az) * AF_y(sin
zen); a linear array only has the azimuth factor and a wide elevation beam.
Gains are normalized so that a beam's steering direction gets exactly
`boresight_gain`.
"""

import math
from collections import namedtuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import diric

from terra.errors import ConfigError, DomainError

LINEAR = "linear"
PLANAR = "planar"

# Array factor magnitude used in place of an exact null, about -240 dB.
_MIN_AF = 1e-12

# -3.0103 dB, half power.
HALF_POWER_DB = 10 * math.log10(0.5)


ArrayGeometry = namedtuple(
    "ArrayGeometry",
    ["kind", "elements_x", "elements_y", "spacing", "carrier",
     "boresight_gain", "front_to_back", "sidelobe_floor"],
    defaults=[LINEAR, 12, 1, 0.5, 60e9, 17.0, 30.0, None])
ArrayGeometry.__doc__ = """Shape of a uniform phased array.

kind (str) - "linear" or "planar".
elements_x (int) - Elements along the azimuth axis.
elements_y (int) - Elements along the zenith axis, 1 for linear arrays.
spacing (float) - Element spacing in wavelengths.
carrier (float) - Carrier frequency in Hz.
boresight_gain (float) - Gain in dB of a beam toward its steering direction.
front_to_back (float) - dB below boresight_gain for directions behind the
array.
sidelobe_floor (float) - If set, gains never drop more than this many dB
below boresight_gain. None evaluates sidelobes and nulls exactly.
"""


Beam = namedtuple("Beam", ["id", "steer_az", "steer_zen", "grid_pos"])
Beam.__doc__ = """One steerable beam of a codebook.

grid_pos is the (row, col) of the beam in the codebook grid.
"""


def check_geometry(geometry):
    """Raise ConfigError unless `geometry` describes a buildable array."""
    if geometry.kind not in (LINEAR, PLANAR):
        raise ConfigError(f"unknown array kind '{geometry.kind}'")
    if geometry.elements_x < 1 or geometry.elements_y < 1:
        raise ConfigError("array needs at least one element per axis")
    if geometry.kind == LINEAR and geometry.elements_y != 1:
        raise ConfigError("linear array must have elements_y = 1")
    if geometry.spacing <= 0:
        raise ConfigError("element spacing must be positive")
    if geometry.carrier <= 0:
        raise ConfigError("carrier frequency must be positive")


class Codebook:
    """An ordered grid of beams synthesized for one array.

    geometry (ArrayGeometry) - The array the beams are steered on.
    beams (tuple of Beam) - Beams sorted by (row, col); beams[i].id == i.
    sector_az (tuple) - (start, end) of azimuth steering, degrees.
    sector_zen (tuple) - (start, end) of zenith steering, degrees.
    n_az (int) - Number of grid columns.
    n_zen (int) - Number of grid rows.

    A Codebook is never modified after construction, so it can be shared by
    concurrent simulation runs.
    """

    def __init__(self, geometry, beams, sector_az, sector_zen, n_az, n_zen):
        """Initialize codebook. Use make_codebook rather than this."""
        self.geometry = geometry
        self.beams = tuple(beams)
        self.sector_az = tuple(sector_az)
        self.sector_zen = tuple(sector_zen)
        self.n_az = n_az
        self.n_zen = n_zen

        self._u0 = np.sin(np.radians([b.steer_az for b in self.beams]))
        self._v0 = np.sin(np.radians([b.steer_zen for b in self.beams]))

    def __len__(self):
        return len(self.beams)

    def __contains__(self, beam):
        return isinstance(beam, int) and 0 <= beam < len(self.beams)

    def __eq__(self, other):
        return (isinstance(other, Codebook) and self.key() == other.key())

    def __hash__(self):
        return hash(self.key())

    def key(self):
        """Return a tuple that identifies this codebook."""
        return (self.geometry, self.sector_az, self.sector_zen,
                self.n_az, self.n_zen)

    def is_planar_grid(self):
        """Return True iff the codebook has more than one row and column."""
        return self.n_az > 1 and self.n_zen > 1

    def beam_at(self, row, col):
        """Return the id of the beam at grid position (row, col)."""
        return row * self.n_az + col

    def beam(self, beam_id):
        """Return the Beam with the given id, raising DomainError if none."""
        if beam_id not in self:
            raise DomainError(f"no beam {beam_id} in codebook of "
                              f"{len(self.beams)} beams")
        return self.beams[beam_id]

    def __repr__(self):  # pragma: no cover
        return (f"Codebook({self.geometry.kind}, {self.n_zen}x{self.n_az}, "
                f"az={self.sector_az}, zen={self.sector_zen})")


def _steering_axis(sector, n, name):
    """Return n uniformly spaced steering angles covering `sector`."""
    start, end = sector
    if n == 1:
        return [(start + end) / 2]
    if start >= end:
        raise ConfigError(f"invalid {name} sector {start}..{end} for {n} "
                          "beams")
    step = (end - start) / (n - 1)
    return [start + i * step for i in range(n)]


def make_codebook(geometry, sector_az, sector_zen=(0.0, 0.0), n_az=1,
                  n_zen=1):
    """Synthesize a codebook of n_az * n_zen beams covering the sector.

    Steering angles are uniformly spaced across each sector axis (both ends
    included), and beam ids are assigned in row-major grid order. A single
    beam along an axis points at the sector midpoint.
    """
    check_geometry(geometry)
    if n_az < 1 or n_zen < 1:
        raise ConfigError("codebook needs at least one beam")
    if geometry.kind == LINEAR and n_zen > 1:
        raise ConfigError("linear array cannot steer in zenith")

    az_angles = _steering_axis(sector_az, n_az, "azimuth")
    zen_angles = _steering_axis(sector_zen, n_zen, "zenith")

    beams = []
    for row, zen in enumerate(zen_angles):
        for col, az in enumerate(az_angles):
            beams.append(Beam(len(beams), az, zen, (row, col)))

    return Codebook(geometry, beams, sector_az, sector_zen, n_az, n_zen)


def wrap_angle(angle):
    """Wrap an angle in degrees into [-180, 180)."""
    return (angle + 180.0) % 360.0 - 180.0


def _array_factor(n, spacing, delta_u):
    """Return the normalized array factor magnitude for sine offset delta_u.

    scipy's Dirichlet kernel diric(x, n) is sin(n x / 2) / (n sin(x / 2)),
    which equals the n-element array factor at x = 2 pi d (u - u0).
    """
    if n == 1:
        return np.ones_like(np.asarray(delta_u, dtype=float))
    return np.abs(diric(2 * np.pi * spacing * np.asarray(delta_u), n))


def _pattern_db(geometry, af):
    """Convert array factor magnitudes to gain in dB."""
    gain = geometry.boresight_gain + 20 * np.log10(np.maximum(af, _MIN_AF))
    if geometry.sidelobe_floor is not None:
        gain = np.maximum(gain,
                          geometry.boresight_gain - geometry.sidelobe_floor)
    return gain


def _single_element(geometry):
    return geometry.elements_x * geometry.elements_y == 1


def gains(codebook, az, zen=0.0):
    """Return the gain in dB of every beam toward local direction (az, zen).

    The result is a numpy array indexed by beam id.
    """
    geometry = codebook.geometry
    if _single_element(geometry):
        return np.full(len(codebook), float(geometry.boresight_gain))

    az = wrap_angle(az)
    if abs(az) > 90.0:
        return np.full(len(codebook),
                       geometry.boresight_gain - geometry.front_to_back)

    af = _array_factor(geometry.elements_x, geometry.spacing,
                       math.sin(math.radians(az)) - codebook._u0)
    if geometry.kind == PLANAR:
        af = af * _array_factor(geometry.elements_y, geometry.spacing,
                                math.sin(math.radians(zen)) - codebook._v0)
    return _pattern_db(geometry, af)


def gain(codebook, beam, az, zen=0.0):
    """Return the gain in dB of `beam` toward local direction (az, zen).

    Directions outside the sector get whatever the array factor gives there
    (sidelobe level); directions behind the array get boresight_gain less
    front_to_back.
    """
    steer = codebook.beam(beam)
    geometry = codebook.geometry
    if _single_element(geometry):
        return float(geometry.boresight_gain)

    az = wrap_angle(az)
    if abs(az) > 90.0:
        return float(geometry.boresight_gain - geometry.front_to_back)

    af = _array_factor(geometry.elements_x, geometry.spacing,
                       math.sin(math.radians(az)) - codebook._u0[steer.id])
    if geometry.kind == PLANAR:
        af = af * _array_factor(
            geometry.elements_y, geometry.spacing,
            math.sin(math.radians(zen)) - codebook._v0[steer.id])
    return float(_pattern_db(geometry, af))


def envelope_gain(codebook, beams, az, zen=0.0):
    """Return the gain of a wide beam formed as the max over `beams`."""
    return float(np.max(gains(codebook, az, zen)[list(beams)]))


def best_beam(codebook, az, zen=0.0):
    """Return the id of the beam with the highest gain toward (az, zen).

    Ties go to the lowest beam id.
    """
    return int(np.argmax(gains(codebook, az, zen)))


def angular_neighbors(codebook, beam):
    """Return the ids of the beams adjacent to `beam` in the codebook grid.

    Adjacency is the Moore neighborhood (up to 8 beams) on a planar grid,
    which reduces to the two index neighbors on a one-row codebook. The
    input beam is never included.
    """
    row, col = codebook.beam(beam).grid_pos
    neighbors = set()
    for d_row in (-1, 0, 1):
        for d_col in (-1, 0, 1):
            if d_row == 0 and d_col == 0:
                continue
            r, c = row + d_row, col + d_col
            if 0 <= r < codebook.n_zen and 0 <= c < codebook.n_az:
                neighbors.add(codebook.beam_at(r, c))
    return frozenset(neighbors)


def zenith_neighbors_below(codebook, beam, count=2):
    """Return up to `count` beams in the same column steered further down.

    These are the candidates for the ground-reflected arrival, which shares
    the LoS azimuth and arrives below it.
    """
    row, col = codebook.beam(beam).grid_pos
    rows = range(row + 1, min(row + 1 + count, codebook.n_zen))
    return [codebook.beam_at(r, col) for r in rows]


def _half_power_edge(codebook, beam, axis, sign):
    """Return the angle offset from steering at which the gain is -3 dB.

    Searches from the steering direction toward `sign` (+1 or -1) up to the
    first array-factor null or the edge of visible space. Returns None if
    the beam never drops by 3 dB on that side.
    """
    steer = codebook.beam(beam)
    geometry = codebook.geometry
    if axis == "az":
        n, angle0 = geometry.elements_x, steer.steer_az
    else:
        n, angle0 = geometry.elements_y, steer.steer_zen
    if n == 1:
        return None

    def excess(offset):
        angle = angle0 + sign * offset
        if axis == "az":
            g = gain(codebook, beam, angle, steer.steer_zen)
        else:
            g = gain(codebook, beam, steer.steer_az, angle)
        return g - (geometry.boresight_gain + HALF_POWER_DB)

    u0 = math.sin(math.radians(angle0))
    u_null = u0 + sign / (n * geometry.spacing)
    if abs(u_null) < 1:
        limit = abs(math.degrees(math.asin(u_null)) - angle0)
    else:
        limit = 90.0 - sign * angle0
    # Stop just short of the null, where the gain is clamped.
    limit *= 0.999
    if limit <= 0 or excess(limit) > 0:
        return None
    return brentq(excess, 0.0, limit, xtol=1e-9)


def half_power_beamwidth(codebook, beam, axis="az"):
    """Return the -3 dB beamwidth of `beam` in degrees along `axis`.

    axis is "az" or "zen". Returns None when the pattern does not fall to
    half power on both sides (e.g. a single-element axis).
    """
    upper = _half_power_edge(codebook, beam, axis, +1)
    lower = _half_power_edge(codebook, beam, axis, -1)
    if upper is None or lower is None:
        return None
    return upper + lower


def half_power_edges(codebook, beam, axis="az"):
    """Return (lower, upper) -3 dB offsets of `beam` from its steering."""
    return (_half_power_edge(codebook, beam, axis, -1),
            _half_power_edge(codebook, beam, axis, +1))


def codebook_rows(codebook):
    """Return export rows (beam_id, row, col, steer_az_deg, steer_zen_deg)."""
    return [(b.id, b.grid_pos[0], b.grid_pos[1], b.steer_az, b.steer_zen)
            for b in codebook.beams]


def pattern_rows(codebook, beams, angles, axis="az"):
    """Return export rows (beam_id, angle_deg, gain_db) for plot emission.

    Each beam is cut along `axis` through its own steering direction.
    """
    rows = []
    for beam in beams:
        steer = codebook.beam(beam)
        for angle in angles:
            if axis == "az":
                g = gain(codebook, beam, angle, steer.steer_zen)
            else:
                g = gain(codebook, beam, steer.steer_az, angle)
            rows.append((beam, angle, g))
    return rows
