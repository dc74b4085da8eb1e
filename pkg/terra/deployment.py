"""How dense a deployment must be for several stations to be in range.

Station locations are a homogeneous Poisson point process. A mobile sees
every station within the range R, so the number of visible stations is
Poisson with mean lambda * pi * R^2.
"""

import math
from collections import namedtuple

import numpy as np
from scipy import optimize, stats

from terra.errors import ConfigError

VISIBILITY_MODEL = "stations within range R of the mobile (disk count)"

# Published densities that the disk-count model does not reproduce; they
# are echoed next to the computed curves, never asserted.
UNVERIFIED_ANNOTATIONS = (
    (100.0, 30.0, "about 30 stations per km^2 at 100 m range"),
    (300.0, 4.0, "four stations per km^2 at 300 m range"),
)


DensityQuery = namedtuple("DensityQuery",
                          ["range", "target_prob", "k", "lambda_grid"],
                          defaults=[0.9, 2, None])
DensityQuery.__doc__ = """One density question.

range (float) - Station range R in meters.
lambda_grid (sequence) - Densities per km^2 at which to sample the curve.
"""


def check_query(query):
    """Raise ConfigError unless the query is well-formed."""
    if query.range <= 0:
        raise ConfigError("range must be positive")
    if not 0 < query.target_prob < 1:
        raise ConfigError("target probability must be in (0, 1)")
    if query.k < 1:
        raise ConfigError("k must be at least 1")


def mean_visible(lam, r):
    """Return the mean number of stations within r meters at density lam."""
    return lam * math.pi * (r / 1000.0) ** 2


def prob_at_least_k(lam, r, k):
    """Return the probability that at least k stations are within r meters.

    lam (float) - Stations per km^2.
    """
    if lam < 0:
        raise ConfigError("density must be non-negative")
    if lam == 0:
        return 0.0
    return float(stats.poisson.sf(k - 1, mean_visible(lam, r)))


def min_density(r, target_prob=0.9, k=2):
    """Return the smallest density (per km^2) reaching target_prob.

    The probability is increasing in the density, so the answer is found by
    bisection on the mean count, well inside 1e-3 relative tolerance.
    """
    check_query(DensityQuery(r, target_prob, k))

    def excess(mu):
        return float(stats.poisson.sf(k - 1, mu)) - target_prob

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2
    mu = optimize.bisect(excess, 1e-12, hi, rtol=1e-9, xtol=1e-12)
    return mu / (math.pi * (r / 1000.0) ** 2)


def default_grid(lam_max, points=20):
    """Return `points` evenly spaced densities in (0, lam_max]."""
    return np.linspace(lam_max / points, lam_max, points)


DensityRow = namedtuple("DensityRow", ["range", "min_density", "curve"])
DensityRow.__doc__ = """One range of a density table.

curve (list) - (density per km^2, probability) pairs over the grid.
"""


def density_table(ranges, query):
    """Return one DensityRow per range in `ranges`.

    The query's range is ignored; its target probability, k and grid are
    applied to every range. Without a grid, each range gets 20 points up to
    twice its minimum density.
    """
    if not ranges:
        raise ConfigError("need at least one range")
    rows = []
    for r in ranges:
        check_query(query._replace(range=r))
        lam_star = min_density(r, query.target_prob, query.k)
        grid = (query.lambda_grid if query.lambda_grid is not None
                else default_grid(2 * lam_star))
        curve = [(float(lam), prob_at_least_k(float(lam), r, query.k))
                 for lam in grid]
        rows.append(DensityRow(r, lam_star, curve))
    return rows


def monte_carlo_prob(lam, r, k, samples=100000, seed=0):
    """Return (estimate, standard error) of prob_at_least_k by sampling.

    Each sample drops a Poisson process in the square [-R, R]^2 and counts
    the points inside the disk of radius R around the origin.
    """
    rng = np.random.default_rng([int(seed), 20])
    side = 2 * r / 1000.0
    counts = rng.poisson(lam * side * side, size=samples)
    total = int(counts.sum())
    inside = np.zeros(samples, dtype=np.int64)
    if total:
        points = rng.uniform(-side / 2, side / 2, size=(total, 2))
        hit = (np.hypot(points[:, 0], points[:, 1]) <= r / 1000.0)
        owner = np.repeat(np.arange(samples), counts)
        inside = np.bincount(owner, weights=hit, minlength=samples)
    p = float(np.mean(inside >= k))
    return p, math.sqrt(max(p * (1 - p), 1e-12) / samples)


def table_rows(rows, k, monte_carlo=0, seed=0):
    """Return CSV rows (R_m, lambda_per_km2, prob[, mc_prob]) for `rows`.

    Each range also gets a row at its minimum density.
    """
    out = []
    for row in rows:
        points = list(row.curve) + [(row.min_density, None)]
        for lam, prob in sorted(points, key=lambda p: p[0]):
            if prob is None:
                prob = prob_at_least_k(lam, row.range, k)
            record = [row.range, lam, prob]
            if monte_carlo:
                record.append(monte_carlo_prob(lam, row.range, k,
                                               monte_carlo, seed)[0])
            out.append(record)
    return out
