"""Standard-Gaussian latent space: density, chi-square radii and samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "gaussian_logdensity",
    "gammainc_lower",
    "chi2_cdf",
    "chi2_quantile",
    "ConfidenceSpec",
    "confidence_spec",
    "LatentSampleSet",
    "sample_ball",
    "sample_prior",
    "neighborhood_samples",
    "DEFAULT_LEVELS",
]

DEFAULT_LEVELS = (0.25, 0.5, 0.9)

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 10_000


def gaussian_logdensity(z) -> float:
    """Log of the standard normal density in ``len(z)`` dimensions."""
    z = np.asarray(z, dtype=np.float64)
    k = z.shape[-1]
    return -0.5 * k * math.log(2 * math.pi) - 0.5 * np.sum(z * z, axis=-1)


def _series(a, x):
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction(a, x):
    # Q(a, x) via modified Lentz on the Legendre continued fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function ``P(a, x)``.

    Uses the power series for ``x < a + 1`` and the continued fraction for
    the upper tail otherwise.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _series(a, x))
    return max(0.0, 1.0 - _continued_fraction(a, x))


def chi2_cdf(k: int, q: float) -> float:
    return gammainc_lower(k / 2.0, q / 2.0)


def chi2_quantile(k: int, p: float, tol: float = 1e-10) -> float:
    """Inverse chi-square CDF with ``k`` degrees of freedom, by bisection."""
    if int(k) != k or k < 1:
        raise ValueError("degrees of freedom must be a positive integer")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"probability must lie in [0, 1), got {p}")
    if p == 0.0:
        return 0.0
    lo, hi = 0.0, k + 40.0 * math.sqrt(k) + 100.0
    while chi2_cdf(k, hi) < p:  # extreme p only
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if chi2_cdf(k, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ConfidenceSpec:
    """Confidence levels ``1 - alpha`` and matching latent-ball radii."""

    levels: tuple
    radii: tuple
    k: int


def confidence_spec(k: int, levels=DEFAULT_LEVELS) -> ConfidenceSpec:
    levels = tuple(float(x) for x in levels)
    if not levels:
        raise ValueError("at least one confidence level is required")
    if any(not 0.0 < x < 1.0 for x in levels):
        raise ValueError("confidence levels must lie in (0, 1)")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("confidence levels must be strictly increasing")
    return ConfidenceSpec(levels, tuple(math.sqrt(chi2_quantile(k, x)) for x in levels), int(k))


@dataclass(frozen=True, eq=False)
class LatentSampleSet:
    """Latent points plus how they were drawn.

    ``kind`` is ``"ball"``, ``"surface"``, ``"prior"`` or ``"neighborhood"``.
    Ball and surface sets keep their radius-free ``unit`` points so that
    ``points == radius * unit`` exactly.
    """

    points: np.ndarray
    kind: str
    seed: int
    level: float = None
    radius: float = None
    unit: np.ndarray = None

    def __len__(self):
        return len(self.points)

    def rescaled(self, radius: float, level: float = None) -> "LatentSampleSet":
        """Same unit directions and depths at another radius."""
        if self.unit is None:
            raise ValueError("only ball/surface sample sets can be rescaled")
        return LatentSampleSet(radius * self.unit, self.kind, self.seed, level, radius, self.unit)


def _unit_ball(k, count, seed, surface):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, k))
    u = rng.random(count)
    direction = g / np.linalg.norm(g, axis=1, keepdims=True)
    if surface:
        return direction
    return direction * (u ** (1.0 / k))[:, None]


def sample_ball(k: int, level: float, count: int, seed: int, mode: str = "ball") -> LatentSampleSet:
    """Uniform samples in the latent ball (or on its sphere) at confidence ``level``.

    The same ``(k, count, seed, mode)`` yields the same unit directions and
    depths for every level, so smaller-level sets are exact rescalings of
    larger-level ones.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if mode not in ("ball", "surface"):
        raise ValueError("mode must be 'ball' or 'surface'")
    radius = math.sqrt(chi2_quantile(k, level))
    unit = _unit_ball(k, count, seed, mode == "surface")
    return LatentSampleSet(radius * unit, mode, seed, level, radius, unit)


def sample_prior(k: int, count: int, seed: int) -> LatentSampleSet:
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return LatentSampleSet(rng.standard_normal((count, k)), "prior", seed)


def neighborhood_samples(centers, sigma: float, seed: int) -> LatentSampleSet:
    """One draw from ``N(center, sigma^2 I)`` per center."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if sigma == 0:
        return LatentSampleSet(centers.copy(), "neighborhood", seed)
    rng = np.random.default_rng(seed)
    return LatentSampleSet(centers + sigma * rng.standard_normal(centers.shape), "neighborhood", seed)
