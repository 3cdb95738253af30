"""Ensemble loading, feature-space conversion and synthetic ensembles."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from .geometry import Polyline, ScalarGrid, arc_length, marching_squares, resample_arclength

__all__ = [
    "Ensemble",
    "FeatureVector",
    "NormalizationParams",
    "load_ensemble",
    "save_ensemble",
    "ensemble_to_json",
    "load_grid",
    "to_features",
    "from_features",
    "stack_features",
    "synth_ensemble",
    "FAMILIES",
]

logger = logging.getLogger(__name__)

M = 2  # spatial dimension


@dataclass(frozen=True)
class Ensemble:
    members: tuple
    name: str = "ensemble"
    domain_bounds: tuple = None

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 2:
            raise DataError("an ensemble needs at least 2 members")
        bounds = self.domain_bounds
        if bounds is None:
            pts = np.vstack([m.points for m in members])
            bounds = (*pts.min(axis=0), *pts.max(axis=0))
        bounds = tuple(float(b) for b in bounds)
        if not (bounds[2] > bounds[0] or bounds[3] > bounds[1]):
            raise DataError(f"empty domain bounds {bounds}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "domain_bounds", bounds)

    def __len__(self):
        return len(self.members)

    @property
    def diagonal(self):
        xmin, ymin, xmax, ymax = self.domain_bounds
        return float(np.hypot(xmax - xmin, ymax - ymin))


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """A resampled contour flattened as ``(x0, y0, x1, y1, ...)``."""

    values: np.ndarray
    s: int
    closed: bool

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.s * M:
            raise ValueError(f"feature vector length {v.size} != s*m = {self.s * M}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.s, self.closed) == (other.s, other.closed) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None


@dataclass(frozen=True)
class NormalizationParams:
    """World -> feature coordinates: ``(p - center) * scale``."""

    center: tuple = (0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("normalization scale must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def from_bounds(cls, bounds):
        xmin, ymin, xmax, ymax = bounds
        return cls(((xmin + xmax) / 2, (ymin + ymax) / 2), 2.0 / max(xmax - xmin, ymax - ymin))

    def apply(self, pts):
        return (np.asarray(pts, dtype=np.float64) - np.asarray(self.center)) * self.scale

    def invert(self, pts):
        return np.asarray(pts, dtype=np.float64) / self.scale + np.asarray(self.center)

    @property
    def window(self):
        """The square world window that maps onto ``[-1, 1]^2``."""
        h = 1.0 / self.scale
        cx, cy = self.center
        return (cx - h, cy - h, cx + h, cy + h)


def to_features(e: Ensemble, s: int = 100, align: bool = False):
    """Resample, normalize and flatten every member of ``e``.

    Returns ``(features, norm)`` where ``norm`` is the shared transform built
    from the ensemble's domain bounds.
    """
    if s < 2:
        raise ValueError("s must be at least 2")
    norm = NormalizationParams.from_bounds(e.domain_bounds)
    feats = []
    for member in e.members:
        pts = resample_arclength(member, s, align=align).points
        feats.append(FeatureVector(norm.apply(pts).reshape(-1), s, member.closed))
    return feats, norm


def from_features(v: FeatureVector, p: NormalizationParams) -> Polyline:
    pts = p.invert(np.asarray(v.values).reshape(-1, M))
    return Polyline(pts, closed=v.closed)


def stack_features(features) -> np.ndarray:
    """Stack feature vectors into an ``(n, s*m)`` matrix."""
    return np.vstack([f.values for f in features])


# --- file formats ---------------------------------------------------------------


def ensemble_to_json(e: Ensemble) -> str:
    doc = {
        "name": e.name,
        "bounds": list(e.domain_bounds),
        "members": [
            {"closed": m.closed, "points": m.points.tolist()} for m in e.members
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def save_ensemble(e: Ensemble, path):
    Path(path).write_text(ensemble_to_json(e))


def _parse_polyline_json(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "members" not in doc:
        raise FormatError(f"{path}: expected an object with a 'members' list")
    members = []
    for i, rec in enumerate(doc["members"]):
        try:
            members.append(Polyline(np.asarray(rec["points"], dtype=np.float64),
                                    closed=bool(rec.get("closed", False))))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad member: {exc}", index=i) from exc
    bounds = doc.get("bounds")
    if bounds is not None and len(bounds) != 4:
        raise FormatError(f"{path}: 'bounds' must have 4 entries")
    return Ensemble(members, name=str(doc.get("name", Path(path).stem)), domain_bounds=bounds)


def load_grid(path) -> ScalarGrid:
    """Read one text grid: header ``rows cols xmin ymin cellsize`` then rows of values."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty grid file", index=0)
    head = lines[0].split()
    try:
        rows, cols = int(head[0]), int(head[1])
        xmin, ymin, cell = (float(t) for t in head[2:5])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: bad header {lines[0]!r}", index=1) from exc
    if len(lines) - 1 != rows:
        raise FormatError(f"{path}: expected {rows} data lines, found {len(lines) - 1}")
    data = np.empty((rows, cols))
    for r, ln in enumerate(lines[1:]):
        try:
            row = [float(t) for t in ln.split()]
        except ValueError as exc:
            raise FormatError(f"{path}: unparsable value", index=r + 2) from exc
        if len(row) != cols:
            raise FormatError(f"{path}: expected {cols} values, got {len(row)}", index=r + 2)
        data[r] = row
    return ScalarGrid(rows, cols, data, (xmin, ymin), cell, name=Path(path).name)


def _load_grid_set(path, iso):
    if iso is None:
        raise ValueError("grid-set input requires an isovalue")
    files = sorted(p for p in Path(path).iterdir() if p.is_file())
    if not files:
        raise FormatError(f"{path}: no grid files found")
    members, extents = [], []
    for f in files:
        grid = load_grid(f)
        contours = marching_squares(grid, iso)
        if not contours:
            raise DataError(f"member {f.name!r} has no contour at iso={iso}")
        if len(contours) > 1:
            logger.warning("member %s: %d contours, keeping the longest, dropped %d",
                           f.name, len(contours), len(contours) - 1)
        members.append(max(contours, key=arc_length))
        extents.append(grid.extent)
    ext = np.array(extents)
    bounds = (ext[:, 0].min(), ext[:, 1].min(), ext[:, 2].max(), ext[:, 3].max())
    return Ensemble(members, name=Path(path).name, domain_bounds=bounds)


def load_ensemble(path, format="polyline-json", iso=None) -> Ensemble:
    """Load an ensemble in ``polyline-json`` or ``grid-set`` format."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if format == "polyline-json":
        return _parse_polyline_json(path)
    if format == "grid-set":
        return _load_grid_set(path, iso)
    raise ValueError(f"unknown ensemble format {format!r}")


# --- synthetic families -----------------------------------------------------------


def _positive(params, *names):
    for name in names:
        if not params[name] > 0:
            raise ValueError(f"{name} must be positive, got {params[name]}")


def _perturbed_circle(n, rng, radius=1.0, eps_r=0.1, eps_c=0.1, n_points=200):
    _positive(dict(radius=radius, n_points=n_points), "radius", "n_points")
    if eps_r < 0 or eps_c < 0:
        raise ValueError("perturbation scales must be non-negative")
    theta = np.arange(n_points) * (2 * np.pi / n_points)
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    members = []
    for _ in range(n):
        r = radius * (1.0 + eps_r * rng.standard_normal())
        c = eps_c * rng.standard_normal(2)
        if not r > 0:
            raise ValueError("radius perturbation produced a non-positive radius")
        members.append(Polyline(c + r * ring, closed=True))
    pad = radius * (1.0 + 5 * eps_r) + 5 * eps_c
    return members, (-pad, -pad, pad, pad)


def _phase_sine_band(n, rng, amplitude=1.0, omega=1.0, length=2 * np.pi, offset_std=0.15,
                     phase_range=np.pi, n_points=200):
    _positive(dict(amplitude=amplitude, omega=omega, length=length, n_points=n_points),
              "amplitude", "omega", "length", "n_points")
    if offset_std < 0 or phase_range < 0:
        raise ValueError("offset_std and phase_range must be non-negative")
    x = np.linspace(0.0, length, n_points)
    members = []
    for _ in range(n):
        phi = rng.uniform(0.0, phase_range)
        b = offset_std * rng.standard_normal()
        members.append(Polyline(np.column_stack([x, amplitude * np.sin(omega * x + phi) + b])))
    half = max(length / 2, amplitude + 5 * offset_std) * 1.05
    cx = length / 2
    return members, (cx - half, -half, cx + half, half)


FAMILIES = {
    "perturbed-circle": _perturbed_circle,
    "phase-sine-band": _phase_sine_band,
}


def synth_ensemble(family: str, n: int, seed: int, **params) -> Ensemble:
    """Generate a deterministic synthetic ensemble.

    ``perturbed-circle``: closed circles with radius ``radius*(1 + eps_r*N)``
    and centers jittered by ``eps_c*N``.
    ``phase-sine-band``: open curves ``y = amplitude*sin(omega*x + phi) + b``
    with ``phi ~ U(0, phase_range)`` and ``b ~ N(0, offset_std^2)``.
    """
    if n < 2:
        raise ValueError("an ensemble needs at least 2 members")
    try:
        make = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None
    rng = np.random.default_rng(seed)
    members, bounds = make(n, rng, **params)
    return Ensemble(members, name=f"{family}-n{n}-seed{seed}", domain_bounds=bounds)
