"""Polylines, arc-length resampling and iso-contour extraction on 2-D grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidContourError

__all__ = [
    "Polyline",
    "ScalarGrid",
    "arc_length",
    "resample_arclength",
    "align_start",
    "marching_squares",
]


@dataclass(frozen=True, eq=False)
class Polyline:
    """An ordered 2-D point sequence, optionally closed.

    When ``closed`` is true the last point connects back to the first; the
    first point must not be repeated at the end.
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidContourError(f"points must have shape (n, 2), got {pts.shape}")
        if len(pts) < 2:
            raise InvalidContourError("a polyline needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise InvalidContourError("polyline contains non-finite coordinates")
        seg = _segment_lengths(pts, bool(self.closed))
        if np.any(seg == 0.0):
            raise InvalidContourError("polyline has consecutive duplicate points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "closed", bool(self.closed))

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Polyline):
            return NotImplemented
        return self.closed == other.closed and np.array_equal(self.points, other.points)

    __hash__ = None

    @classmethod
    def _resampled(cls, points, closed):
        # resampled output of a curve that doubles back may repeat a point
        obj = object.__new__(cls)
        points.setflags(write=False)
        object.__setattr__(obj, "points", points)
        object.__setattr__(obj, "closed", bool(closed))
        return obj


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    """A row-major scalar field sampled on a regular square lattice.

    Vertex ``(r, c)`` sits at world position ``(xmin + c*cell, ymin + r*cell)``,
    so row index grows with ``y``.
    """

    rows: int
    cols: int
    values: np.ndarray
    origin: tuple = (0.0, 0.0)
    cell_size: float = 1.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if vals.size != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} values, got {vals.size}"
            )
        if not self.cell_size > 0:
            raise ValueError("cell size must be strictly positive")
        vals = vals.reshape(self.rows, self.cols)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell_size", float(self.cell_size))

    @classmethod
    def from_array(cls, values, origin=(0.0, 0.0), cell_size=1.0, name=""):
        arr = np.asarray(values, dtype=np.float64)
        return cls(arr.shape[0], arr.shape[1], arr, origin, cell_size, name)

    @property
    def extent(self):
        """World bounds ``(xmin, ymin, xmax, ymax)`` of the lattice."""
        x0, y0 = self.origin
        return (x0, y0, x0 + (self.cols - 1) * self.cell_size, y0 + (self.rows - 1) * self.cell_size)


def _segment_lengths(pts, closed):
    diffs = np.diff(pts, axis=0)
    if closed:
        diffs = np.vstack([diffs, pts[:1] - pts[-1:]])
    return np.hypot(diffs[:, 0], diffs[:, 1])


def arc_length(p: Polyline) -> float:
    """Total length, including the closing segment of a closed polyline."""
    return float(_segment_lengths(p.points, p.closed).sum())


def align_start(p: Polyline) -> Polyline:
    """Rotate a closed polyline so it starts at the vertex of smallest polar angle.

    Angles are measured in ``[0, 2*pi)`` about the vertex centroid. Open
    polylines are returned unchanged.
    """
    if not p.closed:
        return p
    rel = p.points - p.points.mean(axis=0)
    ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi)
    ang[ang >= 2 * np.pi - 1e-12] = 0.0
    start = int(np.argmin(ang))
    return Polyline(np.roll(p.points, -start, axis=0), closed=True)


def resample_arclength(p: Polyline, s: int, align: bool = False) -> Polyline:
    """Place ``s`` points uniformly by arc length along ``p``.

    Closed input samples ``t_i = i*L/s`` starting at the first vertex; open
    input samples ``t_i = i*L/(s-1)`` so both endpoints are kept.
    """
    if s < 2:
        raise ValueError("s must be at least 2")
    if align:
        p = align_start(p)
    pts = p.points
    seg = _segment_lengths(pts, p.closed)
    total = float(seg.sum())
    if not total > 0:
        raise InvalidContourError("degenerate polyline with zero arc length")
    if p.closed:
        pts = np.vstack([pts, pts[:1]])
        t = np.arange(s) * (total / s)
    else:
        t = np.arange(s) * (total / (s - 1))
        t[-1] = total
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    cum[-1] = total
    out = np.column_stack([np.interp(t, cum, pts[:, 0]), np.interp(t, cum, pts[:, 1])])
    return Polyline._resampled(out, p.closed)


# Segment table: case index -> list of edge pairs. Corners are numbered
# v0=(r,c), v1=(r,c+1), v2=(r+1,c+1), v3=(r+1,c); edges e0=v0v1, e1=v1v2,
# e2=v2v3, e3=v3v0. A corner's bit is set when its value exceeds iso.
_CASES = {
    0: [], 15: [],
    1: [(3, 0)], 14: [(3, 0)],
    2: [(0, 1)], 13: [(0, 1)],
    3: [(3, 1)], 12: [(3, 1)],
    4: [(1, 2)], 11: [(1, 2)],
    6: [(0, 2)], 9: [(0, 2)],
    7: [(3, 2)], 8: [(3, 2)],
}
# Saddles, keyed by (case, center_above_iso).
_SADDLES = {
    (5, True): [(0, 1), (2, 3)],
    (5, False): [(3, 0), (1, 2)],
    (10, True): [(3, 0), (1, 2)],
    (10, False): [(0, 1), (2, 3)],
}


def _edge_key(r, c, e):
    if e == 0:
        return ("h", r, c)
    if e == 1:
        return ("v", r, c + 1)
    if e == 2:
        return ("h", r + 1, c)
    return ("v", r, c)


def _edge_point(vals, key, iso, origin, cell):
    kind, r, c = key
    if kind == "h":
        a, b = vals[r, c], vals[r, c + 1]
        t = (iso - a) / (b - a)
        x, y = c + t, r
    else:
        a, b = vals[r, c], vals[r + 1, c]
        t = (iso - a) / (b - a)
        x, y = c, r + t
    return (origin[0] + x * cell, origin[1] + y * cell)


def marching_squares(g: ScalarGrid, iso: float) -> list[Polyline]:
    """Extract the ``iso`` level set of ``g`` as stitched polylines.

    Vertex values exactly equal to ``iso`` are nudged up by ``1e-12`` times the
    value range first, so every crossing lies strictly inside a grid edge.
    Saddle cells are disambiguated by the mean of their four corners.
    """
    iso = float(iso)
    if not np.isfinite(iso):
        raise ValueError("iso must be finite")
    vals = np.array(g.values, dtype=np.float64)
    hits = vals == iso
    if hits.any():
        span = float(vals.max() - vals.min()) or 1.0
        bumped = vals + 1e-12 * span
        bumped[bumped == iso] = np.nextafter(iso, np.inf)
        vals = np.where(hits, bumped, vals)
    if g.rows < 2 or g.cols < 2:
        return []

    above = vals > iso
    idx = (
        above[:-1, :-1].astype(np.int8)
        | (above[:-1, 1:] << 1)
        | (above[1:, 1:] << 2)
        | (above[1:, :-1] << 3)
    )
    segments = []
    for r, c in zip(*np.nonzero((idx != 0) & (idx != 15))):
        case = int(idx[r, c])
        if case in (5, 10):
            center = vals[r:r + 2, c:c + 2].mean()
            pairs = _SADDLES[(case, bool(center > iso))]
        else:
            pairs = _CASES[case]
        for ea, eb in pairs:
            segments.append((_edge_key(r, c, ea), _edge_key(r, c, eb)))

    return _stitch(segments, vals, iso, g.origin, g.cell_size)


def _stitch(segments, vals, iso, origin, cell):
    by_key = {}
    for i, (a, b) in enumerate(segments):
        by_key.setdefault(a, []).append(i)
        by_key.setdefault(b, []).append(i)

    used = [False] * len(segments)

    def walk(start_key, sid):
        chain = [start_key]
        key = start_key
        while sid is not None:
            used[sid] = True
            a, b = segments[sid]
            key = b if a == key else a
            chain.append(key)
            sid = next((j for j in by_key[key] if not used[j]), None)
        return chain

    chains = []
    # open chains begin at edges touched by a single segment (the grid border)
    for key, sids in by_key.items():
        if len(sids) == 1 and not used[sids[0]]:
            chains.append(walk(key, sids[0]))
    for sid in range(len(segments)):
        if not used[sid]:
            chains.append(walk(segments[sid][0], sid))

    out = []
    for chain in chains:
        pts = np.array([_edge_point(vals, k, iso, origin, cell) for k in chain])
        closed = len(chain) > 2 and np.hypot(*(pts[0] - pts[-1])) <= 1e-9
        if closed:
            pts = pts[:-1]
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(np.diff(pts, axis=0) != 0, axis=1)
        pts = pts[keep]
        if closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
            pts = pts[:-1]
        if len(pts) >= 2:
            out.append(Polyline(pts, closed=bool(closed and len(pts) >= 3)))
    return out
