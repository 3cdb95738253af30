"""Rasterization of contour sets into density maps, confidence bands and PNM images."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, NestingViolationError
from .geometry import Polyline

__all__ = [
    "RasterSpec",
    "DensityRaster",
    "BandRaster",
    "rasterize_contour",
    "accumulate_density",
    "composite_bands",
    "colorize",
    "grayscale",
    "write_image",
    "read_image",
    "encode_pnm",
    "BLUES",
    "BAND_SHADES",
    "default_window",
]

# White followed by the eight darker stops of the ColorBrewer "Blues" scheme.
BLUES = np.array([
    (0xFF, 0xFF, 0xFF), (0xDE, 0xEB, 0xF7), (0xC6, 0xDB, 0xEF), (0x9E, 0xCA, 0xE1),
    (0x6B, 0xAE, 0xD6), (0x42, 0x92, 0xC6), (0x21, 0x71, 0xB5), (0x08, 0x51, 0x9C),
    (0x08, 0x30, 0x6B),
], dtype=np.float64)

# Innermost (smallest) confidence level gets the darkest shade; levels past
# the end of the table reuse its last entry.
BAND_SHADES = np.array([
    (0x08, 0x51, 0x9C), (0x42, 0x92, 0xC6), (0x9E, 0xCA, 0xE1), (0xC6, 0xDB, 0xEF),
    (0xDE, 0xEB, 0xF7),
], dtype=np.uint8)

WHITE = np.array([255, 255, 255], dtype=np.uint8)
INK = np.array([0x08, 0x30, 0x6B], dtype=np.uint8)


@dataclass(frozen=True)
class RasterSpec:
    width: int
    height: int
    window: tuple  # (xmin, ymin, xmax, ymax)
    stroke_radius: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("raster dimensions must be positive")
        xmin, ymin, xmax, ymax = (float(v) for v in self.window)
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"empty raster window {self.window}")
        if self.stroke_radius < 0:
            raise ValueError("stroke radius must be >= 0")
        object.__setattr__(self, "window", (xmin, ymin, xmax, ymax))

    def to_pixel(self, pts):
        """World points to continuous pixel coordinates ``(col, row)``; row 0 is the top."""
        xmin, ymin, xmax, ymax = self.window
        pts = np.asarray(pts, dtype=np.float64)
        col = (pts[..., 0] - xmin) / (xmax - xmin) * self.width
        row = (ymax - pts[..., 1]) / (ymax - ymin) * self.height
        return np.stack([col, row], axis=-1)


@dataclass(frozen=True, eq=False)
class DensityRaster:
    counts: np.ndarray  # (height, width) int64
    sample_count: int


@dataclass(frozen=True, eq=False)
class BandRaster:
    """Per pixel, the smallest level index whose band covers it, or -1."""

    index: np.ndarray  # (height, width) int
    levels: tuple

    def coverage(self, i):
        return (self.index >= 0) & (self.index <= i)


def _clip(p0, p1, w, h):
    # Liang-Barsky against [0, w] x [0, h]
    t0, t1 = 0.0, 1.0
    d = p1 - p0
    for p, q in ((-d[0], p0[0]), (d[0], w - p0[0]), (-d[1], p0[1]), (d[1], h - p0[1])):
        if p == 0:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return p0 + t0 * d, p0 + t1 * d


def _bresenham(c0, r0, c1, r1):
    dc, dr = abs(c1 - c0), -abs(r1 - r0)
    sc = 1 if c0 < c1 else -1
    sr = 1 if r0 < r1 else -1
    err = dc + dr
    cells = []
    while True:
        cells.append((r0, c0))
        if c0 == c1 and r0 == r1:
            return cells
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c0 += sc
        if e2 <= dc:
            err += dc
            r0 += sr


def _segments(p: Polyline, spec: RasterSpec):
    px = spec.to_pixel(p.points)
    if p.closed:
        px = np.vstack([px, px[:1]])
    return px[:-1], px[1:]


def rasterize_contour(p: Polyline, spec: RasterSpec) -> np.ndarray:
    """Boolean ``(height, width)`` mask of pixels the contour's stroke covers.

    A pixel is covered when its center lies within ``stroke_radius`` pixels of
    a segment; radius 0 falls back to Bresenham lines between clipped
    endpoints.
    """
    W, H = spec.width, spec.height
    mask = np.zeros((H, W), dtype=bool)
    starts, ends = _segments(p, spec)
    r = float(spec.stroke_radius)
    if r == 0:
        for a, b in zip(starts, ends):
            clipped = _clip(a, b, W, H)
            if clipped is None:
                continue
            (c0, r0), (c1, r1) = (np.minimum(np.floor(q), (W - 1, H - 1)).astype(int) for q in clipped)
            for row, col in _bresenham(c0, r0, c1, r1):
                mask[row, col] = True
        return mask

    lo = np.minimum(starts, ends) - r - 0.5
    hi = np.maximum(starts, ends) + r - 0.5
    c_lo = np.clip(np.ceil(lo[:, 0]), 0, W).astype(int)
    c_hi = np.clip(np.floor(hi[:, 0]), -1, W - 1).astype(int)
    r_lo = np.clip(np.ceil(lo[:, 1]), 0, H).astype(int)
    r_hi = np.clip(np.floor(hi[:, 1]), -1, H - 1).astype(int)
    # enumerate every (segment, candidate pixel) pair inside the segment's box
    ncols = np.maximum(c_hi - c_lo + 1, 0)
    nrows = np.maximum(r_hi - r_lo + 1, 0)
    sizes = ncols * nrows
    total = int(sizes.sum())
    if total == 0:
        return mask
    seg = np.repeat(np.arange(len(sizes)), sizes)
    local = np.arange(total) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    rows = r_lo[seg] + local // ncols[seg]
    cols = c_lo[seg] + local % ncols[seg]
    a = starts[seg]
    d = ends[seg] - a
    qx = cols + 0.5 - a[:, 0]
    qy = rows + 0.5 - a[:, 1]
    dd = np.einsum("ij,ij->i", d, d)
    safe = np.where(dd > 0, dd, 1.0)
    t = np.clip((qx * d[:, 0] + qy * d[:, 1]) / safe, 0.0, 1.0)
    ex = qx - t * d[:, 0]
    ey = qy - t * d[:, 1]
    hit = ex * ex + ey * ey <= r * r
    mask[rows[hit], cols[hit]] = True
    return mask


def accumulate_density(contours, spec: RasterSpec) -> DensityRaster:
    """Count, per pixel, how many contours pass through it."""
    contours = list(contours)
    if not contours:
        raise ValueError("need at least one contour")
    counts = np.zeros((spec.height, spec.width), dtype=np.int64)
    for c in contours:
        counts += rasterize_contour(c, spec)
    return DensityRaster(counts, len(contours))


def composite_bands(level_sets, spec: RasterSpec, nested: bool = True) -> BandRaster:
    """Composite per-level contour sets into nested confidence bands.

    ``level_sets`` is a list of ``(level, contours)`` with strictly increasing
    levels. With ``nested=True`` the inputs are taken to come from rescaled
    samples of one unit-ball draw, so every smaller-level sample also lies in
    each larger ball and is included in that band. With ``nested=False`` each
    band is its own contours only, and nesting is checked.
    """
    levels = [float(lv) for lv, _ in level_sets]
    if not levels:
        raise ValueError("need at least one level")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    unions = []
    for _, contours in level_sets:
        u = np.zeros((spec.height, spec.width), dtype=bool)
        for c in contours:
            u |= rasterize_contour(c, spec)
        unions.append(u)
    if nested:
        unions = list(np.logical_or.accumulate(np.stack(unions), axis=0))
    else:
        bad = np.zeros_like(unions[0])
        for a, b in zip(unions, unions[1:]):
            bad |= a & ~b
        if bad.any():
            raise NestingViolationError(int(bad.sum()))
    index = np.full((spec.height, spec.width), -1, dtype=np.int64)
    for i in range(len(unions) - 1, -1, -1):
        index[unions[i]] = i
    return BandRaster(index, tuple(levels))


def colorize(raster, palette: str = None) -> np.ndarray:
    """Map a raster to an ``(height, width, 3)`` uint8 RGB image.

    Densities use ``count / max(count)`` through the white-to-blue ramp
    (``"white-to-blue"``) or paint every covered pixel one ink color
    (``"uniform"``). Bands use ``"band-shades"``; uncovered pixels are white.
    """
    if isinstance(raster, BandRaster):
        palette = palette or "band-shades"
        if palette != "band-shades":
            raise ValueError(f"unsupported palette {palette!r} for bands")
        img = np.empty(raster.index.shape + (3,), dtype=np.uint8)
        img[:] = WHITE
        covered = raster.index >= 0
        shade = np.minimum(raster.index[covered], len(BAND_SHADES) - 1)
        img[covered] = BAND_SHADES[shade]
        return img
    counts = raster.counts
    palette = palette or "white-to-blue"
    img = np.empty(counts.shape + (3,), dtype=np.uint8)
    img[:] = WHITE
    peak = counts.max()
    if peak == 0:
        return img
    if palette == "uniform":
        img[counts > 0] = INK
        return img
    if palette != "white-to-blue":
        raise ValueError(f"unsupported palette {palette!r} for densities")
    pos = counts / peak * (len(BLUES) - 1)
    i = np.minimum(np.floor(pos).astype(int), len(BLUES) - 2)
    frac = (pos - i)[..., None]
    rgb = BLUES[i] * (1.0 - frac) + BLUES[i + 1] * frac
    return np.rint(rgb).astype(np.uint8)


def grayscale(raster: DensityRaster) -> np.ndarray:
    """Counts scaled so the busiest pixel is 255 and empty pixels are 0."""
    peak = raster.counts.max()
    if peak == 0:
        return np.zeros(raster.counts.shape, dtype=np.uint8)
    return np.rint(raster.counts * (255.0 / peak)).astype(np.uint8)


def encode_pnm(img, format: str = None) -> bytes:
    """Binary PGM (P5) or PPM (P6) bytes, maxval 255."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("images must be uint8")
    if format is None:
        format = "ppm" if img.ndim == 3 else "pgm"
    if format == "pgm":
        if img.ndim != 2:
            raise ValueError("PGM needs a 2-D grayscale array")
        magic = b"P5"
    elif format == "ppm":
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError("PPM needs an (h, w, 3) array")
        magic = b"P6"
    else:
        raise ValueError(f"unknown image format {format!r}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def write_image(img, path, format: str = None):
    data = encode_pnm(img, format)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write image to {path}: {exc.strerror or exc}") from exc


def _header_tokens(data):
    tokens, pos = [], 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PNM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError:
            raise FormatError(f"bad PNM header token {data[start:pos][:20]!r}") from None
    return tokens, pos + 1


def read_image(path) -> np.ndarray:
    """Read a binary 8-bit PGM or PPM file."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    (w, h, maxval), pos = _header_tokens(data)
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported")
    channels = 3 if magic == b"P6" else 1
    body = data[pos:]
    if len(body) != w * h * channels:
        raise FormatError(f"{path}: expected {w * h * channels} pixel bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype=np.uint8)
    return arr.reshape((h, w, 3) if channels == 3 else (h, w)).copy()


def default_window(bounds, pad: float = 0.05):
    """Bounds grown by ``pad`` of their larger side on every edge."""
    xmin, ymin, xmax, ymax = bounds
    m = pad * max(xmax - xmin, ymax - ymin)
    return (xmin - m, ymin - m, xmax + m, ymax + m)

