"""Chamfer distance and minimum-matching-distance evaluation of generated contours."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import resample_arclength
from .ingest import Ensemble, from_features, to_features
from .latent_stats import sample_prior
from .pca_baseline import pca_sample
from .vae import decode, encode

__all__ = [
    "MetricReport",
    "chamfer",
    "mmd_cd",
    "compare_generators",
    "reconstruction_error",
]


@dataclass
class MetricReport:
    method: str
    mmd_cd: float
    minima: list
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"


def _pairwise(a, b):
    diff = a[..., :, None, :] - b[..., None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def chamfer(a, b, squared: bool = False) -> float:
    """Symmetric Chamfer distance: half the sum of both mean nearest-neighbour distances."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer distance needs two non-empty point sets")
    d = _pairwise(a, b)
    if squared:
        d = d * d
    return float(0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean()))


def _chamfer_to_many(ref, gens, squared):
    d = _pairwise(ref[None], gens)  # (G, P, P)
    if squared:
        d = d * d
    return 0.5 * (d.min(axis=2).mean(axis=1) + d.min(axis=1).mean(axis=1))


def mmd_cd(references, generated, points_per_contour: int = 100, squared: bool = False,
           method: str = "", config=None) -> MetricReport:
    """Mean over references of the smallest Chamfer distance to any generated contour."""
    if not references or not generated:
        raise ValueError("references and generated contours must be non-empty")
    if points_per_contour < 2:
        raise ValueError("points_per_contour must be >= 2")
    refs = [resample_arclength(p, points_per_contour).points for p in references]
    gens = np.stack([resample_arclength(p, points_per_contour).points for p in generated])
    minima = [float(_chamfer_to_many(r, gens, squared).min()) for r in refs]
    cfg = {"points_per_contour": points_per_contour, "squared": squared,
           "n_references": len(refs), "n_generated": len(gens)}
    cfg.update(config or {})
    return MetricReport(method, float(np.mean(minima)), minima, cfg)


def compare_generators(vae, pca, references: Ensemble, count=None, seed: int = 0,
                       points_per_contour: int = 100, squared: bool = False):
    """MMD-CD of VAE prior samples and PCA-Gaussian samples against ``references``.

    Both generators draw ``count`` contours (default: the ensemble size) from
    generators seeded with the same ``seed``.
    """
    count = len(references) if count is None else int(count)
    z = sample_prior(vae.k, count, seed).points
    vae_polys = [from_features(f, vae.norm) for f in decode(vae, z)]
    pca_polys = [from_features(f, vae.norm) for f in pca_sample(pca, count, seed)]
    cfg = {"count": count, "seed": seed}
    return (
        mmd_cd(references.members, vae_polys, points_per_contour, squared, "vae", cfg),
        mmd_cd(references.members, pca_polys, points_per_contour, squared, "pca", cfg),
    )


def reconstruction_error(model, ensemble: Ensemble, align: bool = False) -> float:
    """Mean per-point distance between resampled members and their VAE reconstructions.

    Members are encoded to their posterior means and decoded; the result is in
    world units.
    """
    feats, norm = to_features(ensemble, model.s, align=align)
    mu, _ = encode(model, feats)
    errs = []
    for f, rec in zip(feats, decode(model, mu)):
        a = norm.invert(f.values.reshape(-1, 2))
        b = model.norm.invert(rec.values.reshape(-1, 2))
        errs.append(np.hypot(*(a - b).T).mean())
    return float(np.mean(errs))
