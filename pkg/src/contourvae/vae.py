"""Variational autoencoder over contour feature vectors.

The encoder outputs a diagonal Gaussian posterior ``(mu, logvar)``; the
decoder returns the mean of a unit-variance Gaussian likelihood. Training
minimizes the negative ELBO ``0.5*||x - x_hat||^2 + beta*KL`` averaged over
members, with one reparameterized draw per member per epoch.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointError, NumericalError
from .ingest import FeatureVector, NormalizationParams, from_features
from .neural import Layer, LayerSpec, MlpParams, adam_init, adam_step, backward, forward, init_mlp

__all__ = [
    "TrainConfig",
    "VaeModel",
    "LossBreakdown",
    "build_model",
    "encode",
    "reparameterize",
    "decode",
    "decode_array",
    "decode_polylines",
    "elbo_loss",
    "loss_and_grads",
    "train",
    "save_model",
    "load_model",
    "model_to_json",
    "CHECKPOINT_FORMAT",
    "CHECKPOINT_VERSION",
]

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "contourvae-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 4000
    lr: float = 1e-3
    beta: float = 1.0
    seed: int = 42
    k: int = 8
    s: int = 100
    warmup: float = 0.1  # fraction of epochs over which beta ramps up from 0
    hidden: tuple = (128, 64)

    def __post_init__(self):
        if self.epochs < 1 or self.k < 1 or self.s < 2:
            raise ValueError("epochs and k must be >= 1 and s >= 2")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 <= self.warmup <= 1:
            raise ValueError("warmup must be a fraction in [0, 1]")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def beta_at(self, epoch):
        ramp = self.warmup * self.epochs
        if ramp <= 0:
            return self.beta
        return self.beta * min(1.0, epoch / ramp)


@dataclass(frozen=True)
class LossBreakdown:
    reconstruction: float
    kl: float
    total: float
    beta: float = 1.0


@dataclass(frozen=True, eq=False)
class VaeModel:
    encoder: MlpParams
    decoder: MlpParams
    k: int
    s: int
    m: int = 2
    norm: NormalizationParams = field(default_factory=NormalizationParams)
    closed: bool = False
    seed: int = 0
    beta: float = 1.0

    def __post_init__(self):
        if self.encoder.out_dim != 2 * self.k:
            raise ValueError("encoder must output mean and log-variance heads of length k")
        if self.decoder.in_dim != self.k or self.decoder.out_dim != self.s * self.m:
            raise ValueError("decoder must map k -> s*m")
        if self.encoder.in_dim != self.s * self.m:
            raise ValueError("encoder must take s*m inputs")

    @property
    def feature_dim(self):
        return self.s * self.m


def build_model(cfg: TrainConfig, m=2, norm=None, closed=False, rng=None) -> VaeModel:
    """Freshly initialized model with the mirrored tanh architecture of ``cfg``."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    d = cfg.s * m
    widths = (d, *cfg.hidden)
    enc = [LayerSpec(a, b, "tanh") for a, b in zip(widths, widths[1:])]
    enc.append(LayerSpec(widths[-1], 2 * cfg.k, "identity"))
    rev = (cfg.k, *reversed(cfg.hidden))
    dec = [LayerSpec(a, b, "tanh") for a, b in zip(rev, rev[1:])]
    dec.append(LayerSpec(rev[-1], d, "identity"))
    return VaeModel(
        init_mlp(enc, rng), init_mlp(dec, rng), cfg.k, cfg.s, m,
        norm if norm is not None else NormalizationParams(), bool(closed), cfg.seed, cfg.beta,
    )


def _as_array(x):
    if isinstance(x, FeatureVector):
        return x.values
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], FeatureVector):
        return np.vstack([f.values for f in x])
    return np.asarray(x, dtype=np.float64)


def encode(model: VaeModel, x):
    """Posterior parameters ``(mu, logvar)`` for one feature vector or a batch."""
    x = _as_array(x)
    if x.shape[-1] != model.feature_dim:
        raise ValueError(f"expected {model.feature_dim} features, got {x.shape[-1]}")
    out, _ = forward(model.encoder, x)
    return out[..., : model.k], out[..., model.k:]


def reparameterize(mu, logvar, noise):
    mu, logvar, noise = (np.asarray(a, dtype=np.float64) for a in (mu, logvar, noise))
    if mu.shape != logvar.shape or mu.shape != noise.shape:
        raise ValueError("mu, logvar and noise must share a shape")
    return mu + np.exp(0.5 * logvar) * noise


def decode_array(model: VaeModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.k:
        raise ValueError(f"latent vectors must have length {model.k}, got {z.shape[-1]}")
    out, _ = forward(model.decoder, z)
    return out


def decode(model: VaeModel, z):
    """Decoder mean: a FeatureVector for one latent vector, a list for a batch."""
    out = decode_array(model, z)
    if out.ndim == 1:
        return FeatureVector(out, model.s, model.closed)
    return [FeatureVector(row, model.s, model.closed) for row in out]


def decode_polylines(model: VaeModel, z):
    """Decode latent vectors straight to world-space polylines."""
    return [from_features(f, model.norm) for f in decode(model, np.atleast_2d(z))]


def _kl(mu, logvar):
    return 0.5 * np.sum(mu * mu + np.exp(logvar) - logvar - 1.0, axis=-1)


def elbo_loss(model: VaeModel, x, noise, beta=None) -> LossBreakdown:
    """Negative ELBO for one member, or the mean over a batch.

    ``beta`` defaults to the model's configured KL weight.
    """
    beta = model.beta if beta is None else beta
    x = _as_array(x)
    mu, logvar = encode(model, x)
    xhat = decode_array(model, reparameterize(mu, logvar, noise))
    rec = 0.5 * np.sum((x - xhat) ** 2, axis=-1)
    kl = _kl(mu, logvar)
    total = rec + beta * kl
    if not np.all(np.isfinite(total)):
        bad = int(np.flatnonzero(~np.isfinite(np.atleast_1d(total)))[0])
        raise NumericalError(f"non-finite loss for member {bad}")
    return LossBreakdown(float(np.mean(rec)), float(np.mean(kl)), float(np.mean(total)), float(beta))


def loss_and_grads(model: VaeModel, X, noise, beta):
    """Mean negative ELBO over the rows of ``X`` and its exact gradient.

    Returns ``(LossBreakdown, encoder_grads, decoder_grads)``; gradient lists
    follow ``MlpParams.arrays()`` order.
    """
    X = np.atleast_2d(_as_array(X))
    noise = np.atleast_2d(np.asarray(noise, dtype=np.float64))
    n, k = X.shape[0], model.k
    # overflow surfaces below as a NumericalError, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        heads, tape_e = forward(model.encoder, X)
        mu, logvar = heads[:, :k], heads[:, k:]
        std = np.exp(0.5 * logvar)
        z = mu + std * noise
        xhat, tape_d = forward(model.decoder, z)
        diff = xhat - X
        rec = 0.5 * np.sum(diff * diff, axis=1)
        kl = _kl(mu, logvar)
        total = rec + beta * kl
    if not np.all(np.isfinite(total)):
        bad = int(np.flatnonzero(~np.isfinite(total))[0])
        raise NumericalError(f"non-finite loss for member {bad}")
    loss = LossBreakdown(float(rec.mean()), float(kl.mean()), float(total.mean()), float(beta))

    gdec, gz = backward(model.decoder, tape_d, diff / n)
    gmu = gz + beta * mu / n
    glv = 0.5 * gz * noise * std + 0.5 * beta * (np.exp(logvar) - 1.0) / n
    genc, _ = backward(model.encoder, tape_e, np.concatenate([gmu, glv], axis=1))
    return loss, genc, gdec


def _with_arrays(model, arrays):
    ne = len(model.encoder.layers) * 2
    return VaeModel(
        model.encoder.with_arrays(arrays[:ne]), model.decoder.with_arrays(arrays[ne:]),
        model.k, model.s, model.m, model.norm, model.closed, model.seed, model.beta,
    )


def train(features, cfg: TrainConfig = TrainConfig(), norm=None, closed=None, log_every=0):
    """Full-batch Adam on the mean negative ELBO.

    ``features`` is a list of FeatureVector (or an ``(n, s*m)`` array). Returns
    ``(model, history)`` with one LossBreakdown per epoch. Bit-reproducible
    for a fixed ``cfg``.
    """
    X = _as_array(features)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("training needs at least 2 feature vectors")
    if X.shape[1] != cfg.s * 2:
        raise ValueError(f"features have length {X.shape[1]}, config expects s*m = {cfg.s * 2}")
    if closed is None:
        closed = bool(getattr(features[0], "closed", False)) if isinstance(features, (list, tuple)) else False
    rng = np.random.default_rng(cfg.seed)
    model = build_model(cfg, norm=norm, closed=closed, rng=rng)
    arrays = model.encoder.arrays() + model.decoder.arrays()
    state = adam_init(arrays, lr=cfg.lr)
    history = []
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        beta = cfg.beta_at(epoch)
        noise = rng.standard_normal((n, cfg.k))
        try:
            loss, genc, gdec = loss_and_grads(model, X, noise, beta)
            arrays, state = adam_step(arrays, genc + gdec, state)
        except NumericalError as exc:
            raise NumericalError(f"training diverged at epoch {epoch}: {exc}",
                                 epoch=epoch, history=history) from exc
        model = _with_arrays(model, arrays)
        history.append(loss)
        if log_every and epoch % log_every == 0:
            logger.info("epoch %d: total=%.5f rec=%.5f kl=%.5f beta=%.3f",
                        epoch, loss.total, loss.reconstruction, loss.kl, beta)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericalError("training produced non-finite parameters", epoch=cfg.epochs, history=history)
    return model, history


# --- checkpoints ------------------------------------------------------------------
#
# A checkpoint is one JSON object (sorted keys, no whitespace, trailing newline):
#   format, version            "contourvae-checkpoint", 1
#   k, s, m, closed, seed, beta
#   norm                        {"center": [cx, cy], "scale": scale}
#   encoder, decoder            lists of {"activation", "weight": rows, "bias"}
# Floats are written with Python's shortest round-trip repr, so load is lossless.


def _mlp_to_doc(params):
    return [
        {"activation": l.activation, "weight": l.weight.tolist(), "bias": l.bias.tolist()}
        for l in params.layers
    ]


def _mlp_from_doc(doc):
    return MlpParams(tuple(
        Layer(np.array(d["weight"], dtype=np.float64), np.array(d["bias"], dtype=np.float64),
              d["activation"])
        for d in doc
    ))


def model_to_json(model: VaeModel) -> str:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "k": model.k,
        "s": model.s,
        "m": model.m,
        "closed": model.closed,
        "seed": model.seed,
        "beta": model.beta,
        "norm": {"center": list(model.norm.center), "scale": model.norm.scale},
        "encoder": _mlp_to_doc(model.encoder),
        "decoder": _mlp_to_doc(model.decoder),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: VaeModel, path):
    Path(path).write_text(model_to_json(model))


def model_from_json(text: str) -> VaeModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError("not a contourvae checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    try:
        return VaeModel(
            _mlp_from_doc(doc["encoder"]), _mlp_from_doc(doc["decoder"]),
            int(doc["k"]), int(doc["s"]), int(doc["m"]),
            NormalizationParams(tuple(doc["norm"]["center"]), doc["norm"]["scale"]),
            bool(doc["closed"]), int(doc["seed"]), float(doc["beta"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc


def load_model(path) -> VaeModel:
    return model_from_json(Path(path).read_text())


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    return d
