"""Variational-autoencoder modelling of contour ensembles and uncertainty rendering."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CheckpointError,
    ContourVAEError,
    DataError,
    FormatError,
    InvalidContourError,
    NestingViolationError,
    NumericalError,
)
from .geometry import Polyline, ScalarGrid, arc_length, marching_squares, resample_arclength  # noqa: E402
from .ingest import (  # noqa: E402
    Ensemble,
    FeatureVector,
    NormalizationParams,
    from_features,
    load_ensemble,
    save_ensemble,
    synth_ensemble,
    to_features,
)
from .latent_stats import (  # noqa: E402
    ConfidenceSpec,
    LatentSampleSet,
    chi2_quantile,
    confidence_spec,
    gaussian_logdensity,
    neighborhood_samples,
    sample_ball,
    sample_prior,
)
from .vae import (  # noqa: E402
    LossBreakdown,
    TrainConfig,
    VaeModel,
    decode,
    elbo_loss,
    encode,
    load_model,
    reparameterize,
    save_model,
    train,
)
from .pca_baseline import PcaModel, pca_fit, pca_project, pca_reconstruct, pca_sample  # noqa: E402
from .render import (  # noqa: E402
    BandRaster,
    DensityRaster,
    RasterSpec,
    accumulate_density,
    colorize,
    composite_bands,
    rasterize_contour,
    write_image,
)
from .metrics import MetricReport, chamfer, compare_generators, mmd_cd  # noqa: E402
from .estimators import ContourFeaturizer, ContourVAE, GaussianPCA  # noqa: E402

__all__ = [
    "__version__",
    "CheckpointError",
    "ContourVAEError",
    "DataError",
    "FormatError",
    "InvalidContourError",
    "NestingViolationError",
    "NumericalError",
    "Polyline",
    "ScalarGrid",
    "arc_length",
    "marching_squares",
    "resample_arclength",
    "Ensemble",
    "FeatureVector",
    "NormalizationParams",
    "from_features",
    "load_ensemble",
    "save_ensemble",
    "synth_ensemble",
    "to_features",
    "ConfidenceSpec",
    "LatentSampleSet",
    "chi2_quantile",
    "confidence_spec",
    "gaussian_logdensity",
    "neighborhood_samples",
    "sample_ball",
    "sample_prior",
    "LossBreakdown",
    "TrainConfig",
    "VaeModel",
    "decode",
    "elbo_loss",
    "encode",
    "load_model",
    "reparameterize",
    "save_model",
    "train",
    "PcaModel",
    "pca_fit",
    "pca_project",
    "pca_reconstruct",
    "pca_sample",
    "BandRaster",
    "DensityRaster",
    "RasterSpec",
    "accumulate_density",
    "colorize",
    "composite_bands",
    "rasterize_contour",
    "write_image",
    "MetricReport",
    "chamfer",
    "compare_generators",
    "mmd_cd",
    "ContourFeaturizer",
    "ContourVAE",
    "GaussianPCA",
]
