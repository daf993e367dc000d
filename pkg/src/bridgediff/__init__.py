"""Brownian-bridge diffusion speech enhancement with a single model serving
regression, diffusion, and mixture inference modes."""

__version__ = "0.1.0"

from .audio import (
    ComplexSpectrogram,
    StftConfig,
    TimeSignal,
    istft,
    mix_at_snr,
    read_wav,
    stft,
    write_wav,
)
from .denoiser import GaussianPrior, MlpDenoiser, OracleDenoiser, oracle_predict_x0
from .metrics import si_sar, si_sdr
from .sampler import (
    EnhanceRequest,
    SamplerConfig,
    corrector_step,
    enhance,
    mixture_enhance,
    predictor_step,
    regression_enhance,
    run_reverse,
)
from .sde import (
    BrownianBridgeSde,
    DiffusionState,
    MarginalParams,
    OuveSde,
    complex_standard_normal,
    reverse_drift,
    sample_xt,
    score_from_x0,
    x0_from_score,
)
from .trainer import TrainConfig, adam_step, score_loss, train, x0_loss

__all__ = [
    "BrownianBridgeSde",
    "ComplexSpectrogram",
    "DiffusionState",
    "EnhanceRequest",
    "GaussianPrior",
    "MarginalParams",
    "MlpDenoiser",
    "OracleDenoiser",
    "OuveSde",
    "SamplerConfig",
    "StftConfig",
    "TimeSignal",
    "TrainConfig",
    "adam_step",
    "complex_standard_normal",
    "corrector_step",
    "enhance",
    "istft",
    "mix_at_snr",
    "mixture_enhance",
    "oracle_predict_x0",
    "predictor_step",
    "read_wav",
    "regression_enhance",
    "reverse_drift",
    "run_reverse",
    "sample_xt",
    "score_from_x0",
    "score_loss",
    "si_sar",
    "si_sdr",
    "stft",
    "train",
    "write_wav",
    "x0_from_score",
    "x0_loss",
]
