"""Reverse-time inference: predictor-corrector sampling, the one-pass
regression mode, and the interpolated mixture pipeline.

All modes share one denoiser. The predictor discretizes the reverse SDE by
Euler-Maruyama; the corrector runs annealed Langevin refinement at fixed t.
The mixture mode blends the regression output with the noisy input and uses
the blend to initialize a (short) reverse trajectory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .sde import (
    BrownianBridgeSde,
    DiffusionState,
    complex_standard_normal,
    reverse_drift,
    score_from_x0,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    """Reverse grid and corrector settings.

    The grid starts just below 1 (the process is pinned at 1, and the score
    conversion needs t < 1) and stops short of 0 where sigma vanishes.
    """

    n_steps: int = 30
    t_start: float = 0.999
    t_end: float = 0.03
    corrector_enabled: bool = False
    corrector_steps: int = 1
    corrector_snr: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0.0 < self.t_end < self.t_start < 1.0:
            raise ValueError("need 0 < t_end < t_start < 1")
        if self.corrector_steps < 1:
            raise ValueError("corrector_steps must be >= 1")
        if self.corrector_snr <= 0.0:
            raise ValueError("corrector_snr must be positive")

    def time_grid(self) -> np.ndarray:
        """Strictly decreasing uniform grid from t_start to t_end, n_steps+1 points."""
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class EnhanceRequest:
    """Inference mode selection; alpha only applies to the mixture mode."""

    mode: str
    alpha: float | None = None
    sampler: SamplerConfig = SamplerConfig()

    def __post_init__(self):
        if self.mode not in ("regression", "diffusion", "mixture"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "mixture":
            if self.alpha is None or not 0.0 <= self.alpha <= 1.0:
                raise ValueError("mixture mode needs alpha in [0, 1]")
        elif self.alpha is not None:
            raise ValueError(f"alpha is only valid for mixture mode, not {self.mode!r}")


def predictor_step(
    state: DiffusionState, dt: float, denoiser, sde, rng: np.random.Generator
) -> DiffusionState:
    """One Euler-Maruyama step of the reverse SDE, t -> t - dt.

    x_{t-dt} = x_t - dt [f - g^2 s] + g sqrt(dt) z with the score obtained
    from the denoiser's clean estimate.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x, y, t = state.x_t, state.y, state.t
    x0_hat = denoiser.predict_x0(x, y, t)
    score = score_from_x0(x, y, t, x0_hat)
    drift = reverse_drift(x, y, t, score, sde)
    g = sde.diffusion(t)
    z = complex_standard_normal(x.shape, rng)
    x_new = x - dt * drift + g * np.sqrt(dt) * z
    return DiffusionState(x_new, t - dt, y)


def corrector_step(
    state: DiffusionState, denoiser, sde, r: float, rng: np.random.Generator
) -> DiffusionState:
    """One annealed Langevin refinement at fixed t.

    eps = 2 (r ||z|| / ||s||)^2; x <- x + eps s + sqrt(2 eps) z. A zero score
    means no direction to refine in, so the step is skipped.
    """
    x, y, t = state.x_t, state.y, state.t
    x0_hat = denoiser.predict_x0(x, y, t)
    score = score_from_x0(x, y, t, x0_hat)
    z = complex_standard_normal(x.shape, rng)
    score_norm = float(np.linalg.norm(score))
    if score_norm == 0.0:
        log.info("corrector skipped at t=%.6f: zero score norm", t)
        return state
    eps = 2.0 * (r * float(np.linalg.norm(z)) / score_norm) ** 2
    x_new = x + eps * score + np.sqrt(2.0 * eps) * z
    return DiffusionState(x_new, t, y)


def run_reverse(x_init, y, denoiser, cfg: SamplerConfig, sde=None) -> np.ndarray:
    """Integrate the reverse SDE from (x_init, t_start) down to t_end.

    Predictor at each of the n_steps grid intervals, then corrector_steps
    Langevin refinements when enabled. The returned estimate is one final
    clean projection at t_end rather than the raw state, which still carries
    the residual y * t_end mixing of the bridge.
    """
    x_init = np.asarray(x_init, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x_init.shape != y.shape:
        raise ValueError("x_init and y must have the same shape")
    sde = sde if sde is not None else BrownianBridgeSde()
    rng = np.random.default_rng(cfg.seed)
    ts = cfg.time_grid()
    state = DiffusionState(x_init, float(ts[0]), y)
    for k in range(cfg.n_steps):
        dt = float(ts[k] - ts[k + 1])
        state = predictor_step(state, dt, denoiser, sde, rng)
        if cfg.corrector_enabled:
            for _ in range(cfg.corrector_steps):
                state = corrector_step(state, denoiser, sde, cfg.corrector_snr, rng)
    return denoiser.predict_x0(state.x_t, state.y, state.t)


def regression_enhance(y, denoiser) -> np.ndarray:
    """Single deterministic forward pass at t = 1 (valid because the bridge
    has zero variance there). Consumes no randomness."""
    y = np.asarray(y, dtype=np.complex128)
    return denoiser.predict_x0(y, y, 1.0)


def mixture_enhance(y, denoiser, alpha: float, cfg: SamplerConfig, sde=None) -> np.ndarray:
    """Regression pass, then reverse diffusion initialized at the blend
    alpha * x_reg + (1 - alpha) * y.

    alpha = 0 degenerates to plain diffusion from y; alpha = 1 starts purely
    from the regression output. The endpoints are special-cased so those
    identities hold bitwise.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    y = np.asarray(y, dtype=np.complex128)
    x_reg = regression_enhance(y, denoiser)
    if alpha == 0.0:
        x_init = y.copy()
    elif alpha == 1.0:
        x_init = x_reg
    else:
        x_init = alpha * x_reg + (1.0 - alpha) * y
    return run_reverse(x_init, y, denoiser, cfg, sde=sde)


def enhance(y, denoiser, request: EnhanceRequest) -> np.ndarray:
    """Dispatch on the requested inference mode."""
    if request.mode == "regression":
        return regression_enhance(y, denoiser)
    if request.mode == "diffusion":
        y = np.asarray(y, dtype=np.complex128)
        return run_reverse(y, y, denoiser, request.sampler)
    return mixture_enhance(y, denoiser, request.alpha, request.sampler)
