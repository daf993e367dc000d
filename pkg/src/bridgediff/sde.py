"""Diffusion process definitions over complex spectrogram grids.

Forward processes have the form dx = f(x, y, t) dt + g(t) dw with complex
Wiener noise. Every Gaussian is circularly symmetric with the stated *total*
variance (real and imaginary parts carry half each), so a kernel draw is
mean + sigma * z with z unit-variance complex normal, and the matching score
of the kernel density is -(x - mean) / sigma^2 = -z / sigma. Under this
convention the reverse SDE drift is f - g^2 * score with no extra factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Guards for score conversions: sigma(t)^2 = t(1-t) vanishes at both ends.
# The reverse grid starts close to 1 and stops at T_MIN; both overridable
# per call.
T_MIN = 0.03
T_GUARD = 1e-6


def complex_standard_normal(shape, rng: np.random.Generator) -> np.ndarray:
    """Circularly symmetric complex normal, unit total variance per element."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(0.5)


@dataclass(frozen=True)
class MarginalParams:
    """Mean grid and scalar standard deviation of a perturbation kernel."""

    mean: np.ndarray
    std: float


@dataclass(frozen=True)
class DiffusionState:
    """Current state x_t at time t, conditioned on the fixed noisy grid y."""

    x_t: np.ndarray
    t: float
    y: np.ndarray

    def __post_init__(self):
        x_t = np.asarray(self.x_t, dtype=np.complex128)
        y = np.asarray(self.y, dtype=np.complex128)
        if x_t.shape != y.shape:
            raise ValueError("x_t and y must have the same shape")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        object.__setattr__(self, "x_t", x_t)
        object.__setattr__(self, "y", y)


class BrownianBridgeSde:
    """dx = (y - x)/(1 - t) dt + dw.

    Pins x(0) = x0 to x(1) = y with zero variance at both endpoints, which is
    what makes a single deterministic (regression-style) step at t = 1
    meaningful.
    """

    def drift(self, x_t, y, t: float, *, t_guard: float = T_GUARD) -> np.ndarray:
        if t > 1.0 - t_guard:
            raise ValueError(f"drift undefined this close to 1 (t = {t})")
        return (np.asarray(y) - np.asarray(x_t)) / (1.0 - t)

    def diffusion(self, t: float) -> float:
        return 1.0

    def marginal(self, x0, y, t: float) -> MarginalParams:
        """Kernel of the bridge: mean x0(1-t) + y t, variance t(1-t)."""
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        mean = np.asarray(x0) * (1.0 - t) + np.asarray(y) * t
        return MarginalParams(mean, math.sqrt(t * (1.0 - t)))


@dataclass(frozen=True)
class OuveSde:
    """Exponential mean-shift process with geometric noise schedule.

    dx = gamma (y - x) dt + g(t) dw with
    g(t) = sigma_min (sigma_max/sigma_min)^t sqrt(2 log(sigma_max/sigma_min)).
    Unlike the bridge, its variance at t = 1 stays strictly positive, so it
    cannot act as a regression model; it is kept as an ablation process.
    """

    gamma: float = 1.5
    sigma_min: float = 0.05
    sigma_max: float = 0.5

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if not 0.0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")

    def drift(self, x_t, y, t: float) -> np.ndarray:
        return self.gamma * (np.asarray(y) - np.asarray(x_t))

    def diffusion(self, t: float) -> float:
        log_ratio = math.log(self.sigma_max / self.sigma_min)
        return self.sigma_min * (self.sigma_max / self.sigma_min) ** t * math.sqrt(2.0 * log_ratio)

    def marginal(self, x0, y, t: float) -> MarginalParams:
        """Closed-form kernel of the linear SDE above.

        mean = x0 e^{-gamma t} + y (1 - e^{-gamma t})
        var  = sigma_min^2 ((sigma_max/sigma_min)^{2t} - e^{-2 gamma t})
               * log(sigma_max/sigma_min) / (gamma + log(sigma_max/sigma_min))

        Cross-checked against Euler-Maruyama simulation rather than trusted.
        """
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        decay = math.exp(-self.gamma * t)
        mean = np.asarray(x0) * decay + np.asarray(y) * (1.0 - decay)
        log_ratio = math.log(self.sigma_max / self.sigma_min)
        var = (
            self.sigma_min**2
            * ((self.sigma_max / self.sigma_min) ** (2.0 * t) - math.exp(-2.0 * self.gamma * t))
            * log_ratio
            / (self.gamma + log_ratio)
        )
        return MarginalParams(mean, math.sqrt(max(var, 0.0)))


def sample_xt(x0, y, t, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw x_t from the bridge kernel by reparameterization; also return z.

    x_t = x0 (1 - t) + y t + sqrt(t(1-t)) z. Accepts scalar t or one t per
    leading row. The returned z feeds test oracles (the optimal score is
    -z / sigma(t)).
    """
    x0 = np.asarray(x0, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t must lie in [0, 1]")
    while t_arr.ndim < x0.ndim:
        t_arr = t_arr[..., None]
    z = complex_standard_normal(x0.shape, rng)
    x_t = x0 * (1.0 - t_arr) + y * t_arr + np.sqrt(t_arr * (1.0 - t_arr)) * z
    return x_t, z


def score_from_x0(
    x_t, y, t, x0_hat, *, t_min: float = T_MIN, t_guard: float = T_GUARD
) -> np.ndarray:
    """Score implied by a clean-speech estimate:

    s = -(x_t - (x0_hat (1 - t) + y t)) / (t (1 - t))
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < t_min) or np.any(t_arr > 1.0 - t_guard):
        raise ValueError(f"t outside guarded interval [{t_min}, {1.0 - t_guard}]")
    x_t = np.asarray(x_t, dtype=np.complex128)
    while t_arr.ndim < x_t.ndim:
        t_arr = t_arr[..., None]
    mean = np.asarray(x0_hat) * (1.0 - t_arr) + np.asarray(y) * t_arr
    return -(x_t - mean) / (t_arr * (1.0 - t_arr))


def x0_from_score(x_t, y, t, score, *, t_guard: float = T_GUARD) -> np.ndarray:
    """Exact algebraic inverse of score_from_x0:

    x0 = (x_t - y t + t (1 - t) s) / (1 - t)

    Degenerates at t = 1, which is why the denoiser predicts clean speech
    directly instead of the score.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr > 1.0 - t_guard):
        raise ValueError(f"conversion degenerates for t > {1.0 - t_guard}")
    x_t = np.asarray(x_t, dtype=np.complex128)
    while t_arr.ndim < x_t.ndim:
        t_arr = t_arr[..., None]
    return (x_t - np.asarray(y) * t_arr + t_arr * (1.0 - t_arr) * np.asarray(score)) / (1.0 - t_arr)


def reverse_drift(x_t, y, t: float, score, sde) -> np.ndarray:
    """Drift of the reverse-time SDE: f(x_t, y, t) - g(t)^2 * score."""
    score = np.asarray(score)
    if not np.all(np.isfinite(score.view(np.float64) if score.dtype.kind == "c" else score)):
        raise ValueError("score must be finite")
    g = sde.diffusion(t)
    return sde.drift(x_t, y, t) - g * g * score
