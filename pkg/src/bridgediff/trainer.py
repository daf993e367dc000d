"""Denoising training loops for the clean-estimate and score parameterizations.

The clean-estimate objective is mean ||x_hat(x_t, y, t) - x0||^2. The score
objective is the sigma^2-weighted matching loss, which collapses to
mean ||sigma(t) s(x_t, y, t) + z||^2; its parameter gradient carries a factor
sigma(t), so it starves near t = 1. That asymmetry is what the ablation here
measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .denoiser import GaussianPrior, MlpDenoiser, pack_complex
from .sde import T_GUARD, T_MIN, complex_standard_normal, sample_xt


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class TrainConfig:
    # toy-scale defaults; the full-scale reference setup is lr 2e-5,
    # batch 8, 100 epochs
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t_min: float = 0.03
    t_max: float = 0.999
    loss_mode: str = "x0"  # or "score"
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.t_min < self.t_max <= 1.0:
            raise ValueError("need 0 < t_min < t_max <= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.loss_mode not in ("x0", "score"):
            raise ValueError("loss_mode must be 'x0' or 'score'")


@dataclass
class PairDataset:
    """Stacked (x0, y) complex grids, one row per item."""

    x0: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x0.shape != self.y.shape:
            raise ValueError("x0 and y must have the same shape")

    def __len__(self) -> int:
        return self.x0.shape[0]


def make_gaussian_dataset(
    prior: GaussianPrior, n_items: int, rng: np.random.Generator
) -> PairDataset:
    """Draw (x0, y = x0 + n) rows exactly matching the oracle's prior."""
    n_bins = prior.var_x.shape[0]
    x0 = complex_standard_normal((n_items, n_bins), rng) * np.sqrt(prior.var_x)
    noise = complex_standard_normal((n_items, n_bins), rng) * np.sqrt(prior.var_n)
    return PairDataset(x0, x0 + noise)


@dataclass
class TrainBatch:
    """Items with freshly sampled diffusion times and kernel noise."""

    x0: np.ndarray
    y: np.ndarray
    t: np.ndarray
    z: np.ndarray
    x_t: np.ndarray

    @classmethod
    def sample(
        cls, x0: np.ndarray, y: np.ndarray, t_min: float, t_max: float, rng: np.random.Generator
    ) -> "TrainBatch":
        t = rng.uniform(t_min, t_max, x0.shape[0])
        x_t, z = sample_xt(x0, y, t, rng)
        return cls(x0=x0, y=y, t=t, z=z, x_t=x_t)

    @classmethod
    def at_fixed_t(
        cls, x0: np.ndarray, y: np.ndarray, t: float, rng: np.random.Generator
    ) -> "TrainBatch":
        t_vec = np.full(x0.shape[0], float(t))
        x_t, z = sample_xt(x0, y, t_vec, rng)
        return cls(x0=x0, y=y, t=t_vec, z=z, x_t=x_t)


def x0_loss(model, batch: TrainBatch) -> float:
    """Mean over the batch of the squared complex error against x0."""
    est = model.predict_x0_batch(batch.x_t, batch.y, batch.t)
    return float(np.mean(np.sum(np.abs(est - batch.x0) ** 2, axis=-1)))


def score_loss(model, batch: TrainBatch) -> float:
    """Mean of ||sigma(t) s + z||^2 for a score-parameterized model."""
    if model.parameterization != "score":
        raise ValueError("score_loss requires a score-parameterized model")
    _check_guarded(batch.t)
    sigma = np.sqrt(batch.t * (1.0 - batch.t))
    s = model.forward_raw(batch.x_t, batch.y, batch.t)
    return float(np.mean(np.sum(np.abs(sigma[:, None] * s + batch.z) ** 2, axis=-1)))


def _check_guarded(t: np.ndarray) -> None:
    if np.any(t < T_MIN) or np.any(t > 1.0 - T_GUARD):
        raise ValueError("batch t outside the guarded interval (sigma would vanish)")


def x0_loss_and_grads(model: MlpDenoiser, batch: TrainBatch) -> tuple[float, list[np.ndarray]]:
    if model.parameterization != "x0":
        raise ValueError("x0 training requires an x0-parameterized model")
    rows = model.pack_rows(batch.x_t, batch.y, batch.t)
    out = model.net.forward(rows)
    diff = out - pack_complex(batch.x0)
    n = out.shape[0]
    loss = float(np.sum(diff**2) / n)
    grads = model.net.backward(2.0 * diff / n)
    return loss, grads


def score_loss_and_grads(model: MlpDenoiser, batch: TrainBatch) -> tuple[float, list[np.ndarray]]:
    if model.parameterization != "score":
        raise ValueError("score training requires a score-parameterized model")
    _check_guarded(batch.t)
    rows = model.pack_rows(batch.x_t, batch.y, batch.t)
    out = model.net.forward(rows)
    sigma = np.sqrt(batch.t * (1.0 - batch.t))[:, None]
    residual = sigma * out + pack_complex(batch.z)
    n = out.shape[0]
    loss = float(np.sum(residual**2) / n)
    grads = model.net.backward(2.0 * sigma * residual / n)
    return loss, grads


def loss_grad_norm(model: MlpDenoiser, batch: TrainBatch) -> float:
    """L2 norm over all parameter gradients of the model's training loss."""
    fn = x0_loss_and_grads if model.parameterization == "x0" else score_loss_and_grads
    _, grads = fn(model, batch)
    return float(np.sqrt(sum(np.sum(g**2) for g in grads)))


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def init(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState, cfg: TrainConfig
) -> None:
    """Standard adaptive-moment update with bias correction, in place."""
    state.step += 1
    bc1 = 1.0 - cfg.beta1**state.step
    bc2 = 1.0 - cfg.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    curve: list[tuple[int, float, float]] = field(default_factory=list)  # epoch, train, val

    @property
    def final_val_loss(self) -> float:
        return self.curve[-1][2] if self.curve else float("nan")


def train(model: MlpDenoiser, dataset: PairDataset, cfg: TrainConfig) -> TrainResult:
    """Train the model on fresh (t, z) draws each epoch.

    Deterministic for a fixed seed. Validation uses a fixed 10% split with
    frozen (t, z) draws so the curve is comparable across epochs. Raises
    TrainingDiverged on a non-finite loss.
    """
    rng = np.random.default_rng(cfg.seed)
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    n_val = int(round(cfg.val_fraction * n))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    val_batch = TrainBatch.sample(
        dataset.x0[val_idx], dataset.y[val_idx], cfg.t_min, cfg.t_max, rng
    )

    if cfg.loss_mode == "x0":
        loss_and_grads, val_loss = x0_loss_and_grads, x0_loss
    else:
        loss_and_grads, val_loss = score_loss_and_grads, score_loss

    state = AdamState.init(model.parameters())
    result = TrainResult()
    for epoch in range(cfg.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        epoch_losses = []
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = TrainBatch.sample(
                dataset.x0[idx], dataset.y[idx], cfg.t_min, cfg.t_max, rng
            )
            loss, grads = loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, step {start // cfg.batch_size}"
                )
            adam_step(model.parameters(), grads, state, cfg)
            epoch_losses.append(loss)
        result.curve.append(
            (epoch, float(np.mean(epoch_losses)), val_loss(model, val_batch))
        )
    return result


def write_loss_csv(path, result: TrainResult) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for epoch, train_l, val_l in result.curve:
            fh.write(f"{epoch},{train_l:.10g},{val_l:.10g}\n")
