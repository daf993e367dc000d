"""Clean-speech estimators mapping (x_t, y, t) to an estimate of x0.

Two implementations share one interface: an exact Gaussian posterior-mean
oracle (for verification) and a small fully connected network with
hand-written backprop (for training experiments). A network may be
parameterized to output the clean estimate directly ("x0") or the score
("score"); the score variant recovers x0 algebraically and therefore
degenerates at t = 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .sde import x0_from_score

TIME_FREQS = 2.0 ** np.arange(8)  # geometric 1..128
N_TIME_FEATURES = 1 + 2 * TIME_FREQS.size


@dataclass(frozen=True)
class GaussianPrior:
    """Per-bin variances of independent zero-mean complex Gaussian clean
    speech and noise under the additive model y = x0 + n."""

    var_x: np.ndarray
    var_n: np.ndarray

    def __post_init__(self):
        var_x = np.atleast_1d(np.asarray(self.var_x, dtype=np.float64))
        var_n = np.atleast_1d(np.asarray(self.var_n, dtype=np.float64))
        if not (np.all(np.isfinite(var_x)) and np.all(np.isfinite(var_n))):
            raise ValueError("variances must be finite")
        if np.any(var_x < 0.0):
            raise ValueError("var_x must be nonnegative")
        if np.any(var_n <= 0.0):
            raise ValueError("var_n must be positive")
        object.__setattr__(self, "var_x", var_x)
        object.__setattr__(self, "var_n", var_n)

    @classmethod
    def from_spectrograms(cls, clean: np.ndarray, noise: np.ndarray) -> "GaussianPrior":
        """Estimate per-bin variances from measured clean/noise grids."""
        var_x = np.mean(np.abs(np.asarray(clean)) ** 2, axis=0)
        var_n = np.maximum(np.mean(np.abs(np.asarray(noise)) ** 2, axis=0), 1e-12)
        return cls(var_x, var_n)

    def wiener(self, y) -> np.ndarray:
        """E[x0 | y]: the per-bin Wiener shrinkage of the noisy grid."""
        return self.var_x / (self.var_x + self.var_n) * np.asarray(y)

    @property
    def posterior_var(self) -> np.ndarray:
        """Var[x0 | y] per bin."""
        return self.var_x * self.var_n / (self.var_x + self.var_n)

    def bayes_risk(self, t) -> float:
        """Mean squared error of the exact posterior mean at bridge time t.

        Per bin, with a = 1 - t and v = Var[x0 | y]:
        Var[x0 | x_t, y] = v sigma^2 / (a^2 v + sigma^2). Averaged over the
        given t values and summed over bins.
        """
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        a = (1.0 - t)[:, None]
        s2 = (t * (1.0 - t))[:, None]
        v = self.posterior_var[None, :]
        denom = a * a * v + s2
        per_bin = np.where(denom > 0.0, v * s2 / np.maximum(denom, 1e-300), 0.0)
        # at t = 1 the state is pinned to y, so the risk is the Wiener risk
        per_bin = np.where(s2 == 0.0, np.where(a == 0.0, v, 0.0), per_bin)
        return float(np.mean(np.sum(per_bin, axis=1)))


def oracle_predict_x0(x_t, y, t: float, prior: GaussianPrior) -> np.ndarray:
    """Exact posterior mean E[x0 | x_t, y] under the Gaussian prior and the
    bridge kernel.

    With a = 1 - t, m = E[x0 | y], v = Var[x0 | y]:
    E[x0 | x_t, y] = m + a v / (a^2 v + t(1-t)) * (x_t - a m - t y).
    At t = 0 the state is x0 itself; at t = 1 it is pinned to y and the
    estimate falls back to the Wiener mean.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    total = prior.var_x + prior.var_n
    if np.any(total <= 0.0):
        raise ValueError("degenerate prior: var_x + var_n must be positive")
    x_t = np.asarray(x_t, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    m = prior.wiener(y)
    if t <= 0.0:
        return x_t.copy()
    if t >= 1.0:
        return np.broadcast_to(m, x_t.shape).copy()
    a = 1.0 - t
    s2 = t * (1.0 - t)
    v = prior.posterior_var
    gain = a * v / (a * a * v + s2)
    return m + gain * (x_t - a * m - t * y)


class Denoiser:
    """Interface: predict_x0(x_t, y, t) with output shaped like the input."""

    parameterization = "x0"

    def predict_x0(self, x_t, y, t: float) -> np.ndarray:
        raise NotImplementedError

    def predict_x0_batch(self, x_t, y, t) -> np.ndarray:
        """Per-item prediction for stacked states with one t per item."""
        t = np.asarray(t, dtype=np.float64)
        return np.stack(
            [self.predict_x0(x_t[i], y[i], float(t[i])) for i in range(t.size)]
        )


class OracleDenoiser(Denoiser):
    """Analytic posterior mean under a GaussianPrior."""

    def __init__(self, prior: GaussianPrior):
        self.prior = prior

    def predict_x0(self, x_t, y, t: float) -> np.ndarray:
        return oracle_predict_x0(x_t, y, t, self.prior)

    def predict_x0_batch(self, x_t, y, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return np.stack(
            [oracle_predict_x0(x_t[i], y[i], float(t[i]), self.prior) for i in range(t.size)]
        )


# ---------------------------------------------------------------------------
# Fully connected network with hand-written reverse-mode gradients
# ---------------------------------------------------------------------------


def time_features(t) -> np.ndarray:
    """Raw t plus sin/cos at 8 geometric frequencies (1..128 cycles).

    The high frequencies let the net resolve t near 1 sharply, where the
    regression mode lives. Accepts a scalar or a vector of times; returns
    (n_features,) or (n, n_features).
    """
    t = np.asarray(t, dtype=np.float64)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    ang = 2.0 * np.pi * t[:, None] * TIME_FREQS[None, :]
    feats = np.concatenate([t[:, None], np.sin(ang), np.cos(ang)], axis=1)
    return feats[0] if scalar else feats


def pack_complex(values: np.ndarray) -> np.ndarray:
    """(..., bins) complex -> (..., 2*bins) real as [Re | Im]."""
    values = np.asarray(values)
    return np.concatenate([values.real, values.imag], axis=-1)


def unpack_complex(values: np.ndarray) -> np.ndarray:
    """Inverse of pack_complex."""
    half = values.shape[-1] // 2
    return values[..., :half] + 1j * values[..., half:]


class Mlp:
    """Plain tanh network on real row vectors.

    forward caches activations; backward consumes the cache and returns
    exact gradients for every weight and bias, in parameter order.
    """

    def __init__(self, dims: list[int], rng: np.random.Generator):
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        self.dims = list(dims)
        self.weights = [
            rng.standard_normal((dims[i + 1], dims[i])) / np.sqrt(dims[i])
            for i in range(len(dims) - 1)
        ]
        self.biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
        self._cache = None

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (n, in_dim) -> (n, out_dim); hidden layers tanh, output linear."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ValueError(f"expected (n, {self.dims[0]}) input, got {x.shape}")
        activations = [x]
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = z if i == len(self.weights) - 1 else np.tanh(z)
            activations.append(a)
        self._cache = activations
        return a

    def backward(self, d_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of sum(loss) given d loss / d output; order matches parameters()."""
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        activations = self._cache
        grads: list[np.ndarray] = []
        delta = np.asarray(d_out, dtype=np.float64)
        for i in reversed(range(len(self.weights))):
            a_prev = activations[i]
            if i != len(self.weights) - 1:
                delta = delta * (1.0 - activations[i + 1] ** 2)  # tanh'
            grads.insert(0, delta.sum(axis=0))  # bias
            grads.insert(0, delta.T @ a_prev)  # weight
            delta = delta @ self.weights[i]
        return grads


class MlpDenoiser(Denoiser):
    """Frame-wise network denoiser over complex grids.

    Each frame is flattened to [Re x_t | Im x_t | Re y | Im y | time features]
    so autodiff stays real-valued; outputs are re-packed to complex. The
    "score" parameterization interprets the net output as the score and
    recovers x0 via the algebraic inversion (not possible at t = 1).
    """

    def __init__(
        self,
        n_bins: int,
        hidden: tuple[int, ...] = (256, 256),
        parameterization: str = "x0",
        seed: int = 0,
    ):
        if parameterization not in ("x0", "score"):
            raise ValueError("parameterization must be 'x0' or 'score'")
        self.n_bins = int(n_bins)
        self.hidden = tuple(int(h) for h in hidden)
        self.parameterization = parameterization
        self.seed = int(seed)
        dims = [4 * self.n_bins + N_TIME_FEATURES, *self.hidden, 2 * self.n_bins]
        self.net = Mlp(dims, np.random.default_rng(seed))

    def parameters(self) -> list[np.ndarray]:
        return self.net.parameters()

    def pack_rows(self, x_t, y, t) -> np.ndarray:
        """Rows of real features, one per frame/item."""
        x_t = np.atleast_2d(np.asarray(x_t, dtype=np.complex128))
        y = np.atleast_2d(np.asarray(y, dtype=np.complex128))
        if x_t.shape != y.shape or x_t.shape[1] != self.n_bins:
            raise ValueError(
                f"expected (rows, {self.n_bins}) grids, got {x_t.shape} and {y.shape}"
            )
        t = np.asarray(t, dtype=np.float64)
        tf = time_features(t)
        if tf.ndim == 1:
            tf = np.broadcast_to(tf, (x_t.shape[0], tf.size))
        return np.concatenate([pack_complex(x_t), pack_complex(y), tf], axis=1)

    def forward_raw(self, x_t, y, t) -> np.ndarray:
        """Net output as a complex grid (the clean estimate or the score)."""
        x_t = np.asarray(x_t, dtype=np.complex128)
        rows = self.pack_rows(x_t, y, t)
        out = unpack_complex(self.net.forward(rows))
        return out[0] if x_t.ndim == 1 else out

    def predict_x0(self, x_t, y, t: float) -> np.ndarray:
        out = self.forward_raw(x_t, y, t)
        if self.parameterization == "x0":
            return out
        return x0_from_score(x_t, y, t, out)

    def predict_x0_batch(self, x_t, y, t) -> np.ndarray:
        out = self.forward_raw(x_t, y, t)
        if self.parameterization == "x0":
            return out
        t = np.asarray(t, dtype=np.float64)
        return x0_from_score(x_t, y, t, out)

    # -- checkpoint container: named real arrays plus a JSON header (v1) -----

    def save(self, path) -> None:
        meta = {
            "format_version": 1,
            "n_bins": self.n_bins,
            "hidden": list(self.hidden),
            "parameterization": self.parameterization,
            "seed": self.seed,
            "time_freqs": TIME_FREQS.tolist(),
        }
        arrays = {}
        for i, (w, b) in enumerate(zip(self.net.weights, self.net.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "MlpDenoiser":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("format_version") != 1:
                raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
            model = cls(
                n_bins=meta["n_bins"],
                hidden=tuple(meta["hidden"]),
                parameterization=meta["parameterization"],
                seed=meta["seed"],
            )
            for i in range(len(model.net.weights)):
                model.net.weights[i] = data[f"w{i}"]
                model.net.biases[i] = data[f"b{i}"]
        return model
