"""Monte Carlo and analytic verification suites.

Each check returns a CheckResult with human-readable lines; the CLI prints
them and maps failures to a dedicated exit code, and the test suite asserts
on the same functions so both surfaces agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .denoiser import GaussianPrior, MlpDenoiser
from .sde import (
    BrownianBridgeSde,
    OuveSde,
    complex_standard_normal,
    reverse_drift,
    sample_xt,
    score_from_x0,
    x0_from_score,
)
from .trainer import TrainBatch, loss_grad_norm, make_gaussian_dataset


@dataclass
class CheckResult:
    name: str
    passed: bool
    lines: list[str] = field(default_factory=list)


def check_kernel_marginals(
    seed: int = 0,
    n_draws: int = 100_000,
    ts: tuple[float, ...] = (0.1, 0.5, 0.9),
    shape: tuple[int, int] = (2, 3),
) -> CheckResult:
    """Empirical mean/variance of kernel draws vs the closed form, within 3
    Monte Carlo standard errors per bin."""
    rng = np.random.default_rng(seed)
    sde = BrownianBridgeSde()
    x0 = complex_standard_normal(shape, rng)
    y = complex_standard_normal(shape, rng)
    lines = []
    ok = True
    for t in ts:
        marginal = sde.marginal(x0, y, t)
        draws, _ = sample_xt(
            np.broadcast_to(x0, (n_draws, *shape)),
            np.broadcast_to(y, (n_draws, *shape)),
            t,
            rng,
        )
        emp_mean = draws.mean(axis=0)
        emp_var = np.mean(np.abs(draws - marginal.mean) ** 2, axis=0)
        var = marginal.std**2
        # each real component of the mean has variance var/2 per draw;
        # |z|^2 of a unit complex normal has unit variance
        se_mean = np.sqrt(var / 2.0 / n_draws)
        se_var = var / np.sqrt(n_draws)
        mean_err = max(
            np.max(np.abs(emp_mean.real - marginal.mean.real)),
            np.max(np.abs(emp_mean.imag - marginal.mean.imag)),
        )
        var_err = np.max(np.abs(emp_var - var))
        ok_t = mean_err <= 3.0 * se_mean and var_err <= 3.0 * se_var
        ok &= ok_t
        lines.append(
            f"t={t:.3f}: |mean err| {mean_err:.3e} (3se {3 * se_mean:.3e}), "
            f"|var err| {var_err:.3e} (3se {3 * se_var:.3e}) "
            f"{'ok' if ok_t else 'FAIL'}"
        )
    return CheckResult("kernel-marginals", ok, lines)


def check_conversion_bijection(
    seed: int = 0, n_cases: int = 1000, tol: float = 1e-9
) -> CheckResult:
    """score_from_x0 and x0_from_score invert each other across the guarded
    t range, to within tol relative error."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        shape = (int(rng.integers(1, 4)), int(rng.integers(2, 6)))
        x_t = complex_standard_normal(shape, rng) * rng.uniform(0.2, 3.0)
        y = complex_standard_normal(shape, rng) * rng.uniform(0.2, 3.0)
        t = float(rng.uniform(0.03, 0.999))
        x0_hat = complex_standard_normal(shape, rng) * rng.uniform(0.2, 3.0)
        s = score_from_x0(x_t, y, t, x0_hat)
        back = x0_from_score(x_t, y, t, s)
        related = np.max(np.abs(back - x0_hat)) / max(np.max(np.abs(x0_hat)), 1e-30)
        worst = max(worst, related)

        s0 = complex_standard_normal(shape, rng) * rng.uniform(0.2, 3.0)
        x0 = x0_from_score(x_t, y, t, s0)
        s_back = score_from_x0(x_t, y, t, x0)
        rel_s = np.max(np.abs(s_back - s0)) / max(np.max(np.abs(s0)), 1e-30)
        worst = max(worst, rel_s)
    ok = worst <= tol
    return CheckResult(
        "conversion-bijection",
        ok,
        [f"worst relative round-trip error {worst:.3e} (tol {tol:.1e}) {'ok' if ok else 'FAIL'}"],
    )


def check_optimal_score(seed: int = 0, n_cases: int = 200, tol: float = 1e-9) -> CheckResult:
    """With the true x0, the converted score equals -z/sigma(t) elementwise."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        shape = (3, 5)
        x0 = complex_standard_normal(shape, rng)
        y = complex_standard_normal(shape, rng)
        t = float(rng.uniform(0.03, 0.999))
        x_t, z = sample_xt(x0, y, t, rng)
        s = score_from_x0(x_t, y, t, x0)
        expected = -z / np.sqrt(t * (1.0 - t))
        rel = np.max(np.abs(s - expected)) / max(np.max(np.abs(expected)), 1e-30)
        worst = max(worst, rel)
    ok = worst <= tol
    return CheckResult(
        "optimal-score",
        ok,
        [f"worst relative deviation from -z/sigma {worst:.3e} (tol {tol:.1e}) {'ok' if ok else 'FAIL'}"],
    )


def check_drift_limit(seed: int = 0) -> CheckResult:
    """At x_t = y the reverse drift approaches the predicted noise y - x0_hat
    linearly in (1 - t): the deviation should fall about 10x per decade."""
    rng = np.random.default_rng(seed)
    sde = BrownianBridgeSde()
    shape = (4, 6)
    y = complex_standard_normal(shape, rng)
    x0_hat = complex_standard_normal(shape, rng)
    limit = y - x0_hat
    lines = ["      t        ||deviation||"]
    devs = []
    for t in (1.0 - 1e-2, 1.0 - 1e-3, 1.0 - 1e-4):
        s = score_from_x0(y, y, t, x0_hat)
        dev = float(np.linalg.norm(reverse_drift(y, y, t, s, sde) - limit))
        devs.append(dev)
        lines.append(f"  {t:.6f}   {dev:.6e}")
    ratios = [devs[i] / devs[i + 1] for i in range(len(devs) - 1)]
    ok = all(10.0 / 3.0 <= r <= 30.0 for r in ratios)
    lines.append(
        "decade ratios: " + ", ".join(f"{r:.2f}" for r in ratios) + f" {'ok' if ok else 'FAIL'}"
    )
    return CheckResult("drift-limit", ok, lines)


def check_gradient_scaling(seed: int = 0, n_bins: int = 16, n_items: int = 256) -> CheckResult:
    """Parameter-gradient norms of the score loss scale like sigma(t) near
    t = 1 (the instability the clean-estimate parameterization avoids);
    the x0 loss has no such factor."""
    rng = np.random.default_rng(seed)
    prior = GaussianPrior(np.ones(n_bins), np.ones(n_bins))
    data = make_gaussian_dataset(prior, n_items, rng)
    t_hi, t_mid = 1.0 - 1e-4, 0.5
    sigma_ratio = np.sqrt(t_hi * (1.0 - t_hi)) / np.sqrt(t_mid * (1.0 - t_mid))

    norms = {}
    for mode in ("score", "x0"):
        model = MlpDenoiser(n_bins, hidden=(64, 64), parameterization=mode, seed=seed)
        for label, t in (("hi", t_hi), ("mid", t_mid)):
            batch = TrainBatch.at_fixed_t(data.x0, data.y, t, np.random.default_rng(seed + 1))
            norms[(mode, label)] = loss_grad_norm(model, batch)

    score_ratio = norms[("score", "hi")] / norms[("score", "mid")]
    x0_ratio = norms[("x0", "hi")] / norms[("x0", "mid")]
    rel = score_ratio / sigma_ratio
    ok_score = 0.5 <= rel <= 2.0
    ok_x0 = 0.5 <= x0_ratio <= 2.0
    lines = [
        f"sigma ratio sigma(1-1e-4)/sigma(0.5) = {sigma_ratio:.5f}",
        f"score-loss grad-norm ratio = {score_ratio:.5f} "
        f"({rel:.2f}x of sigma ratio) {'ok' if ok_score else 'FAIL'}",
        f"x0-loss grad-norm ratio = {x0_ratio:.5f} {'ok' if ok_x0 else 'FAIL'}",
    ]
    return CheckResult("gradient-scaling", ok_score and ok_x0, lines)


def check_ouve_kernel(
    seed: int = 0, n_paths: int = 100_000, dt: float = 1e-3, t_final: float = 1.0
) -> CheckResult:
    """Euler-Maruyama simulation of the ablation SDE vs its closed-form
    kernel, within 3 Monte Carlo standard errors (the small O(dt)
    discretization bias sits well inside that band)."""
    rng = np.random.default_rng(seed)
    sde = OuveSde()
    x0, y = 1.0 + 0.0j, 0.0 + 0.0j
    n_steps = int(round(t_final / dt))
    x = np.full(n_paths, x0, dtype=np.complex128)
    for k in range(n_steps):
        t = k * dt
        g = sde.diffusion(t)
        x += sde.drift(x, y, t) * dt + g * np.sqrt(dt) * complex_standard_normal(n_paths, rng)
    marginal = sde.marginal(x0, y, t_final)
    var = marginal.std**2

    emp_mean = x.mean()
    emp_var = float(np.mean(np.abs(x - emp_mean) ** 2))
    se_mean = np.sqrt(var / 2.0 / n_paths)
    se_var = var / np.sqrt(n_paths)
    mean_err = max(abs(emp_mean.real - marginal.mean.real), abs(emp_mean.imag - marginal.mean.imag))
    var_err = abs(emp_var - var)
    ok = mean_err <= 3.0 * se_mean and var_err <= 3.0 * se_var and var > 0.0
    lines = [
        f"closed form: mean {marginal.mean.real:.6f}, var {var:.6f} (strictly positive at t=1)",
        f"simulated:   mean {emp_mean.real:.6f}, var {emp_var:.6f}",
        f"|mean err| {mean_err:.2e} (3se {3 * se_mean:.2e}), "
        f"|var err| {var_err:.2e} (3se {3 * se_var:.2e}) {'ok' if ok else 'FAIL'}",
    ]
    return CheckResult("ouve-kernel", ok, lines)


SUITES = {
    "marginals": check_kernel_marginals,
    "conversions": check_conversion_bijection,
    "optimal-score": check_optimal_score,
    "drift-limit": check_drift_limit,
    "gradients": check_gradient_scaling,
    "ouve-kernel": check_ouve_kernel,
}


def run_suites(names) -> list[CheckResult]:
    results = []
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        results.append(SUITES[name]())
    return results
