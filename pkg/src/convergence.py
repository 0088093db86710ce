#!/usr/bin/env python3
"""
Running-Mean Convergence Experiments

Decaying momentum: seeded batches from a fixed finite population are
streamed through an SPDMBN layer whose training momentum decays as 1/k^alpha;
the AIRM distance between the running mean and the population's Karcher
mean is recorded at every step.

Fixed momentum with drifting parameters: a latent population whose Frechet
mean moves a small random step every iteration is streamed through many
replicate SPDMBN layers; the Monte-Carlo variance of the running mean around
the current Frechet mean is recorded and its trend is tested with a one-sided
regression slope test.
"""

import os
from dataclasses import replace
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy import stats
from scipy.stats import ortho_group

from common import console
from geometry.manifold import airm_dist, frechet_mean, frechet_variance
from geometry.matfun import expm, invsqrtm, sqrtm, sym
from layers.base import Mode
from layers.spdbn import MomentumSchedule, SPDMBN, SpdBnConfig, BnMode, batch_mean_estimate
from utils.output_dir import atomic_write_text
from .run_config import ConvergenceConfig


FINAL_DISTANCE_THRESHOLD = 0.05


class DecayingMomentumResult(BaseModel):
    """Distance of the running mean to the population mean under a 1/k^alpha momentum"""
    alpha: float
    steps: int
    final_distances: List[float] = Field(description="Final distance per seed")
    median_final_distance: float
    threshold: float = FINAL_DISTANCE_THRESHOLD
    passed: bool


class FixedMomentumResult(BaseModel):
    """Trend of the running-mean variance under a fixed momentum and bounded drift"""
    gamma: float
    replicates: int
    steps: int
    step_bound: float = Field(description="(1 - gamma^2) / (1 - gamma)^2 - 1")
    step_norm: float = Field(description="Parameter change per step in the same units")
    mean_step_distance: float = Field(description="AIRM displacement of the Frechet mean per step")
    initial_variance: float
    final_variance: float
    slope: float
    slope_stderr: float
    p_value_increasing: float = Field(description="One-sided p-value for a positive slope")
    significance: float
    passed: bool


class ConvergenceReport(BaseModel):
    seed: int
    config_hash: str = ""
    decaying: Optional[DecayingMomentumResult] = None
    fixed: Optional[FixedMomentumResult] = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in (self.decaying, self.fixed) if r is not None)


def random_symmetric(dim: int, scale: float, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Gaussian symmetric matrices with E ||S||_F^2 = scale^2"""
    shape = (dim, dim) if size is None else (size, dim, dim)
    s = sym(rng.standard_normal(shape))
    return s * scale / np.sqrt(dim * (dim + 1) / 2.0)


def sample_population(config: ConvergenceConfig, rng: np.random.Generator, centred: bool = False) -> np.ndarray:
    """
    Finite SPD population Z_n = G^(1/2) expm(S_n) G^(1/2).

    G has log-eigenvalues uniform in [-mean_spread, mean_spread] and random
    eigenvectors; S_n are symmetric perturbations of Frobenius scale
    dispersion. With centred=True the population is whitened by its own
    Karcher mean, which is then the identity.
    """
    dim = config.dim
    rotation = ortho_group.rvs(dim, random_state=rng) if dim > 1 else np.ones((1, 1))
    log_eigenvalues = rng.uniform(-config.mean_spread, config.mean_spread, dim)
    g = rotation @ np.diag(np.exp(log_eigenvalues)) @ rotation.T
    g_half = sqrtm(sym(g))
    population = sym(g_half @ expm(random_symmetric(dim, config.dispersion, rng, config.dataset_size)) @ g_half)
    if centred:
        w = invsqrtm(frechet_mean(population).mean)
        population = sym(w @ population @ w)
    return population


def _decaying_run(config: ConvergenceConfig, seed: int):
    rng = np.random.default_rng(seed)
    population = sample_population(config, rng)
    oracle = frechet_mean(population).mean

    layer = SPDMBN(config.dim, SpdBnConfig(mode=BnMode.SPDMBN, schedule=MomentumSchedule.power_decay(config.alpha)))
    distances = np.empty(config.steps)
    for step in range(config.steps):
        index = rng.integers(0, population.shape[0], config.batch_size)
        layer.forward(population[index], Mode.TRAIN)
        distances[step] = airm_dist(layer.stats.train_mean, oracle)
    return distances


def run_decaying_momentum_experiment(config: ConvergenceConfig, seed: int = 0, out_dir: Optional[str] = None
                                     ) -> DecayingMomentumResult:
    """Stream batches with momentum 1/k^alpha and record the distance to the oracle mean"""
    traces = []
    for run in range(config.seeds):
        traces.append(_decaying_run(config, int(np.random.SeedSequence([seed, run]).generate_state(1)[0])))
        console.debug(f"decaying momentum run {run}: final distance {traces[-1][-1]:.4f}")
    traces = np.stack(traces, axis=1)

    finals = traces[-1]
    median = float(np.median(finals))
    result = DecayingMomentumResult(alpha=config.alpha, steps=config.steps, final_distances=finals.tolist(),
                                    median_final_distance=median, passed=median < FINAL_DISTANCE_THRESHOLD)

    if out_dir is not None:
        steps = np.arange(1, config.steps + 1)
        gamma = steps.astype(np.float64) ** (-config.alpha)
        columns = [steps, gamma, np.median(traces, axis=1),
                   np.quantile(traces, 0.25, axis=1), np.quantile(traces, 0.75, axis=1)]
        header = ["step", "gamma", "median", "q25", "q75"] + [f"run_{i}" for i in range(traces.shape[1])]
        write_trace(os.path.join(out_dir, "trace_decaying_momentum.csv"), header,
                    np.column_stack(columns + [traces]))
    return result


def step_bound(gamma: float) -> float:
    """Largest admissible parameter change per step for a fixed momentum gamma"""
    if gamma >= 1.0:
        return float("inf")
    return (1.0 - gamma ** 2) / (1.0 - gamma) ** 2 - 1.0


def _random_unit_tangent(dim: int, rng: np.random.Generator) -> np.ndarray:
    direction = sym(rng.standard_normal((dim, dim)))
    return direction / np.linalg.norm(direction)


def run_fixed_momentum_experiment(config: ConvergenceConfig, seed: int = 0, out_dir: Optional[str] = None
                                    ) -> FixedMomentumResult:
    """
    Monte-Carlo variance of the running mean under fixed momentum and drifting parameters.

    The latent population X has Frechet mean I; at step k the observations are
    G_k^(1/2) X G_k^(1/2), so the Frechet mean is G_k exactly. The parameter
    change per step is measured relative to the batch-mean variance: a step of
    norm s moves G_k by sqrt(s * Var(B)) in a random direction, which keeps the
    previous population's variance around the new mean within (1 + s) times
    the current one. s is drift_fraction times the admissible bound.
    """
    gamma = config.gamma
    rng = np.random.default_rng([seed, 1])
    population = sample_population(config, rng, centred=True)
    dim = config.dim

    batch_variance = frechet_variance(population, np.eye(dim)) / config.batch_size
    bound = step_bound(gamma)
    step_norm = config.drift_fraction * (bound if np.isfinite(bound) else 1.0)
    displacement = float(np.sqrt(step_norm * batch_variance))

    # one shared parameter trajectory; replicates differ only in their batches
    means = [np.eye(dim)]
    for _ in range(config.replicate_steps - 1):
        g_half = sqrtm(means[-1])
        means.append(sym(g_half @ expm(displacement * _random_unit_tangent(dim, rng)) @ g_half))
    halves = [sqrtm(g) for g in means]

    schedule = MomentumSchedule.constant(gamma)
    squared = np.zeros((config.replicates, config.replicate_steps))
    for replicate in range(config.replicates):
        stream = np.random.default_rng([seed, 2, replicate])
        layer = SPDMBN(dim, SpdBnConfig(mode=BnMode.SPDMBN, schedule=schedule))
        for k in range(config.replicate_steps):
            index = stream.integers(0, population.shape[0], config.batch_size)
            batch = sym(halves[k] @ population[index] @ halves[k])
            if k == 0:
                # the running mean starts at the first batch mean
                layer.stats = replace(layer.stats, train_mean=batch_mean_estimate(batch))
            else:
                layer.forward(batch, Mode.TRAIN)
            squared[replicate, k] = airm_dist(layer.stats.train_mean, means[k]) ** 2

    variance = squared.mean(axis=0)
    steps = np.arange(config.replicate_steps)
    fit = stats.linregress(steps, variance, alternative="greater")
    result = FixedMomentumResult(
        gamma=gamma, replicates=config.replicates, steps=config.replicate_steps,
        step_bound=bound, step_norm=step_norm, mean_step_distance=displacement,
        initial_variance=float(variance[0]), final_variance=float(variance[-1]),
        slope=float(fit.slope), slope_stderr=float(fit.stderr), p_value_increasing=float(fit.pvalue),
        significance=config.significance, passed=bool(fit.pvalue > config.significance),
    )

    if out_dir is not None:
        write_trace(os.path.join(out_dir, "trace_fixed_momentum.csv"), ["step", "variance", "fitted"],
                    np.column_stack([steps, variance, fit.intercept + fit.slope * steps]))
    return result


def write_trace(path: str, header: List[str], rows: np.ndarray):
    """Comma-separated numeric trace with a header line"""
    lines = [",".join(header)]
    lines.extend(",".join(f"{value:.10g}" for value in row) for row in np.atleast_2d(rows))
    atomic_write_text(path, "\n".join(lines) + "\n")


def convergence_experiment(config: ConvergenceConfig, seed: int = 0, out_dir: Optional[str] = None,
                           config_hash: str = "") -> ConvergenceReport:
    """Run the experiments selected by config.kind"""
    report = ConvergenceReport(seed=seed, config_hash=config_hash)
    if config.kind in ("decaying", "both"):
        console.info(f"Decaying momentum: alpha={config.alpha}, {config.steps} steps, {config.seeds} runs")
        report.decaying = run_decaying_momentum_experiment(config, seed, out_dir)
    if config.kind in ("fixed", "both"):
        console.info(f"Fixed momentum: gamma={config.gamma}, {config.replicates} replicates")
        report.fixed = run_fixed_momentum_experiment(config, seed, out_dir)
    return report
