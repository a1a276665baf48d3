"""Monte Carlo experiments: calibration, robust beamforming and metrics."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .beamformer import PowerBudget, achievable_rate, solve_minmax
from .channel import (
    ArrayGeometry,
    ChannelModel,
    PowerAngularSpectrum,
    observe_pilot,
    sample_channel,
    snr_to_noise,
)
from .config import ExperimentConfig
from .conformal import conformal_threshold, naive_radius, nonconformity_score
from .estimator import (
    GenerativeChannelModel,
    fit_generative_em,
    misspecified_lmmse,
    oracle_lmmse,
    posterior_from_generative,
)
from .numerics import RNG_ALGORITHM, rng_stream

log = logging.getLogger(__name__)

# spawn keys separating experiment-level draws from per-trial draws
_SETUP, _TRIAL = 0, 1
_ANGLE, _TRAIN = 0, 1
_MODEL, _CAL, _TEST, _NAIVE = 0, 1, 2, 3

# training channels per mean angle in per_trial angle mode
_TRAIN_CHUNK = 100

METRICS = ("coverage", "outage", "avg_rate")


@dataclass(frozen=True)
class ExperimentContext:
    """State shared by all trials: fixed channel model and trained estimator."""

    config: ExperimentConfig
    channel_model: ChannelModel | None
    generative_model: GenerativeChannelModel | None


@dataclass(frozen=True)
class TrialMetrics:
    """Per-trial metrics; arrays are indexed ``[method, alpha]``."""

    trial_index: int
    methods: tuple
    alphas: tuple
    coverage: np.ndarray
    outage: np.ndarray
    avg_rate: np.ndarray
    vacuous: np.ndarray
    points: list | None = field(default=None, compare=False, repr=False)

    def metric(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass(frozen=True)
class AggregateReport:
    config: ExperimentConfig
    methods: tuple
    alphas: tuple
    per_trial: dict  # metric name -> (n_trials, n_methods, n_alphas)
    rng_algorithm: str = RNG_ALGORITHM

    def mean(self, metric: str) -> np.ndarray:
        return self.per_trial[metric].mean(axis=0)

    def std(self, metric: str) -> np.ndarray:
        return self.per_trial[metric].std(axis=0)

    def value(self, metric: str, method: str, alpha: float, stat: str = "mean") -> float:
        i = self.methods.index(method)
        j = self.alphas.index(alpha)
        return float(getattr(self, stat)(metric)[i, j])

    def rows(self):
        """One dict per (method, alpha) in CSV column order."""
        means = {m: self.mean(m) for m in METRICS}
        stds = {m: self.std(m) for m in METRICS}
        for i, method in enumerate(self.methods):
            for j, alpha in enumerate(self.alphas):
                yield {
                    "method": method,
                    "alpha": alpha,
                    "coverage_mean": means["coverage"][i, j],
                    "coverage_std": stds["coverage"][i, j],
                    "outage_mean": means["outage"][i, j],
                    "outage_std": stds["outage"][i, j],
                    "rate_mean": means["avg_rate"][i, j],
                    "rate_std": stds["avg_rate"][i, j],
                }


def _geometry(config: ExperimentConfig) -> ArrayGeometry:
    return ArrayGeometry(config.num_antennas, config.element_spacing)


def _channel_model(config: ExperimentConfig, rng: np.random.Generator) -> ChannelModel:
    angle = config.mean_angle
    if angle is None:
        angle = rng.uniform(-np.pi, np.pi)
    pas = PowerAngularSpectrum(angle, config.angular_spread, config.pas_family)
    return ChannelModel.from_pas(_geometry(config), pas, config.grid_points)


def _training_channels(config: ExperimentConfig, fixed: ChannelModel | None) -> np.ndarray:
    rng = rng_stream(config.base_seed, _SETUP, _TRAIN)
    total = config.n_train_generative
    if fixed is not None:
        return sample_channel(fixed, rng, total)
    chunks = []
    for start in range(0, total, _TRAIN_CHUNK):
        model = _channel_model(config, rng)
        chunks.append(sample_channel(model, rng, min(_TRAIN_CHUNK, total - start)))
    return np.concatenate(chunks)


def prepare_experiment(config: ExperimentConfig) -> ExperimentContext:
    """Build the fixed channel model and train the generative estimator once."""
    fixed = None
    if config.angle_mode == "fixed":
        fixed = _channel_model(config, rng_stream(config.base_seed, _SETUP, _ANGLE))
    generative = None
    if config.estimator == "generative":
        H = _training_channels(config, fixed)
        generative = fit_generative_em(H, config.latent_dim, config.em_max_iters, config.em_tol)
        log.info(
            "fitted generative model: L=%d, sigma_d^2=%.4g after %d EM iterations",
            config.latent_dim, generative.residual_variance, len(generative.history) - 1,
        )
    return ExperimentContext(config, fixed, generative)


def _estimate(context: ExperimentContext, model: ChannelModel, obs):
    kind = context.config.estimator
    if kind == "oracle":
        return oracle_lmmse(obs, model.covariance)
    if kind == "misspecified":
        return misspecified_lmmse(obs, context.config.prior_scale)
    return posterior_from_generative(obs, context.generative_model)


def run_trial(
    config: ExperimentConfig,
    trial_index: int,
    context: ExperimentContext | None = None,
    keep_points: bool = False,
) -> TrialMetrics:
    """One draw of calibration and test sets, evaluated for every method and alpha.

    All randomness comes from streams keyed by ``base_seed + trial_index``, so
    both methods see exactly the same channels and pilots.
    """
    if context is None:
        context = prepare_experiment(config)
    seed = config.base_seed + trial_index

    model = context.channel_model
    if model is None:
        model = _channel_model(config, rng_stream(seed, _TRIAL, _MODEL))

    gamma2 = snr_to_noise(config.num_antennas, config.snr_tr_db)
    budget = PowerBudget(config.power, snr_to_noise(config.num_antennas, config.snr_db, config.power))

    def draw(key, count):
        rng = rng_stream(seed, _TRIAL, key)
        h = sample_channel(model, rng, count)
        est = _estimate(context, model, observe_pilot(h, gamma2, rng))
        return h, est

    h_cal, est_cal = draw(_CAL, config.n_cal)
    h_test, est_test = draw(_TEST, config.n_test)
    cal_scores = nonconformity_score(est_cal.mean, h_cal)
    test_scores = nonconformity_score(est_test.mean, h_test)

    alphas = config.alpha_grid
    radii = {}
    for method in config.methods:
        if method == "conformal":
            radii[method] = np.array([conformal_threshold(cal_scores, a) for a in alphas])
        else:
            # the posterior covariance is shared by all test points, so one
            # Monte Carlo batch serves every point and every alpha
            rng = rng_stream(seed, _TRIAL, _NAIVE)
            radii[method] = np.atleast_1d(
                naive_radius(est_test.covariance, np.array(alphas), config.mc_samples, rng)
            )

    shape = (len(config.methods), len(alphas))
    coverage, outage, avg_rate, vacuous = (np.empty(shape) for _ in range(4))
    points = [] if keep_points else None
    h_norms = np.linalg.norm(est_test.mean, axis=1)
    for i, method in enumerate(config.methods):
        for j, alpha in enumerate(alphas):
            q = radii[method][j]
            covered = test_scores <= q
            sol = solve_minmax(est_test.mean, q, budget)
            realised = achievable_rate(sol.w_star, h_test, budget.noise_variance)
            out = realised < sol.guaranteed_rate
            coverage[i, j] = covered.mean()
            outage[i, j] = out.mean()
            avg_rate[i, j] = sol.guaranteed_rate.mean()
            vacuous[i, j] = (h_norms <= q).mean()
            if keep_points:
                for p in range(config.n_test):
                    points.append({
                        "trial": trial_index, "point": p, "alpha": alpha, "method": method,
                        "score": test_scores[p], "radius": q, "covered": int(covered[p]),
                        "rate_bar": sol.guaranteed_rate[p], "realized_rate": realised[p],
                        "outage": int(out[p]),
                    })
    return TrialMetrics(trial_index, config.methods, alphas, coverage, outage, avg_rate, vacuous, points)


def _trial_worker(context: ExperimentContext, trial_index: int) -> TrialMetrics:
    return run_trial(context.config, trial_index, context)


def aggregate(config: ExperimentConfig, trials: list) -> AggregateReport:
    trials = sorted(trials, key=lambda t: t.trial_index)
    per_trial = {m: np.stack([t.metric(m) for t in trials]) for m in METRICS}
    return AggregateReport(config, config.methods, config.alpha_grid, per_trial)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> AggregateReport:
    """Run ``n_trials`` trials (optionally in worker processes) and aggregate.

    Results do not depend on ``workers``: trials carry their own seeds and are
    reduced in trial order.
    """
    context = prepare_experiment(config)
    indices = range(config.n_trials)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(partial(_trial_worker, context), indices, chunksize=8))
    else:
        trials = [_trial_worker(context, t) for t in indices]
    return aggregate(config, trials)
