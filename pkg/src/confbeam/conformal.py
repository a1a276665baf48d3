"""Split-conformal and naive spherical uncertainty sets around ``h_hat``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .numerics import DimensionMismatch, hermitian_cholesky, kth_smallest, standard_complex_normal

# guards ceil() against products like 10 * 0.9 landing a hair above an integer
_CEIL_SLACK = 1e-9


class InvalidAlpha(ValueError):
    pass


@dataclass(frozen=True)
class UncertaintySet:
    center: np.ndarray
    radius: float
    method: Literal["conformal", "naive"] = "conformal"

    def __post_init__(self):
        if not (self.radius >= 0):
            raise ValueError("radius must be >= 0 or +inf")


@dataclass(frozen=True)
class CalibrationPool:
    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("calibration pool must be a non-empty 1-D array")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("scores must be finite and >= 0")
        object.__setattr__(self, "scores", s)

    def __len__(self):
        return self.scores.size


def _check_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~((alpha > 0) & (alpha < 1))):
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def quantile_index(n: int, alpha: float) -> int:
    """``ceil((n + 1)(1 - alpha))``, the 1-indexed rank of the conformal quantile."""
    return math.ceil((n + 1) * (1 - alpha) - _CEIL_SLACK)


def nonconformity_score(h_hat: np.ndarray, h: np.ndarray) -> np.ndarray | float:
    """Residual norm ``||h - h_hat||`` (row-wise for batches)."""
    h_hat = np.asarray(h_hat)
    h = np.asarray(h)
    if h_hat.shape[-1] != h.shape[-1]:
        raise DimensionMismatch(f"lengths {h_hat.shape[-1]} and {h.shape[-1]} differ")
    score = np.linalg.norm(h - h_hat, axis=-1)
    return float(score) if score.ndim == 0 else score


def conformal_threshold(pool: CalibrationPool | np.ndarray, alpha: float) -> float:
    """Split-conformal radius: the ``ceil((n+1)(1-alpha))``-th smallest score.

    Returns ``inf`` when that rank exceeds the pool size.
    """
    alpha = float(_check_alpha(alpha))
    scores = pool.scores if isinstance(pool, CalibrationPool) else CalibrationPool(pool).scores
    k = quantile_index(scores.size, alpha)
    if k > scores.size:
        return math.inf
    return kth_smallest(scores, k)


def naive_radius(
    cov: np.ndarray,
    alpha,
    mc_samples: int,
    rng: np.random.Generator,
) -> float | np.ndarray:
    """Radius of the centred sphere holding ``1 - alpha`` of ``CN(0, cov)``.

    Estimated as the ``ceil(mc_samples (1 - alpha))``-th smallest of
    ``mc_samples`` draws of ``||e||``. A vector of alphas is answered from a
    single batch of draws.
    """
    alphas = _check_alpha(alpha)
    cov = np.asarray(cov, dtype=complex)
    factor = hermitian_cholesky(cov)
    e = standard_complex_normal(rng, (mc_samples, cov.shape[0])) @ factor.T
    norms = np.sort(np.linalg.norm(e, axis=1))
    ks = np.ceil(mc_samples * (1 - alphas) - _CEIL_SLACK).astype(int)
    radii = norms[np.clip(ks, 1, mc_samples) - 1]
    return float(radii) if radii.ndim == 0 else radii


def contains(uset: UncertaintySet, h: np.ndarray) -> bool | np.ndarray:
    """Membership ``||h - center|| <= radius``; always true for an infinite radius."""
    score = nonconformity_score(uset.center, h)
    if math.isinf(uset.radius):
        return True if np.ndim(score) == 0 else np.ones(np.shape(score), dtype=bool)
    inside = np.asarray(score) <= uset.radius
    return bool(inside) if inside.ndim == 0 else inside
