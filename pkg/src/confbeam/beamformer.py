"""Closed-form max-min beamforming over a spherical channel uncertainty set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DimensionMismatch


@dataclass(frozen=True)
class PowerBudget:
    power: float = 1.0
    noise_variance: float = 1.0

    def __post_init__(self):
        if not (self.power > 0 and self.noise_variance > 0):
            raise ValueError("power and noise_variance must be > 0")


@dataclass(frozen=True)
class BeamformingSolution:
    """Robust beamformer and its rate certificate.

    Fields are arrays with a leading batch axis when ``solve_minmax`` is
    called with a batch of estimates.
    """

    w_star: np.ndarray
    h_star: np.ndarray
    guaranteed_rate: np.ndarray | float
    worst_case_gain: np.ndarray | float


def _inner(h, w):
    """Row-wise ``h^H w``."""
    return np.sum(np.conj(h) * w, axis=-1)


def achievable_rate(w, h, noise_variance: float):
    """``log2(1 + |h^H w|^2 / sigma^2)`` in bits/s/Hz, row-wise for batches."""
    w = np.asarray(w)
    h = np.asarray(h)
    if w.shape[-1] != h.shape[-1]:
        raise DimensionMismatch(f"lengths {w.shape[-1]} and {h.shape[-1]} differ")
    rate = np.log2(1.0 + np.abs(_inner(h, w)) ** 2 / noise_variance)
    return float(rate) if np.ndim(rate) == 0 else rate


def inner_min_value(h_hat, q: float, w):
    """``min |h^H w|^2`` over the ball ``||h - h_hat|| <= q``.

    Equals ``max(|h_hat^H w| - q ||w||, 0)^2``, which is zero whenever the
    ball contains the origin.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    h_hat = np.asarray(h_hat)
    w = np.asarray(w)
    if np.isinf(q):
        return 0.0
    gap = np.abs(_inner(h_hat, w)) - q * np.linalg.norm(w, axis=-1)
    value = np.where(np.linalg.norm(h_hat, axis=-1) <= q, 0.0, np.maximum(gap, 0.0) ** 2)
    return float(value) if value.ndim == 0 else value


def worst_case_channel(h_hat, q: float, w):
    """Minimiser of ``|h^H w|^2`` on the ball around ``h_hat`` for arbitrary ``w``.

    Moves ``h_hat`` by ``q`` along ``w``, phase-aligned with ``h_hat^H w``. If
    the ball reaches the hyperplane ``h^H w = 0`` the returned point is the
    projection of ``h_hat`` onto it.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    w = np.asarray(w, dtype=complex)
    norm_w = np.linalg.norm(w)
    if norm_w == 0:
        return h_hat.copy()
    u = w / norm_w
    c = np.vdot(h_hat, u)  # h_hat^H u
    if abs(c) <= q:
        return h_hat - np.conj(c) * u
    return h_hat - q * np.exp(-1j * np.angle(c)) * u


def solve_minmax(h_hat, q, budget: PowerBudget) -> BeamformingSolution:
    """Robust MRT: ``w* = sqrt(P) h_hat / ||h_hat||`` with worst-case rate.

    ``h_hat`` may be a single estimate ``(N,)`` or a batch ``(M, N)``; ``q`` a
    scalar or per-row radii (``inf`` allowed). When ``||h_hat|| <= q`` the
    guarantee is vacuous: the rate is 0 and ``h_star`` is the zero channel, but
    ``w_star`` still points along ``h_hat`` at full power.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    single = h_hat.ndim == 1
    H = np.atleast_2d(h_hat)
    q = np.broadcast_to(np.asarray(q, dtype=float), H.shape[:1])
    if np.any(q < 0):
        raise ValueError("q must be >= 0")
    norms = np.linalg.norm(H, axis=1)
    sqrt_p = np.sqrt(budget.power)

    fallback = np.zeros(H.shape[1], dtype=complex)
    fallback[0] = 1.0
    safe = np.where(norms > 0, norms, 1.0)
    directions = np.where((norms > 0)[:, None], H / safe[:, None], fallback)
    w = sqrt_p * directions

    robust = norms > q
    margin = np.where(robust, norms - q, 0.0)
    h_star = directions * margin[:, None]
    gain = budget.power * margin**2
    # evaluated at (w*, h*) itself so that h_true == h_star is never an outage
    rate = np.log2(1.0 + np.abs(_inner(h_star, w)) ** 2 / budget.noise_variance)

    if single:
        return BeamformingSolution(w[0], h_star[0], float(rate[0]), float(gain[0]))
    return BeamformingSolution(w, h_star, rate, gain)


def outage_indicator(solution: BeamformingSolution, h_true, noise_variance: float):
    """True where the realised rate falls strictly below the guaranteed rate."""
    realised = achievable_rate(solution.w_star, h_true, noise_variance)
    out = np.asarray(realised) < np.asarray(solution.guaranteed_rate)
    return bool(out) if out.ndim == 0 else out
