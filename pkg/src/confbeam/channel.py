"""Spatially correlated MISO channel: array response, PAS covariance, pilots."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial.legendre import leggauss

from .numerics import hermitian_cholesky, sample_complex_gaussian, standard_complex_normal

PasFamily = Literal["laplacian", "uniform", "point_mass"]

DEFAULT_SPREAD = np.deg2rad(10.0)
DEFAULT_GRID_POINTS = 1024


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array; spacing in wavelengths."""

    num_antennas: int
    element_spacing: float = 0.5

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be > 0")


@dataclass(frozen=True)
class PowerAngularSpectrum:
    mean_angle: float = 0.0
    angular_spread: float = DEFAULT_SPREAD
    family: PasFamily = "laplacian"

    def __post_init__(self):
        if self.family not in ("laplacian", "uniform", "point_mass"):
            raise ValueError(f"unknown PAS family {self.family!r}")
        if self.family != "point_mass" and not self.angular_spread > 0:
            raise ValueError("angular_spread must be > 0")

    def density(self, phi: np.ndarray) -> np.ndarray:
        """Unnormalised PAS evaluated at ``phi`` (not defined for point masses)."""
        d = _wrap(np.asarray(phi, dtype=float) - self.mean_angle)
        if self.family == "laplacian":
            return np.exp(-np.sqrt(2.0) * np.abs(d) / self.angular_spread)
        if self.family == "uniform":
            return (np.abs(d) <= self.angular_spread).astype(float)
        raise ValueError("point_mass PAS has no density")


@dataclass(frozen=True)
class ChannelModel:
    geometry: ArrayGeometry
    pas: PowerAngularSpectrum | None
    covariance: np.ndarray
    cov_factor: np.ndarray = field(repr=False)

    @classmethod
    def from_pas(
        cls,
        geometry: ArrayGeometry,
        pas: PowerAngularSpectrum,
        grid_points: int = DEFAULT_GRID_POINTS,
    ) -> "ChannelModel":
        C = build_covariance(geometry, pas, grid_points)
        return cls(geometry, pas, C, hermitian_cholesky(C))

    @classmethod
    def from_covariance(cls, geometry: ArrayGeometry, covariance: np.ndarray) -> "ChannelModel":
        C = np.asarray(covariance, dtype=complex)
        n = geometry.num_antennas
        if C.shape != (n, n):
            raise ValueError(f"covariance shape {C.shape} does not match {n} antennas")
        return cls(geometry, None, C, hermitian_cholesky(C))

    @property
    def num_antennas(self) -> int:
        return self.geometry.num_antennas


@dataclass(frozen=True)
class PilotObservation:
    """Received uplink pilot ``y = h s + n``.

    ``y`` holds one observation of shape ``(N,)`` or a batch ``(M, N)`` that
    shares the same noise variance.
    """

    y: np.ndarray
    noise_variance: float
    pilot_symbol: complex = 1.0

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be > 0")
        if not np.isclose(abs(self.pilot_symbol), 1.0):
            raise ValueError("pilot symbol must have unit modulus")


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def array_response(geometry: ArrayGeometry, phi) -> np.ndarray:
    """Steering vector(s) ``exp(j 2 pi d n sin(phi))``.

    A scalar ``phi`` yields shape ``(N,)``; an array of K angles yields ``(N, K)``.
    """
    n = np.arange(geometry.num_antennas)
    phase = 2 * np.pi * geometry.element_spacing * np.multiply.outer(n, np.sin(phi))
    return np.exp(1j * phase)


def _gauss_nodes(a: float, b: float, m: int):
    x, w = leggauss(m)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def pas_quadrature(pas: PowerAngularSpectrum, grid_points: int, rule: str = "gauss"):
    """Angles and weights ``w_k ~ g(phi_k) dphi`` discretising the PAS integral.

    ``rule="gauss"`` places Gauss-Legendre nodes on each interval where the
    density is smooth (split at the Laplacian peak and at window edges), which
    converges spectrally. ``rule="midpoint"`` is the plain uniform midpoint grid
    over [-pi, pi).
    """
    if rule == "midpoint":
        phi = -np.pi + (np.arange(grid_points) + 0.5) * (2 * np.pi / grid_points)
        return phi, pas.density(phi) * (2 * np.pi / grid_points)
    if rule != "gauss":
        raise ValueError(f"unknown quadrature rule {rule!r}")

    phi0 = pas.mean_angle
    if pas.family == "laplacian":
        half = grid_points // 2
        p1, w1 = _gauss_nodes(phi0 - np.pi, phi0, half)
        p2, w2 = _gauss_nodes(phi0, phi0 + np.pi, grid_points - half)
        phi, w = np.concatenate([p1, p2]), np.concatenate([w1, w2])
        return phi, w * pas.density(phi)
    # uniform: constant density on the window
    width = min(pas.angular_spread, np.pi)
    return _gauss_nodes(phi0 - width, phi0 + width, grid_points)


def build_covariance(
    geometry: ArrayGeometry,
    pas: PowerAngularSpectrum,
    grid_points: int = DEFAULT_GRID_POINTS,
    rule: str = "gauss",
) -> np.ndarray:
    """Spatial covariance ``int g(phi) a(phi) a(phi)^H dphi`` with trace N."""
    if grid_points < 64:
        raise ValueError("grid_points must be >= 64")
    n = geometry.num_antennas
    if pas.family == "point_mass":
        a = array_response(geometry, pas.mean_angle)
        C = np.outer(a, a.conj())
    else:
        phi, w = pas_quadrature(pas, grid_points, rule)
        A = array_response(geometry, phi)
        C = (A * w) @ A.conj().T
    C = 0.5 * (C + C.conj().T)
    return C * (n / np.trace(C).real)


def sample_channel(model: ChannelModel, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``h ~ CN(0, C_h)``; shape ``(N,)`` or ``(size, N)``."""
    mean = np.zeros(model.num_antennas, dtype=complex)
    return sample_complex_gaussian(mean, model.cov_factor, rng, size)


def observe_pilot(h: np.ndarray, noise_variance: float, rng: np.random.Generator) -> PilotObservation:
    """Uplink pilot reception with unit pilot symbol and noise CN(0, noise_variance I)."""
    if not noise_variance > 0:
        raise ValueError("noise_variance must be > 0")
    h = np.asarray(h, dtype=complex)
    noise = np.sqrt(noise_variance) * standard_complex_normal(rng, h.shape)
    return PilotObservation(h + noise, float(noise_variance))


def snr_to_noise(geometry: ArrayGeometry | int, snr_db: float, power: float | None = None) -> float:
    """Noise variance for a given SNR under channel power E||h||^2 = N.

    Without ``power`` this is the pilot noise ``gamma^2 = N / SNR_tr``; with it,
    the downlink noise ``sigma^2 = N P / SNR``.
    """
    n = geometry.num_antennas if isinstance(geometry, ArrayGeometry) else int(geometry)
    scale = n if power is None else n * power
    return scale / 10 ** (snr_db / 10)
