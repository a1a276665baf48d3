"""Complex linear algebra, seeded sampling and order statistics."""
from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
JITTER = 1e-12


class NotHermitian(ValueError):
    pass


class NotPSD(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent PCG64 generator for ``seed`` and optional sub-keys.

    Sub-keys select statistically independent child streams of the same seed,
    so e.g. ``rng_stream(s, 0)`` and ``rng_stream(s, 1)`` never overlap.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def hermitian_cholesky(C: np.ndarray) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L^H == C`` for Hermitian PSD ``C``.

    Rank-deficient inputs are factorised after adding a diagonal jitter of
    ``1e-12 * trace(C) / dim``; the jitter is increased (up to the PSD
    tolerance) only when rounding leaves tiny negative eigenvalues.

    Raises
    ------
    NotHermitian
        If ``C`` deviates from ``C^H`` by more than ``1e-10 * max|C|``.
    NotPSD
        If ``C`` has an eigenvalue below ``-1e-10 * trace(C) / dim``.
    """
    C = np.asarray(C, dtype=complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("matrix has non-finite entries")
    dim = C.shape[0]
    scale = np.max(np.abs(C))
    if np.max(np.abs(C - C.conj().T)) > HERMITIAN_TOL * scale:
        raise NotHermitian("matrix is not Hermitian within tolerance")
    if scale == 0.0:
        return np.zeros_like(C)
    C = 0.5 * (C + C.conj().T)
    level = np.trace(C).real / dim

    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass

    min_eig = np.linalg.eigvalsh(C)[0]
    if min_eig < -PSD_TOL * level:
        raise NotPSD(f"minimum eigenvalue {min_eig:.3e} is below tolerance")
    jitter = JITTER * level
    eye = np.eye(dim)
    while True:
        try:
            return np.linalg.cholesky(C + jitter * eye)
        except np.linalg.LinAlgError:
            if jitter > 10 * PSD_TOL * level:
                raise NotPSD("factorisation failed even with maximal jitter")
            jitter = max(10 * jitter, -2 * min_eig)


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Draws of CN(0, 1): real and imaginary parts each with variance 1/2."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    g = rng.standard_normal(shape + (2,))
    return (g[..., 0] + 1j * g[..., 1]) * np.sqrt(0.5)


def sample_complex_gaussian(
    mean: np.ndarray,
    cov_factor: np.ndarray,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Sample ``mean + L g`` with ``g ~ CN(0, I)``.

    Parameters
    ----------
    mean : np.ndarray
        Mean vector of length N.
    cov_factor : np.ndarray
        N x N factor ``L`` of the covariance ``L L^H``.
    rng : np.random.Generator
        Source of randomness.
    size : int, optional
        Number of draws. When given the result has shape ``(size, N)``,
        otherwise a single vector of shape ``(N,)`` is returned.
    """
    mean = np.asarray(mean, dtype=complex)
    cov_factor = np.asarray(cov_factor, dtype=complex)
    if mean.ndim != 1 or cov_factor.shape != (mean.shape[0], mean.shape[0]):
        raise DimensionMismatch(
            f"mean of shape {mean.shape} incompatible with factor {cov_factor.shape}"
        )
    n = mean.shape[0]
    g = standard_complex_normal(rng, (1 if size is None else size, n))
    draws = mean + g @ cov_factor.T
    return draws[0] if size is None else draws


def kth_smallest(values, k: int) -> float:
    """The k-th order statistic (1-indexed, ascending, ties kept)."""
    values = np.asarray(values, dtype=float).ravel()
    if not 1 <= k <= values.size:
        raise IndexOutOfRange(f"k={k} outside [1, {values.size}]")
    return float(np.partition(values, k - 1)[k - 1])
