"""Gaussian posterior channel estimators.

Three estimators map a pilot observation to an approximate posterior
``CN(h_hat, C_hat)``:

* ``oracle_lmmse``: exact LMMSE under the true prior ``CN(0, C_h)``.
* ``misspecified_lmmse``: the same formulas under a wrong white prior ``beta I``.
* ``posterior_from_generative``: a linear-Gaussian latent model
  ``h = mu + W z + eps`` trained by EM. The latent vector is estimated first
  and the decoder distribution ``CN(mu + W z_hat, sigma_d^2 I)`` is then used
  as the prior of an LMMSE update.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import PilotObservation
from .numerics import standard_complex_normal

MODEL_FILE_HEADER = "confbeam-generative-model"
MODEL_FILE_VERSION = 1

VARIANCE_FLOOR = 1e-10


class SingularSystem(np.linalg.LinAlgError):
    pass


class DegenerateData(ValueError):
    pass


@dataclass(frozen=True)
class PosteriorEstimate:
    """Posterior mean(s) and a shared error covariance.

    ``mean`` has shape ``(N,)`` or ``(M, N)``; ``covariance`` is N x N and is
    the same for every row since none of the estimators here make it depend
    on the observation.
    """

    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class GenerativeChannelModel:
    loading: np.ndarray  # (N, L)
    mean: np.ndarray  # (N,)
    residual_variance: float
    history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.residual_variance > 0:
            raise ValueError("residual_variance must be > 0")
        if not np.all(np.isfinite(self.loading)):
            raise ValueError("loading matrix has non-finite entries")

    @property
    def num_antennas(self) -> int:
        return self.loading.shape[0]

    @property
    def latent_dim(self) -> int:
        return self.loading.shape[1]

    def prior_covariance(self) -> np.ndarray:
        W = self.loading
        return W @ W.conj().T + self.residual_variance * np.eye(self.num_antennas)

    def save(self, path) -> None:
        """Write the model as versioned text (see README for the layout)."""
        n, l = self.loading.shape
        lines = [
            f"{MODEL_FILE_HEADER} v{MODEL_FILE_VERSION}",
            f"{n} {l}",
            repr(float(self.residual_variance)),
        ]
        for z in np.concatenate([self.mean, self.loading.ravel()]):
            lines.append(f"{float(z.real)!r} {float(z.imag)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "GenerativeChannelModel":
        lines = Path(path).read_text().splitlines()
        if not lines or lines[0] != f"{MODEL_FILE_HEADER} v{MODEL_FILE_VERSION}":
            raise ValueError(f"{path}: not a v{MODEL_FILE_VERSION} generative model file")
        n, l = (int(t) for t in lines[1].split())
        sigma2 = float(lines[2])
        body = np.array([[float(t) for t in ln.split()] for ln in lines[3:]])
        if body.shape != (n + n * l, 2):
            raise ValueError(f"{path}: expected {n + n * l} complex entries")
        values = body[:, 0] + 1j * body[:, 1]
        return cls(values[n:].reshape(n, l), values[:n], sigma2)


def _scaled_identity_posterior(y, prior_mean, prior_var, noise_var):
    """LMMSE update with prior ``CN(prior_mean, prior_var I)``."""
    n = y.shape[-1]
    shrink = noise_var / (prior_var + noise_var)
    mean = y - shrink * (y - prior_mean)
    cov = (noise_var * prior_var / (prior_var + noise_var)) * np.eye(n)
    return PosteriorEstimate(mean, cov.astype(complex))


def oracle_lmmse(obs: PilotObservation, C_h: np.ndarray) -> PosteriorEstimate:
    """Exact posterior for ``h ~ CN(0, C_h)`` observed as ``y = h + n``."""
    y = np.asarray(obs.y, dtype=complex)
    C_h = np.asarray(C_h, dtype=complex)
    n = C_h.shape[0]
    if y.shape[-1] != n or C_h.shape != (n, n):
        raise ValueError(f"observation length {y.shape[-1]} does not match covariance {C_h.shape}")
    gamma2 = obs.noise_variance
    try:
        # A^{-1} C_h equals C_h A^{-1} because the two commute
        gain = np.linalg.solve(C_h + gamma2 * np.eye(n), C_h)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    cov = gamma2 * gain
    return PosteriorEstimate(y @ gain.T, 0.5 * (cov + cov.conj().T))


def misspecified_lmmse(obs: PilotObservation, prior_scale: float) -> PosteriorEstimate:
    """LMMSE under the (usually wrong) white prior ``CN(0, prior_scale I)``."""
    if not prior_scale > 0:
        raise ValueError("prior_scale must be > 0")
    y = np.asarray(obs.y, dtype=complex)
    gamma2 = obs.noise_variance
    n = y.shape[-1]
    mean = (prior_scale / (prior_scale + gamma2)) * y
    cov = (gamma2 * prior_scale / (prior_scale + gamma2)) * np.eye(n)
    return PosteriorEstimate(mean, cov.astype(complex))


def _log_likelihood(S, W, sigma2):
    """Average complex-Gaussian log-likelihood of centred data with scatter ``S``."""
    n = S.shape[0]
    C = W @ W.conj().T + sigma2 * np.eye(n)
    L = np.linalg.cholesky(C)
    logdet = 2.0 * np.sum(np.log(np.diag(L).real))
    Linv_S = np.linalg.solve(L, S)
    trace = np.trace(np.linalg.solve(L.conj().T, Linv_S)).real
    return -n * np.log(np.pi) - logdet - trace


def _em_step(S, W, sigma2, floor):
    n, l = W.shape
    M = W.conj().T @ W + sigma2 * np.eye(l)
    SW = S @ W
    Minv_WSW = np.linalg.solve(M, W.conj().T @ SW)
    W_new = np.linalg.solve((sigma2 * np.eye(l) + Minv_WSW).T, SW.T).T
    resid = S - SW @ np.linalg.solve(M, W_new.conj().T)
    sigma2_new = max(np.trace(resid).real / n, floor)
    return W_new, sigma2_new


def fit_generative_em(
    training_channels,
    latent_dim: int,
    max_iters: int = 500,
    tol: float = 1e-6,
    init: str = "spectral",
    rng: np.random.Generator | None = None,
) -> GenerativeChannelModel:
    """Maximum-likelihood fit of ``h = mu + W z + eps`` by EM.

    Parameters
    ----------
    training_channels : array_like
        Channel samples, shape ``(M, N)`` with ``M > latent_dim``.
    latent_dim : int
        Number of latent dimensions ``L`` (``1 <= L <= N``).
    max_iters : int
        Upper bound on EM iterations.
    tol : float
        Stop once the relative gain in average log-likelihood drops below this.
    init : {"spectral", "random"}
        ``"spectral"`` starts from the top-L eigenvectors of the sample
        covariance with the residual variance set to the mean of the discarded
        eigenvalues. ``"random"`` starts from a random loading matrix and
        needs ``rng``.

    Returns
    -------
    GenerativeChannelModel
        The fitted model; ``history`` holds the log-likelihood after
        initialisation and after every EM iteration.
    """
    H = np.asarray(training_channels, dtype=complex)
    if H.ndim != 2:
        raise ValueError("training_channels must have shape (M, N)")
    m, n = H.shape
    if not 1 <= latent_dim <= n:
        raise ValueError(f"latent_dim must be in [1, {n}]")
    if m < latent_dim + 1:
        raise ValueError(f"need at least {latent_dim + 1} training channels, got {m}")

    mu = H.mean(axis=0)
    X = H - mu
    S = X.T @ X.conj() / m
    S = 0.5 * (S + S.conj().T)
    power = np.trace(S).real
    if power == 0.0:
        # identical samples: scale the floor by their raw power instead
        power = np.mean(np.sum(np.abs(H) ** 2, axis=1))
    if power == 0.0:
        raise DegenerateData("training channels are all zero")
    floor = VARIANCE_FLOOR * power / n

    if init == "spectral":
        evals, evecs = np.linalg.eigh(S)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        sigma2 = max(evals[latent_dim:].mean() if latent_dim < n else 0.0, floor)
        W = evecs[:, :latent_dim] * np.sqrt(np.maximum(evals[:latent_dim] - sigma2, 0.0))
    elif init == "random":
        if rng is None:
            raise ValueError("random initialisation needs an rng")
        W = standard_complex_normal(rng, (n, latent_dim)) * np.sqrt(power / (n * latent_dim))
        sigma2 = max(power / n, floor)
    else:
        raise ValueError(f"unknown init {init!r}")

    ll = _log_likelihood(S, W, sigma2)
    history = [ll]
    for _ in range(max_iters):
        W, sigma2 = _em_step(S, W, sigma2, floor)
        ll_new = _log_likelihood(S, W, sigma2)
        history.append(ll_new)
        gain = (ll_new - ll) / abs(ll) if ll != 0 else abs(ll_new - ll)
        ll = ll_new
        if gain < tol:
            break
    return GenerativeChannelModel(W, mu, float(sigma2), tuple(history))


def posterior_from_generative(obs: PilotObservation, model: GenerativeChannelModel) -> PosteriorEstimate:
    """Latent estimate followed by LMMSE conditioning on the decoder prior."""
    y = np.asarray(obs.y, dtype=complex)
    if y.shape[-1] != model.num_antennas:
        raise ValueError("observation length does not match the model")
    gamma2 = obs.noise_variance
    W, mu, sigma2 = model.loading, model.mean, model.residual_variance
    n = model.num_antennas

    C_y = W @ W.conj().T + (sigma2 + gamma2) * np.eye(n)
    centred = np.atleast_2d(y - mu)
    z_hat = np.linalg.solve(C_y, centred.T).T @ W.conj()  # rows: W^H C_y^{-1} (y - mu)
    prior_mean = mu + z_hat @ W.T
    if y.ndim == 1:
        prior_mean = prior_mean[0]
    return _scaled_identity_posterior(y, prior_mean, sigma2, gamma2)
