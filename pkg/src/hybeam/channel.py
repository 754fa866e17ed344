"""Cluster-based mmWave MIMO channel generation and CSI-error injection.

Each node-to-fusion-center link is a sum of ``n_cl`` specular clusters,

    H_m = sqrt(N_T N_R / N_cl) * sum_k alpha_k^m a_fc(phi_k) a_s(theta_{k,m})^H,

with i.i.d. standard complex Gaussian cluster gains alpha_k^m, angles of
arrival phi_k shared by all nodes, and per-node angles of departure
theta_{k,m}.  Angles are drawn uniformly on [0, pi); the half-wavelength
uniform linear arrays then sweep the full cosine range without aliasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .errors import DimensionError
from .randmat import complex_normal, psd_sqrt


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_elements: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.n_elements < 1:
            raise DimensionError("array needs at least one element")
        if self.spacing_over_wavelength <= 0:
            raise ValueError("element spacing must be positive")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of every node's channel plus its cluster-domain factors.

    gains : (m, n_cl) complex cluster gains
    aoa   : (n_cl,) angles of arrival, shared across nodes
    aod   : (m, n_cl) angles of departure per node
    a_fc  : (n_r, n_cl) receive array-response matrix
    a_s   : (m, n_t, n_cl) transmit array-response matrices
    h     : (m, n_r, n_t) channel matrices
    """

    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    a_fc: np.ndarray
    a_s: np.ndarray
    h: np.ndarray

    @property
    def m_nodes(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class StochasticUncertainty:
    """Gaussian CSI error with separable receive/transmit correlation.

    The error added to a channel estimate is R_fc^(1/2) S R_s^(T/2) with S
    i.i.d. unit-variance complex Gaussian, R_fc the receive-side correlation
    (variance sigma_h_sq, coefficient alpha_fc) and R_s the transmit-side
    correlation (unit variance, coefficient beta).
    """

    sigma_h_sq: float
    alpha_fc: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.sigma_h_sq < 0:
            raise ValueError("sigma_h_sq must be non-negative")
        for name in ("alpha_fc", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")

    def receive_correlation(self, n_r: int) -> np.ndarray:
        return correlation_matrix(n_r, self.alpha_fc, self.sigma_h_sq)

    def transmit_correlation(self, n_t: int) -> np.ndarray:
        return correlation_matrix(n_t, self.beta, 1.0)


@dataclass(frozen=True)
class NormBallUncertainty:
    """Deterministic CSI error bounded in Frobenius norm by ``epsilon_h``."""

    epsilon_h: float
    sampling_mode: str = "surface"

    def __post_init__(self):
        if self.epsilon_h < 0:
            raise ValueError("epsilon_h must be non-negative")
        if self.sampling_mode not in ("surface", "uniform-ball"):
            raise ValueError("sampling_mode must be 'surface' or 'uniform-ball'")


def array_response(geom: ArrayGeometry, angle: float) -> np.ndarray:
    """Array response vector: entry i is exp(-j*i*2*pi*(d/lambda)*cos(angle))/sqrt(N)."""
    n = geom.n_elements
    phase = 2.0 * np.pi * geom.spacing_over_wavelength * np.cos(angle)
    return np.exp(-1j * phase * np.arange(n)) / np.sqrt(n)


def _response_matrix(n: int, spacing: float, angles: np.ndarray) -> np.ndarray:
    """Columns are array responses for each angle; shape (..., n, len(angles))."""
    angles = np.asarray(angles, dtype=float)
    phase = 2.0 * np.pi * spacing * np.cos(angles)
    idx = np.arange(n)
    return np.exp(-1j * np.multiply.outer(phase, idx)).swapaxes(-1, -2) / np.sqrt(n)


def sample_channel(
    cfg: ScenarioConfig, rng: np.random.Generator, spacing: float = 0.5
) -> ChannelRealization:
    """Draw one channel realization for every node in the scenario.

    Draw order is fixed (gains, then AoAs, then AoDs) so that equal seeds give
    bit-identical realizations.
    """
    m, n_t, n_r, n_cl = cfg.m_nodes, cfg.n_t, cfg.n_r, cfg.n_cl
    gains = complex_normal(rng, (m, n_cl))
    aoa = rng.uniform(0.0, np.pi, n_cl)
    aod = rng.uniform(0.0, np.pi, (m, n_cl))

    a_fc = _response_matrix(n_r, spacing, aoa)
    a_s = _response_matrix(n_t, spacing, aod)
    scale = np.sqrt(n_t * n_r / n_cl)
    h = np.einsum("mk,rk,mtk->mrt", scale * gains, a_fc, a_s.conj(), optimize=True)
    return ChannelRealization(gains=gains, aoa=aoa, aod=aod, a_fc=a_fc, a_s=a_s, h=h)


def correlation_matrix(n: int, coeff: float, variance: float) -> np.ndarray:
    """Exponential correlation model: entry (i, j) is variance * coeff**|i-j|."""
    if not 0.0 <= coeff < 1.0:
        raise ValueError("correlation coefficient must lie in [0, 1)")
    if variance < 0:
        raise ValueError("variance must be non-negative")
    idx = np.arange(n)
    return variance * coeff ** np.abs(np.subtract.outer(idx, idx)) + 0j


def apply_stochastic_error(
    h_hat: np.ndarray, u: StochasticUncertainty, rng: np.random.Generator
) -> np.ndarray:
    """Return h_hat + R_fc^(1/2) S R_s^(T/2) with S i.i.d. complex Gaussian."""
    h_hat = np.asarray(h_hat, dtype=complex)
    if h_hat.ndim != 2:
        raise DimensionError("h_hat must be a matrix")
    n_r, n_t = h_hat.shape
    r_fc_half = psd_sqrt(u.receive_correlation(n_r))
    r_s_half_t = psd_sqrt(u.transmit_correlation(n_t)).T
    s = complex_normal(rng, (n_r, n_t))
    return h_hat + r_fc_half @ s @ r_s_half_t


def sample_norm_ball_error(
    n_r: int, n_t: int, u: NormBallUncertainty, rng: np.random.Generator
) -> np.ndarray:
    """Draw a bounded channel error of shape (n_r, n_t).

    Surface mode rescales a Gaussian matrix onto the radius-epsilon_h sphere;
    uniform-ball mode additionally shrinks the radius by u**(1/(2*n_r*n_t))
    so draws are uniform over the ball.
    """
    g = complex_normal(rng, (n_r, n_t))
    if u.sampling_mode == "uniform-ball":
        radius = u.epsilon_h * rng.uniform() ** (1.0 / (2 * n_r * n_t))
    else:
        radius = u.epsilon_h
    if radius == 0.0:
        return np.zeros((n_r, n_t), dtype=complex)
    norm = np.linalg.norm(g)
    if norm == 0.0:
        return np.zeros((n_r, n_t), dtype=complex)
    return (radius / norm) * g
