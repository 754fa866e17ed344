"""Node observation model, parameter prior, and the centralized MMSE bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .errors import DimensionError
from .linalg import hermitian_solve
from .randmat import complex_normal, psd_sqrt


@dataclass(frozen=True, eq=False)
class NodeModel:
    """One sensor: observation matrix (q x p), noise covariance (q x q, PD),
    and transmit-power budget."""

    a_obs: np.ndarray
    r_noise: np.ndarray
    rho: float

    def __post_init__(self):
        q, p = self.a_obs.shape
        if self.r_noise.shape != (q, q):
            raise DimensionError(
                f"noise covariance {self.r_noise.shape} does not match q={q}"
            )
        if self.rho <= 0:
            raise ValueError("power budget rho must be positive")


@dataclass(frozen=True, eq=False)
class PriorModel:
    """Zero-mean prior on the parameter vector with covariance r_theta (p x p)."""

    r_theta: np.ndarray

    @property
    def p(self) -> int:
        return self.r_theta.shape[0]

    @staticmethod
    def identity(p: int) -> "PriorModel":
        return PriorModel(np.eye(p, dtype=complex))


@dataclass(frozen=True, eq=False)
class FcModel:
    """Fusion center: receiver noise covariance and RF-chain count."""

    r_u: np.ndarray
    n_rf_fc: int


def sample_parameter(prior: PriorModel, rng: np.random.Generator) -> np.ndarray:
    """Draw theta = R_theta^(1/2) g with g standard complex Gaussian."""
    half = psd_sqrt(prior.r_theta)
    return half @ complex_normal(rng, prior.p)


def generate_observation(
    node: NodeModel, theta: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One noisy linear observation x = A theta + v, v ~ CN(0, R)."""
    theta = np.asarray(theta).reshape(-1)
    if theta.size != node.a_obs.shape[1]:
        raise DimensionError("theta length does not match the observation matrix")
    noise = psd_sqrt(node.r_noise) @ complex_normal(rng, node.a_obs.shape[0])
    return node.a_obs @ theta + noise


def centralized_mmse_bound(nodes: list[NodeModel], prior: PriorModel) -> float:
    """MSE of the MMSE estimator that sees every raw observation losslessly.

    Equals Tr[(R_theta^-1 + A^H R_v^-1 A)^-1] for the stacked observation
    matrix A and block-diagonal noise covariance R_v.  Lower-bounds the MSE of
    any decentralized scheme.
    """
    p = prior.p
    info = hermitian_solve(prior.r_theta, np.eye(p, dtype=complex))
    for node in nodes:
        if node.a_obs.shape[1] != p:
            raise DimensionError("all nodes must observe the same parameter dimension")
        info = info + node.a_obs.conj().T @ hermitian_solve(node.r_noise, node.a_obs)
    return float(np.trace(hermitian_solve(info, np.eye(p, dtype=complex))).real)


def sample_nodes(cfg: ScenarioConfig, rng: np.random.Generator) -> list[NodeModel]:
    """Draw the scenario's observation matrices; noise is white at the
    observation SNR and every node gets the per-node budget."""
    sigma_sq = cfg.sigma_ob_sq
    r_noise = sigma_sq * np.eye(cfg.q, dtype=complex)
    return [
        NodeModel(
            a_obs=complex_normal(rng, (cfg.q, cfg.p)),
            r_noise=r_noise,
            rho=cfg.rho_node,
        )
        for _ in range(cfg.m_nodes)
    ]


def fc_from_config(cfg: ScenarioConfig) -> FcModel:
    return FcModel(r_u=cfg.sigma_fc_sq * np.eye(cfg.n_r, dtype=complex), n_rf_fc=cfg.n_rf_fc)
