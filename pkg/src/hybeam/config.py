"""Scenario configuration shared by the channel, design, and simulation layers."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError

BALL_MODES = ("surface", "uniform-ball")


@dataclass(frozen=True)
class ScenarioConfig:
    """All knobs of one simulated sensor-network scenario.

    Defaults reproduce the reference setup: 24 five-antenna nodes observing a
    4-dimensional parameter through 5 measurements each, a 16-antenna fusion
    center with 4 RF chains, and 10 scattering clusters per link.  SNRs are in
    dB with noise variance 10**(-snr/10).
    """

    m_nodes: int = 24
    n_t: int = 5
    n_r: int = 16
    p: int = 4
    q: int = 5
    n_cl: int = 10
    n_rf_node: int = 3
    n_rf_fc: int = 4
    snr_ob_db: float = 10.0
    snr_fc_db: float = 10.0
    beta: float = 0.6
    alpha_fc: float = 0.6
    sigma_h_sq: float = 0.0
    eps_h: float = 0.0
    ball_mode: str = "surface"
    rho_t: float | None = None
    rho_node: float | None = None
    trials: int = 2000
    master_seed: int = 0

    def __post_init__(self):
        # Default budgets scale with the scenario: q per node, M*q total.
        if self.rho_t is None:
            object.__setattr__(self, "rho_t", float(self.m_nodes * self.q))
        if self.rho_node is None:
            object.__setattr__(self, "rho_node", float(self.q))
        self.validate()

    def validate(self) -> None:
        counts = {
            "m_nodes": self.m_nodes,
            "n_t": self.n_t,
            "n_r": self.n_r,
            "p": self.p,
            "q": self.q,
            "n_cl": self.n_cl,
            "n_rf_node": self.n_rf_node,
            "n_rf_fc": self.n_rf_fc,
            "trials": self.trials,
        }
        for name, value in counts.items():
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.n_rf_fc != self.p:
            raise ConfigError(
                "n_rf_fc must equal p: the receive chain estimates the parameter "
                f"directly from the RF-combined signal (got n_rf_fc={self.n_rf_fc}, "
                f"p={self.p})"
            )
        if self.p**2 > self.m_nodes * self.q * self.n_t:
            raise ConfigError(
                "p^2 must not exceed m_nodes*q*n_t, otherwise the zero-forcing "
                "constraint cannot have full row rank"
            )
        if self.n_rf_node > self.n_cl:
            raise ConfigError("n_rf_node cannot exceed the number of clusters n_cl")
        if self.n_rf_fc > self.n_cl:
            raise ConfigError("n_rf_fc cannot exceed the number of clusters n_cl")
        for name in ("beta", "alpha_fc"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        if self.sigma_h_sq < 0:
            raise ConfigError("sigma_h_sq must be non-negative")
        if self.eps_h < 0:
            raise ConfigError("eps_h must be non-negative")
        if self.sigma_h_sq > 0 and self.eps_h > 0:
            raise ConfigError(
                "sigma_h_sq and eps_h are mutually exclusive uncertainty models; "
                "set at most one of them to a positive value"
            )
        if self.ball_mode not in BALL_MODES:
            raise ConfigError(f"ball_mode must be one of {BALL_MODES}")
        if self.rho_t is not None and self.rho_t <= 0:
            raise ConfigError("rho_t must be positive")
        if self.rho_node is not None and self.rho_node <= 0:
            raise ConfigError("rho_node must be positive")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed must be a non-negative integer")

    @property
    def sigma_ob_sq(self) -> float:
        return 10.0 ** (-self.snr_ob_db / 10.0)

    @property
    def sigma_fc_sq(self) -> float:
        return 10.0 ** (-self.snr_fc_db / 10.0)


CONFIG_FIELD_NAMES = tuple(f.name for f in fields(ScenarioConfig))
