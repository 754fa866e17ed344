"""Seeded Monte-Carlo evaluation of end-to-end estimation error.

One trial draws a channel, observation matrices, and the configured design,
then pushes a single parameter draw through the coherent-sum receive chain

    y = sum_m H_m F_m (A_m theta + v_m) + u,     theta_hat = W_RF^H y,

and scores the squared estimation error.  Randomness is split into four
purpose streams (channel, nodes, uncertainty, receiver noise) derived from
``(master_seed, axis_index, trial_index, purpose)`` counters, so trials are
reproducible, independent, and identical draws are shared by every design
evaluated at the same trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import robust as robust_mod
from .channel import (
    NormBallUncertainty,
    StochasticUncertainty,
    apply_stochastic_error,
    sample_channel,
    sample_norm_ball_error,
)
from .config import ScenarioConfig
from .design import (
    DesignProblem,
    assemble_problem,
    design_per_node_power,
    design_total_power,
    design_zf,
    select_rf_combiner,
)
from .errors import BeamformingError, ConfigError
from .network import (
    NodeModel,
    PriorModel,
    centralized_mmse_bound,
    fc_from_config,
    generate_observation,
    sample_nodes,
    sample_parameter,
)
from .somp import decompose_network

DESIGN_KINDS = (
    "zf",
    "total_power",
    "per_node",
    "zf_hybrid",
    "total_hybrid",
    "per_node_hybrid",
    "robust_stochastic",
    "robust_norm_ball",
    "agnostic",
)

_IMPERFECT_KINDS = ("robust_stochastic", "robust_norm_ball", "agnostic")

SWEEP_AXES = {
    "snr_fc": "snr_fc_db",
    "m_nodes": "m_nodes",
    "sigma_h_sq": "sigma_h_sq",
    "eps_h": "eps_h",
}

_PURPOSES = ("channel", "nodes", "uncertainty", "noise")


@dataclass(frozen=True)
class TrialStreams:
    """Independent per-purpose generators for one Monte-Carlo trial."""

    channel: np.random.Generator
    nodes: np.random.Generator
    uncertainty: np.random.Generator
    noise: np.random.Generator

    @staticmethod
    def derive(master_seed: int, axis_index: int, trial_index: int) -> "TrialStreams":
        gens = {
            name: np.random.Generator(
                np.random.PCG64(
                    np.random.SeedSequence(
                        [master_seed, axis_index, trial_index, purpose]
                    )
                )
            )
            for purpose, name in enumerate(_PURPOSES)
        }
        return TrialStreams(**gens)


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    design: str
    mse_mean: float
    mse_stderr: float
    bound: float
    trials_used: int
    failures: int


@dataclass(frozen=True)
class SweepResult:
    axis: str
    rows: tuple[SweepRow, ...]


def _draw_channel_error(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-node CSI error under whichever uncertainty model is configured."""
    if cfg.sigma_h_sq > 0:
        u = StochasticUncertainty(
            sigma_h_sq=cfg.sigma_h_sq, alpha_fc=cfg.alpha_fc, beta=cfg.beta
        )
        zeros = np.zeros((cfg.n_r, cfg.n_t), dtype=complex)
        return np.stack(
            [apply_stochastic_error(zeros, u, rng) for _ in range(cfg.m_nodes)]
        )
    if cfg.eps_h > 0:
        u = NormBallUncertainty(epsilon_h=cfg.eps_h, sampling_mode=cfg.ball_mode)
        return np.stack(
            [
                sample_norm_ball_error(cfg.n_r, cfg.n_t, u, rng)
                for _ in range(cfg.m_nodes)
            ]
        )
    return np.zeros((cfg.m_nodes, cfg.n_r, cfg.n_t), dtype=complex)


def _build_design(
    cfg: ScenarioConfig,
    kind: str,
    prob: DesignProblem,
    h_hat: np.ndarray,
    nodes: list[NodeModel],
    prior: PriorModel,
    fc,
    w_rf: np.ndarray,
    a_s: np.ndarray,
):
    """Per-node effective precoders (m, n_t, q) for the requested design."""
    if kind in ("zf", "zf_hybrid", "agnostic"):
        pre = design_zf(prob)
    elif kind in ("total_power", "total_hybrid"):
        pre, _ = design_total_power(prob, cfg.rho_t)
    elif kind in ("per_node", "per_node_hybrid"):
        pre, _ = design_per_node_power(prob, [n.rho for n in nodes])
    elif kind == "robust_stochastic":
        u = StochasticUncertainty(
            sigma_h_sq=cfg.sigma_h_sq, alpha_fc=cfg.alpha_fc, beta=cfg.beta
        )
        rp = robust_mod.assemble_stochastic(h_hat, nodes, prior, fc, w_rf, u)
        pre = robust_mod.design_robust_stochastic(rp)
    elif kind == "robust_norm_ball":
        rp = robust_mod.assemble_norm_ball(h_hat, nodes, prior, fc, w_rf, cfg.eps_h)
        pre = robust_mod.design_robust_norm_ball(rp)
    else:
        raise ConfigError(f"unknown design kind {kind!r}")

    if kind.endswith("_hybrid"):
        return decompose_network(pre, a_s, cfg.n_rf_node).effective
    return pre.per_node


def conditional_mse(
    f_eff: np.ndarray,
    h: np.ndarray,
    nodes: list[NodeModel],
    prior: PriorModel,
    w_rf: np.ndarray,
    r_u: np.ndarray,
) -> float:
    """Exact MSE of the linear receive chain given the realized channel.

    Includes the residual signal distortion (nonzero for hybrid or
    estimate-based designs), the forwarded observation noise, and the
    combiner-coloured receiver noise.
    """
    p = prior.p
    gain = np.zeros((p, p), dtype=complex)
    noise = 0.0
    for m, node in enumerate(nodes):
        eff = w_rf.conj().T @ h[m] @ f_eff[m]
        gain += eff @ node.a_obs
        noise += float(np.trace(eff @ node.r_noise @ eff.conj().T).real)
    distortion = gain - np.eye(p)
    signal = float(
        np.trace(distortion @ prior.r_theta @ distortion.conj().T).real
    )
    floor = float(np.trace(w_rf.conj().T @ r_u @ w_rf).real)
    return signal + noise + floor


def run_trial(
    cfg: ScenarioConfig, design_kind: str, streams: TrialStreams
) -> tuple[float, dict]:
    """One end-to-end Monte-Carlo trial; returns the squared error and
    diagnostics (centralized bound, conditional MSE, constraint residual)."""
    if design_kind not in DESIGN_KINDS:
        raise ConfigError(f"design kind must be one of {DESIGN_KINDS}")

    chan = sample_channel(cfg, streams.channel)
    nodes = sample_nodes(cfg, streams.nodes)
    prior = PriorModel.identity(cfg.p)
    fc = fc_from_config(cfg)
    bound = centralized_mmse_bound(nodes, prior)

    delta = _draw_channel_error(cfg, streams.uncertainty)
    if design_kind in _IMPERFECT_KINDS:
        h_design = chan.h  # the design only ever sees the estimate
        h_applied = chan.h + delta
    else:
        h_design = chan.h
        h_applied = chan.h

    w_rf = select_rf_combiner(chan, cfg.n_rf_fc)
    prob = assemble_problem(h_design, nodes, prior, fc, w_rf)
    f_eff = _build_design(
        cfg, design_kind, prob, h_design, nodes, prior, fc, w_rf, chan.a_s
    )

    theta = sample_parameter(prior, streams.noise)
    y = np.zeros(cfg.n_r, dtype=complex)
    for m, node in enumerate(nodes):
        x_m = generate_observation(node, theta, streams.noise)
        y += h_applied[m] @ (f_eff[m] @ x_m)
    u_noise = np.sqrt(cfg.sigma_fc_sq / 2.0) * (
        streams.noise.standard_normal(cfg.n_r)
        + 1j * streams.noise.standard_normal(cfg.n_r)
    )
    y += u_noise
    theta_hat = (w_rf.conj().T @ y)[: cfg.p]
    sq_error = float(np.sum(np.abs(theta_hat - theta) ** 2))

    gain_residual = np.zeros((cfg.p, cfg.p), dtype=complex)
    for m, node in enumerate(nodes):
        gain_residual += w_rf.conj().T @ h_applied[m] @ f_eff[m] @ node.a_obs
    gain_residual -= np.eye(cfg.p)

    diagnostics = {
        "bound": bound,
        "conditional_mse": conditional_mse(
            f_eff, h_applied, nodes, prior, w_rf, fc.r_u
        ),
        "constraint_residual": float(np.linalg.norm(gain_residual)),
        "design": design_kind,
    }
    return sq_error, diagnostics


def estimate_mse(
    cfg: ScenarioConfig, design_kind: str, axis_index: int = 0
) -> tuple[float, float]:
    """Sample mean and standard error of the squared estimation error."""
    if cfg.trials < 2:
        raise ConfigError("estimate_mse needs at least two trials")
    errors = []
    failures = 0
    for t in range(cfg.trials):
        streams = TrialStreams.derive(cfg.master_seed, axis_index, t)
        try:
            sq, _ = run_trial(cfg, design_kind, streams)
        except BeamformingError:
            failures += 1
            continue
        errors.append(sq)
    if not errors:
        raise BeamformingError(f"all {cfg.trials} trials failed for {design_kind}")
    arr = np.asarray(errors)
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, stderr


def sweep(
    cfg: ScenarioConfig, axis: str, values, designs: list[str]
) -> SweepResult:
    """Monte-Carlo MSE of each design at each axis value, with the
    per-scenario centralized bound attached to every row."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {tuple(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    if not designs:
        raise ConfigError("sweep needs at least one design")
    for d in designs:
        if d not in DESIGN_KINDS:
            raise ConfigError(f"unknown design kind {d!r}")

    field = SWEEP_AXES[axis]
    rows = []
    for v_idx, value in enumerate(values):
        cast = int(value) if field == "m_nodes" else float(value)
        cfg_v = replace(cfg, **{field: cast})
        errors: dict[str, list[float]] = {d: [] for d in designs}
        failures = {d: 0 for d in designs}
        bounds = []
        for t in range(cfg_v.trials):
            streams = TrialStreams.derive(cfg_v.master_seed, v_idx, t)
            nodes = sample_nodes(cfg_v, streams.nodes)
            bounds.append(centralized_mmse_bound(nodes, PriorModel.identity(cfg_v.p)))
            for d in designs:
                streams_d = TrialStreams.derive(cfg_v.master_seed, v_idx, t)
                try:
                    sq, _ = run_trial(cfg_v, d, streams_d)
                except BeamformingError:
                    failures[d] += 1
                    continue
                errors[d].append(sq)
        bound_mean = float(np.mean(bounds))
        for d in designs:
            arr = np.asarray(errors[d])
            if arr.size == 0:
                mean, stderr = float("nan"), float("nan")
            else:
                mean = float(arr.mean())
                stderr = (
                    float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
                )
            rows.append(
                SweepRow(
                    sweep_value=float(value),
                    design=d,
                    mse_mean=mean,
                    mse_stderr=stderr,
                    bound=bound_mean,
                    trials_used=int(arr.size),
                    failures=failures[d],
                )
            )
    return SweepResult(axis=axis, rows=tuple(rows))
