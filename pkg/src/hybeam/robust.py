"""Precoder designs that stay good under imperfect channel knowledge.

Two uncertainty models are covered.  Under the stochastic model the channel
error has separable receive/transmit correlation and the average MSE is again
an exact quadratic form, so the design is a closed-form constrained solve.
Under the norm-ball model the error is only known to satisfy a Frobenius
bound per node; the worst-case MSE is replaced by its convex upper bound

    (||Lhat f|| + zeta ||f||)^2 + eta^2 ||f||^2,

minimized over the estimate-based constraint by eliminating the equality and
running accelerated gradient descent with backtracking over the nullspace
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import StochasticUncertainty
from .design import DesignProblem, DigitalPrecoder, _kron_blocks, _WhitenedProblem
from .errors import DimensionError, MaxIterationsError, RankDeficiencyError
from .linalg import vec
from .network import FcModel, NodeModel, PriorModel
from .randmat import psd_sqrt


@dataclass(frozen=True, eq=False)
class RobustProblemStochastic:
    """Average-MSE quadratic program under correlated Gaussian channel error.

    omega : (m, d, d) per-node average-MSE forms
    w     : (m, p^2, d) estimate-based constraint blocks
    c     : (p^2,) vectorized identity target
    alpha_scalar : combiner energy picked up from the receive correlation
    """

    omega: np.ndarray
    w: np.ndarray
    c: np.ndarray
    alpha_scalar: float
    noise_floor: float
    n_t: int
    q: int

    @property
    def m_nodes(self) -> int:
        return self.omega.shape[0]


@dataclass(frozen=True, eq=False)
class RobustProblemNormBall:
    """Worst-case-bound program under Frobenius-bounded channel error.

    l_hat : (m, p*q, d) estimate-side factors, l_hat^H l_hat is the nominal
            MSE form; zeta and eta collect the error-radius terms.
    """

    l_hat: np.ndarray
    zeta: float
    eta: float
    w: np.ndarray
    c: np.ndarray
    noise_floor: float
    n_t: int
    q: int

    @property
    def m_nodes(self) -> int:
        return self.l_hat.shape[0]


def lemma2_expectation(
    x_hat: np.ndarray,
    z: np.ndarray,
    r_r: np.ndarray,
    r_t: np.ndarray,
    side: str,
) -> np.ndarray:
    """Closed-form second moment of X = Xhat + R_r^(1/2) S R_t^(T/2).

    side="left" returns E[X Z X^H] = Xhat Z Xhat^H + Tr[Z R_t^T] R_r;
    side="right" returns E[X^H Z X] = Xhat^H Z Xhat + Tr[Z R_r] R_t^T.
    """
    x_hat = np.asarray(x_hat, dtype=complex)
    z = np.asarray(z, dtype=complex)
    r, t = x_hat.shape
    if r_r.shape != (r, r) or r_t.shape != (t, t):
        raise DimensionError("correlation matrices do not match x_hat")
    if side == "left":
        if z.shape != (t, t):
            raise DimensionError("z must be (t, t) for the left-hand form")
        return x_hat @ z @ x_hat.conj().T + np.trace(z @ r_t.T) * r_r
    if side == "right":
        if z.shape != (r, r):
            raise DimensionError("z must be (r, r) for the right-hand form")
        return x_hat.conj().T @ z @ x_hat + np.trace(z @ r_r) * r_t.T
    raise ValueError("side must be 'left' or 'right'")


def _stacked_obs(nodes: list[NodeModel]):
    a_obs = np.stack([n.a_obs for n in nodes])
    r_noise = np.stack([n.r_noise for n in nodes])
    return a_obs, r_noise


def assemble_stochastic(
    h_hat: np.ndarray,
    nodes: list[NodeModel],
    prior: PriorModel,
    fc: FcModel,
    w_rf: np.ndarray,
    u: StochasticUncertainty,
) -> RobustProblemStochastic:
    """Average-MSE program for a channel estimate under Gaussian uncertainty."""
    h_hat = np.asarray(h_hat, dtype=complex)
    m, n_r, n_t = h_hat.shape
    if len(nodes) != m:
        raise DimensionError(f"{len(nodes)} nodes but {m} channel estimates")
    p = prior.p
    if w_rf.shape != (n_r, p):
        raise DimensionError("combiner shape does not match estimate and prior")

    a_obs, r_noise = _stacked_obs(nodes)
    q = a_obs.shape[1]
    r_fc = u.receive_correlation(n_r)
    r_s_t = u.transmit_correlation(n_t).T
    alpha = float(np.trace(w_rf.conj().T @ r_fc @ w_rf).real)

    wh = np.einsum("rc,mrt->mct", w_rf.conj(), h_hat)
    gram = np.einsum("mct,mcs->mts", wh.conj(), wh)
    r_noise_t = np.transpose(r_noise, (0, 2, 1))
    signal_cov = np.einsum("mqp,pr,msr->mqs", a_obs, prior.r_theta, a_obs.conj())

    l_blocks = _kron_blocks(r_noise_t, gram)
    j_blocks = _kron_blocks(
        np.transpose(signal_cov, (0, 2, 1)),
        np.broadcast_to(r_s_t, (m, n_t, n_t)),
    )
    t_blocks = _kron_blocks(r_noise_t, np.broadcast_to(r_s_t, (m, n_t, n_t)))
    omega = l_blocks + alpha * (j_blocks + t_blocks)

    w_blocks = _kron_blocks(np.transpose(a_obs, (0, 2, 1)), wh)
    c = vec(np.eye(p, dtype=complex))
    noise_floor = float(np.trace(w_rf.conj().T @ fc.r_u @ w_rf).real)
    return RobustProblemStochastic(
        omega=omega, w=w_blocks, c=c, alpha_scalar=alpha,
        noise_floor=noise_floor, n_t=n_t, q=q,
    )


def _identity_blocks(m: int, d: int) -> np.ndarray:
    out = np.zeros((m, d, d), dtype=complex)
    out[:] = np.eye(d)
    return out


def _precoder_from_stack(f_nodes: np.ndarray, n_t: int, q: int) -> DigitalPrecoder:
    m = f_nodes.shape[0]
    per_node = f_nodes.reshape(m, q, n_t).swapaxes(1, 2)
    return DigitalPrecoder(f=f_nodes.reshape(-1), per_node=per_node)


def design_robust_stochastic(prob: RobustProblemStochastic) -> DigitalPrecoder:
    """Minimizer of the average MSE subject to the estimate-based constraint."""
    d = prob.q * prob.n_t
    wp = _WhitenedProblem(prob.omega, _identity_blocks(prob.m_nodes, d), prob.w, prob.c)
    f_nodes, _, _ = wp.solve(np.zeros(prob.m_nodes))
    return _precoder_from_stack(f_nodes, prob.n_t, prob.q)


def evaluate_average_mse(
    precoder: DigitalPrecoder, prob: RobustProblemStochastic
) -> float:
    """Closed-form average MSE f^H Omega f plus the combiner noise floor."""
    d = prob.q * prob.n_t
    f_nodes = precoder.f.reshape(prob.m_nodes, d)
    energy = np.einsum(
        "md,mde,me->", f_nodes.conj(), prob.omega, f_nodes, optimize=True
    )
    return float(energy.real) + prob.noise_floor


def compute_norm_ball_constants(
    nodes: list[NodeModel],
    prior: PriorModel,
    w_rf: np.ndarray,
    eps_h: float,
) -> tuple[float, float]:
    """Worst-case constants (eta, zeta) for error radius eps_h.

    eta^2 bounds the signal-distortion energy through Tr[A R_theta A^H] and
    the largest combiner eigenvalue; zeta bounds the Frobenius norm of the
    error part of the noise-shaping factor through Tr[R_m].
    """
    if eps_h < 0:
        raise ValueError("eps_h must be non-negative")
    lam_max = float(np.linalg.eigvalsh(w_rf.conj().T @ w_rf).max().real)
    signal = sum(
        float(np.trace(n.a_obs @ prior.r_theta @ n.a_obs.conj().T).real)
        for n in nodes
    )
    noise = sum(float(np.trace(n.r_noise).real) for n in nodes)
    eta = eps_h * np.sqrt(signal * lam_max)
    zeta = eps_h * np.sqrt(noise * lam_max)
    return float(eta), float(zeta)


def assemble_norm_ball(
    h_hat: np.ndarray,
    nodes: list[NodeModel],
    prior: PriorModel,
    fc: FcModel,
    w_rf: np.ndarray,
    eps_h: float,
) -> RobustProblemNormBall:
    """Worst-case-bound program for a channel estimate and error radius."""
    h_hat = np.asarray(h_hat, dtype=complex)
    m, n_r, n_t = h_hat.shape
    p = prior.p
    if w_rf.shape != (n_r, p):
        raise DimensionError("combiner shape does not match estimate and prior")
    a_obs, r_noise = _stacked_obs(nodes)
    q = a_obs.shape[1]

    wh = np.einsum("rc,mrt->mct", w_rf.conj(), h_hat)
    # (R_m^(1/2))^T on the left factor keeps l_hat^H l_hat = R_m^T kron gram.
    r_half_t = np.stack([psd_sqrt(r).T for r in r_noise])
    l_hat = _kron_blocks(r_half_t, wh)
    w_blocks = _kron_blocks(np.transpose(a_obs, (0, 2, 1)), wh)
    c = vec(np.eye(p, dtype=complex))
    eta, zeta = compute_norm_ball_constants(nodes, prior, w_rf, eps_h)
    noise_floor = float(np.trace(w_rf.conj().T @ fc.r_u @ w_rf).real)
    return RobustProblemNormBall(
        l_hat=l_hat, zeta=zeta, eta=eta, w=w_blocks, c=c,
        noise_floor=noise_floor, n_t=n_t, q=q,
    )


def norm_ball_objective(f: np.ndarray, prob: RobustProblemNormBall) -> float:
    """Worst-case-bound objective (||Lhat f|| + zeta||f||)^2 + eta^2||f||^2."""
    d = prob.q * prob.n_t
    f_nodes = np.asarray(f, dtype=complex).reshape(prob.m_nodes, d)
    lf = np.einsum("mpd,md->mp", prob.l_hat, f_nodes)
    a = np.sqrt(np.sum(np.abs(lf) ** 2).real)
    fn = np.linalg.norm(f)
    return float((a + prob.zeta * fn) ** 2 + prob.eta**2 * fn**2)


def norm_ball_gradient(f: np.ndarray, prob: RobustProblemNormBall) -> np.ndarray:
    """Conjugate-coordinate gradient of :func:`norm_ball_objective`.

    A step f - s*g decreases the objective to first order by 2*s*||g||^2.  At
    the nonsmooth points (f = 0 or Lhat f = 0) the zero subgradient is used
    for the offending term.
    """
    d = prob.q * prob.n_t
    f = np.asarray(f, dtype=complex).reshape(-1)
    f_nodes = f.reshape(prob.m_nodes, d)
    lf = np.einsum("mpd,md->mp", prob.l_hat, f_nodes)
    a = np.sqrt(np.sum(np.abs(lf) ** 2).real)
    fn = np.linalg.norm(f)
    lhlf = np.einsum("mpd,mp->md", prob.l_hat.conj(), lf).reshape(-1)
    grad = np.zeros_like(f)
    if a > 0:
        grad += ((a + prob.zeta * fn) / a) * lhlf
    if fn > 0:
        grad += ((a + prob.zeta * fn) * prob.zeta / fn) * f
    grad += prob.eta**2 * f
    return grad


def _constraint_basis(prob: RobustProblemNormBall):
    """Minimum-norm particular solution of W f = c and an orthonormal
    nullspace basis, via one SVD of the stacked constraint."""
    m, p2, d = prob.w.shape
    w_dense = prob.w.transpose(1, 0, 2).reshape(p2, m * d)
    u, s, vh = np.linalg.svd(w_dense, full_matrices=True)
    if s.size < p2 or s[-1] <= max(m * d, p2) * np.finfo(float).eps * s[0]:
        raise RankDeficiencyError("estimate-based constraint lost row rank")
    f0 = vh[:p2].conj().T @ ((u.conj().T @ prob.c) / s)
    nullspace = vh[p2:].conj().T
    return f0, nullspace


def design_robust_norm_ball(
    prob: RobustProblemNormBall, max_iters: int = 50000
) -> DigitalPrecoder:
    """Minimize the worst-case MSE bound subject to W f = c.

    The equality constraint is eliminated through f = f0 + N z; the convex
    objective in z is then driven down by Nesterov-accelerated gradient steps
    with Armijo backtracking and restart on non-descent.  Iteration stops once
    the best objective has decreased by less than 1e-9 relative over ten
    iterations.
    """
    d = prob.q * prob.n_t
    f0, nullspace = _constraint_basis(prob)

    # Warm start from the zero-radius solution, which is already optimal when
    # the radius terms vanish.
    wp = _WhitenedProblem(
        np.einsum("mpa,mpb->mab", prob.l_hat.conj(), prob.l_hat),
        _identity_blocks(prob.m_nodes, d),
        prob.w,
        prob.c,
    )
    f_ls, _, _ = wp.solve(np.zeros(prob.m_nodes))
    z = nullspace.conj().T @ (f_ls.reshape(-1) - f0)

    def value(zv):
        return norm_ball_objective(f0 + nullspace @ zv, prob)

    def grad(zv):
        return nullspace.conj().T @ norm_ball_gradient(f0 + nullspace @ zv, prob)

    obj = value(z)
    best_z, best_obj = z, obj
    history = [best_obj]
    y = z
    t_mom = 1.0
    step = 1.0
    for _ in range(max_iters):
        g = grad(y)
        g_sq = float(np.real(g.conj() @ g))
        f_y = value(y)
        z_new, obj_new = y, f_y
        if g_sq > 0:
            while True:
                trial = y - step * g
                obj_trial = value(trial)
                if obj_trial <= f_y - 1e-4 * step * 2.0 * g_sq or step < 1e-280:
                    z_new, obj_new = trial, obj_trial
                    break
                step *= 0.5
        if obj_new > obj:  # acceleration overshot: restart momentum at z
            y, t_mom = z, 1.0
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom**2))
            y = z_new + ((t_mom - 1.0) / t_next) * (z_new - z)
            z, obj, t_mom = z_new, obj_new, t_next
            step *= 1.3
        if obj < best_obj:
            best_z, best_obj = z, obj
        history.append(best_obj)
        if len(history) > 10 and history[-11] - best_obj <= 1e-9 * max(
            abs(best_obj), 1e-300
        ):
            f = f0 + nullspace @ best_z
            return _precoder_from_stack(f.reshape(prob.m_nodes, d), prob.n_t, prob.q)
    raise MaxIterationsError(
        f"worst-case-bound descent did not settle within {max_iters} iterations"
    )


def worst_case_mse_bound(
    precoder: DigitalPrecoder, prob: RobustProblemNormBall
) -> float:
    """Guaranteed MSE ceiling for any error inside the radius: the design
    objective evaluated at ``precoder`` plus the combiner noise floor."""
    return norm_ball_objective(precoder.f, prob) + prob.noise_floor


def mse_with_channel_error(
    precoder: DigitalPrecoder,
    h_hat: np.ndarray,
    delta_h: np.ndarray,
    nodes: list[NodeModel],
    prior: PriorModel,
    w_rf: np.ndarray,
    noise_floor: float,
) -> float:
    """Per-node-decoupled MSE realized at a specific channel error.

    Evaluates the signal-distortion term through the error and the noise term
    through the perturbed channel, node by node; this is the quantity the
    worst-case bound dominates.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    delta_h = np.asarray(delta_h, dtype=complex)
    total = 0.0
    for m, node in enumerate(nodes):
        f_m = precoder.per_node[m]
        wd = w_rf.conj().T @ delta_h[m]
        wh = w_rf.conj().T @ (h_hat[m] + delta_h[m])
        cov = node.a_obs @ prior.r_theta @ node.a_obs.conj().T
        distort = np.trace(f_m @ cov @ f_m.conj().T @ (wd.conj().T @ wd)).real
        noise = np.trace(f_m @ node.r_noise @ f_m.conj().T @ (wh.conj().T @ wh)).real
        total += float(distort + noise)
    return total + noise_floor
