"""Perfect-CSI precoder designs.

The fusion center's RF combiner is a column selection from the receive
array-response matrix, chosen by summed cluster-gain magnitude.  Given that
combiner, the minimum-MSE digital precoders are solutions of equality- and
power-constrained quadratic programs over the stacked vectorized precoders:

    minimize  f^H Psi f   subject to  Z f = b  (+ optional power caps),

where ``Psi``, ``Z``, and the per-node power forms ``Gamma`` are Kronecker
liftings of the channel, combiner, and observation statistics.  The equality-
only problem has the closed form Psi^-1 Z^H (Z Psi^-1 Z^H)^-1 b; the total
power cap adds a scalar dual variable found by bisection; per-node caps are
handled by projected dual subgradient ascent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .errors import (
    DimensionError,
    InfeasibleError,
    MaxIterationsError,
    RankDeficiencyError,
    SingularMatrixError,
)
from .linalg import RIDGE_LADDER, vec
from .network import FcModel, NodeModel, PriorModel

_ZF_RESIDUAL_TOL = 1e-8
_BISECT_POWER_TOL = 1e-8
_NULLSPACE_CUT = 1e-12


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """Quadratic-program data for one channel realization.

    psi   : (m, d, d) per-node MSE quadratic forms, d = q*n_t
    z     : (m, p^2, d) per-node estimation-constraint blocks
    b     : (p^2,) vectorized identity target
    gamma : (m, d, d) per-node transmit-power quadratic forms
    w_rf  : (n_r, p) RF combiner in use
    noise_floor : combiner-coloured receiver noise power, added to every MSE
    """

    psi: np.ndarray
    z: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    w_rf: np.ndarray
    noise_floor: float
    n_t: int
    q: int

    @property
    def m_nodes(self) -> int:
        return self.psi.shape[0]

    @property
    def p(self) -> int:
        return self.w_rf.shape[1]


@dataclass(frozen=True, eq=False)
class DigitalPrecoder:
    """Stacked precoder vector plus its per-node matrix form.

    f        : (m*q*n_t,) stacked vectorized precoders
    per_node : (m, n_t, q) precoder matrices F_m
    """

    f: np.ndarray
    per_node: np.ndarray


def select_rf_combiner(chan: ChannelRealization, n_rf_fc: int) -> np.ndarray:
    """Pick the receive array-response columns of the strongest clusters.

    Cluster strength is the gain magnitude summed over nodes; columns are
    returned strongest first, ties broken by lowest cluster index.
    """
    n_cl = chan.a_fc.shape[1]
    if n_rf_fc > n_cl:
        raise DimensionError(
            f"cannot select {n_rf_fc} combiner columns from {n_cl} clusters"
        )
    strength = np.abs(chan.gains).sum(axis=0)
    order = np.argsort(-strength, kind="stable")[:n_rf_fc]
    return chan.a_fc[:, order]


def _kron_blocks(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched Kronecker product over a leading block axis."""
    m, i, j = a.shape
    _, k, l = b.shape
    out = np.einsum("mij,mkl->mikjl", a, b)
    return out.reshape(m, i * k, j * l)


def assemble_problem(
    h: np.ndarray,
    nodes: list[NodeModel],
    prior: PriorModel,
    fc: FcModel,
    w_rf: np.ndarray,
) -> DesignProblem:
    """Lift one channel draw into the stacked quadratic-program data.

    ``h`` holds the per-node channels as an (m, n_r, n_t) array.  Requires the
    combiner to have exactly p columns (one RF chain per parameter entry).
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 3:
        raise DimensionError("h must be (m, n_r, n_t)")
    m, n_r, n_t = h.shape
    if len(nodes) != m:
        raise DimensionError(f"{len(nodes)} nodes but {m} channel matrices")
    p = prior.p
    q = nodes[0].a_obs.shape[0]
    if w_rf.shape != (n_r, p):
        raise DimensionError(
            f"combiner must be ({n_r}, {p}) when estimating {p} parameters, "
            f"got {w_rf.shape}"
        )
    if fc.n_rf_fc != p:
        raise DimensionError("the fusion center needs exactly p RF chains")
    if p * p > m * q * n_t:
        raise DimensionError(
            "p^2 exceeds m*q*n_t; the estimation constraint cannot be met"
        )
    for node in nodes:
        if node.a_obs.shape != (q, p):
            raise DimensionError("all nodes must share the same (q, p) dimensions")

    a_obs = np.stack([node.a_obs for node in nodes])  # (m, q, p)
    r_noise = np.stack([node.r_noise for node in nodes])  # (m, q, q)

    # w^H h per node, then the two Kronecker liftings.
    wh = np.einsum("rc,mrt->mct", w_rf.conj(), h)  # (m, p, n_t)
    gram = np.einsum("mct,mcs->mts", wh.conj(), wh)  # h^H w w^H h
    psi = _kron_blocks(np.transpose(r_noise, (0, 2, 1)), gram)
    z = _kron_blocks(np.transpose(a_obs, (0, 2, 1)), wh)

    cov = np.einsum(
        "mqp,pr,msr->mqs", a_obs, prior.r_theta, a_obs.conj()
    ) + r_noise  # A R_theta A^H + R
    eye_t = np.broadcast_to(np.eye(n_t, dtype=complex), (m, n_t, n_t))
    gamma = _kron_blocks(np.transpose(cov, (0, 2, 1)), eye_t)

    b = vec(np.eye(p, dtype=complex))
    noise_floor = float(np.trace(w_rf.conj().T @ fc.r_u @ w_rf).real)
    return DesignProblem(
        psi=psi, z=z, b=b, gamma=gamma, w_rf=w_rf,
        noise_floor=noise_floor, n_t=n_t, q=q,
    )


def solve_eq_qp(q_mat: np.ndarray, z: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimize f^H Q f subject to Z f = b, Q Hermitian PD (after ridge).

    Closed form Q^-1 Z^H (Z Q^-1 Z^H)^-1 b with the ridge escalated when the
    plain solve fails.  Raises :class:`RankDeficiencyError` when Z Q^-1 Z^H is
    singular beyond ridge repair, which signals a degenerate constraint.
    """
    q_mat = np.asarray(q_mat, dtype=complex)
    z = np.asarray(z, dtype=complex)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if q_mat.shape[0] != q_mat.shape[1] or z.shape[1] != q_mat.shape[0]:
        raise DimensionError("Q must be square and Z must have matching columns")
    if z.shape[0] != b.size:
        raise DimensionError("b length must match the row count of Z")

    n = q_mat.shape[0]
    mean_diag = np.trace(q_mat).real / n
    b_norm = np.linalg.norm(b)
    last: Exception | None = None
    for ridge in RIDGE_LADDER:
        q_r = q_mat if ridge == 0 else q_mat + ridge * mean_diag * np.eye(n)
        try:
            x = np.linalg.solve(q_r, z.conj().T)
            s = z @ x
            mu = np.linalg.solve(s, b)
        except np.linalg.LinAlgError as exc:
            last = exc
            continue
        f = x @ mu
        if np.all(np.isfinite(f)) and np.linalg.norm(z @ f - b) <= _ZF_RESIDUAL_TOL * max(
            b_norm, 1e-300
        ):
            return f
        last = SingularMatrixError(f"constraint residual too large at ridge={ridge}")
    raise RankDeficiencyError(
        f"Z Q^-1 Z^H is singular beyond ridge repair: {last}"
    )


class _WhitenedProblem:
    """Per-node eigenfactorization of (Psi_m, Gamma_m) for fast dual solves.

    With Gamma = C C^H and C^-1 Psi C^-H = U diag(w) U^H, every regularized
    inverse (Psi + lam*Gamma)^-1 is T diag(1/(w+lam)) T^H for T = C^-H U, so a
    solve at a new dual value costs only diagonal scalings.  Rows of the
    projected constraint that fall in the common nullspace of Psi and Z are cut
    exactly, which reproduces the vanishing-ridge limit at lam = 0.
    """

    def __init__(self, psi: np.ndarray, gamma: np.ndarray, z: np.ndarray, b: np.ndarray):
        self.b = np.asarray(b, dtype=complex).reshape(-1)
        try:
            c = np.linalg.cholesky(gamma)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"power form is not positive definite: {exc}")
        y = np.linalg.solve(c, psi)
        mw = np.linalg.solve(c, y.conj().swapaxes(1, 2)).conj().swapaxes(1, 2)
        mw = 0.5 * (mw + mw.conj().swapaxes(1, 2))
        w, u = np.linalg.eigh(mw)
        w = np.clip(w, 0.0, None)
        t = np.linalg.solve(c.conj().swapaxes(1, 2), u)
        yz = np.einsum("maj,mpa->mjp", t.conj(), z.conj())  # T^H Z^H
        # Exact nullspace cut: directions invisible to both Psi and Z.
        cut = w <= w.max(axis=1, keepdims=True) * _NULLSPACE_CUT
        w = np.where(cut, 0.0, w)
        yz[cut, :] = 0.0
        self.w, self.t, self.yz = w, t, yz
        self.z = z

    def solve(self, lam: np.ndarray):
        """Constrained minimizer of f^H (Psi + diag-blocks(lam)*Gamma) f.

        Returns the per-node precoder stack along with each node's power
        f_m^H Gamma_m f_m and MSE energy f_m^H Psi_m f_m.
        """
        denom = self.w + np.asarray(lam, dtype=float)[:, None]
        inv = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom > 0)
        s = np.einsum("mdp,md,mdr->pr", self.yz.conj(), inv, self.yz, optimize=True)
        try:
            mu = np.linalg.solve(s, self.b)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError(
                f"projected constraint system is singular: {exc}"
            ) from exc
        ym = np.einsum("mdp,p->md", self.yz, mu)
        v = inv * ym
        f_nodes = np.einsum("mde,me->md", self.t, v)
        resid = np.linalg.norm(
            np.einsum("mpd,md->p", self.z, f_nodes) - self.b
        )
        if not np.all(np.isfinite(f_nodes)) or resid > _ZF_RESIDUAL_TOL * max(
            np.linalg.norm(self.b), 1e-300
        ):
            raise RankDeficiencyError(
                f"constraint residual {resid:.3e} after whitened solve"
            )
        powers = np.sum(np.abs(v) ** 2, axis=1)
        energies = np.einsum("md,md->m", self.w, np.abs(v) ** 2)
        return f_nodes, powers, energies


def _precoder_from_nodes(f_nodes: np.ndarray, n_t: int, q: int) -> DigitalPrecoder:
    m = f_nodes.shape[0]
    per_node = f_nodes.reshape(m, q, n_t).swapaxes(1, 2)  # unvec each segment
    return DigitalPrecoder(f=f_nodes.reshape(-1), per_node=per_node)


def design_zf(prob: DesignProblem) -> DigitalPrecoder:
    """Minimum-MSE precoder under the estimation constraint alone."""
    wp = _WhitenedProblem(prob.psi, prob.gamma, prob.z, prob.b)
    f_nodes, _, _ = wp.solve(np.zeros(prob.m_nodes))
    return _precoder_from_nodes(f_nodes, prob.n_t, prob.q)


def _min_feasible_power(wp: _WhitenedProblem, m: int) -> float:
    """Power of the minimum-power constraint-satisfying precoder.

    This is the lam -> infinity limit of the dual path, so any total budget
    below it is infeasible.
    """
    # Minimizing f^H Gamma f is the same whitened problem with w replaced by 1.
    saved_w = wp.w
    wp.w = np.ones_like(saved_w)
    try:
        _, powers, _ = wp.solve(np.zeros(m))
    finally:
        wp.w = saved_w
    return float(powers.sum())


def design_total_power(
    prob: DesignProblem, rho_t: float
) -> tuple[DigitalPrecoder, float]:
    """Minimum-MSE precoder with the network-wide power capped at rho_t.

    The cap's dual variable is located by monotone bisection on the power
    surplus g(lam) = f(lam)^H Gamma f(lam) - rho_t; complementary slackness
    holds at the returned point.
    """
    if rho_t <= 0:
        raise InfeasibleError("total power budget must be positive")
    m = prob.m_nodes
    wp = _WhitenedProblem(prob.psi, prob.gamma, prob.z, prob.b)

    f_nodes, powers, _ = wp.solve(np.zeros(m))
    if powers.sum() <= rho_t:
        return _precoder_from_nodes(f_nodes, prob.n_t, prob.q), 0.0

    p_min = _min_feasible_power(wp, m)
    if p_min > rho_t * (1.0 + 1e-9):
        raise InfeasibleError(
            f"budget {rho_t} is below the minimum constraint-satisfying power {p_min:.6g}"
        )

    def surplus(lam: float):
        f_n, pw, _ = wp.solve(np.full(m, lam))
        return pw.sum() - rho_t, f_n

    hi = 1.0
    g_hi, f_hi = surplus(hi)
    while g_hi > 0:
        hi *= 2.0
        if hi > 1e30:
            raise InfeasibleError("no finite dual closes the power gap")
        g_hi, f_hi = surplus(hi)
    lo = 0.0
    lam, f_nodes, g = hi, f_hi, g_hi
    for _ in range(2000):
        if abs(g) * max(1.0, lam) <= _BISECT_POWER_TOL * rho_t:
            break
        if hi - lo <= 1e-16 * max(hi, 1.0):
            break
        mid = 0.5 * (lo + hi)
        g_mid, f_mid = surplus(mid)
        if g_mid > 0:
            lo = mid
        else:
            hi, lam, f_nodes, g = mid, mid, f_mid, g_mid
    return _precoder_from_nodes(f_nodes, prob.n_t, prob.q), float(lam)


def _per_node_converged(lam, gap, rhos, obj) -> bool:
    slack = np.abs(lam * gap)
    return bool(
        np.all(gap <= 1e-5 * rhos)
        and np.all(slack <= 1e-4 * rhos)
        and slack.sum() <= 1e-4 * max(obj, 1e-300)
    )


def _bisect_coordinate(wp: _WhitenedProblem, lam: np.ndarray, rhos, i: int) -> float:
    """Exact per-coordinate dual maximizer: the root of node i's power surplus
    with every other multiplier held fixed (0 if already feasible there)."""

    def surplus(x: float) -> float:
        trial = lam.copy()
        trial[i] = x
        _, powers, _ = wp.solve(trial)
        return powers[i] - rhos[i]

    tol = 1e-7 * rhos[i]
    if surplus(0.0) <= tol:
        return 0.0
    hi = max(1.0, 2.0 * lam[i])
    g_hi = surplus(hi)
    for _ in range(200):
        if g_hi <= 0:
            break
        hi *= 2.0
        g_hi = surplus(hi)
    lo, best = 0.0, hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = surplus(mid)
        if abs(g_mid) * max(1.0, mid) <= tol:
            return mid
        if g_mid > 0:
            lo = mid
        else:
            hi, best = mid, mid
        if hi - lo <= 1e-15 * max(hi, 1.0):
            break
    return best


def _polish_active_set(
    wp: _WhitenedProblem, lam: np.ndarray, rhos: np.ndarray, sweeps: int = 25
) -> np.ndarray:
    """Cyclic coordinate ascent on the dual, run until the multipliers settle.

    Each coordinate update is exact, so every sweep is a monotone dual
    improvement; this closes the complementary-slackness products far tighter
    than diminishing-step ascent can within its iteration cap.
    """
    lam = lam.copy()
    for _ in range(sweeps):
        _, powers, energies = wp.solve(lam)
        gap = powers - rhos
        if _per_node_converged(lam, gap, rhos, energies.sum()):
            break
        active = np.nonzero((lam > 0) | (gap > 1e-5 * rhos))[0]
        if active.size == 0:
            break
        for i in active:
            lam[i] = _bisect_coordinate(wp, lam, rhos, i)
    return lam


def design_per_node_power(
    prob: DesignProblem,
    rhos,
    step_scale: float = 1.0,
    max_iters: int = 5000,
) -> tuple[DigitalPrecoder, np.ndarray]:
    """Minimum-MSE precoder with every node's own power capped.

    Projected dual subgradient ascent with diminishing step step_scale/sqrt(t)
    drives the multipliers; because that step rule cannot reach the required
    slackness tolerances once the surplus scale dwarfs the optimal multipliers,
    the active set is periodically polished by exact coordinate-wise bisection
    on the same dual.  Converged when every violation is within 1e-5 relative
    and the complementary-slackness products are within 1e-4, which bound the
    duality-gap estimate.
    """
    rhos = np.asarray(rhos, dtype=float)
    m = prob.m_nodes
    if rhos.shape != (m,):
        raise DimensionError(f"need one budget per node, got shape {rhos.shape}")
    if np.any(rhos <= 0):
        raise InfeasibleError("per-node power budgets must be positive")

    wp = _WhitenedProblem(prob.psi, prob.gamma, prob.z, prob.b)
    p_min = _min_feasible_power(wp, m)
    if p_min > rhos.sum() * (1.0 + 1e-9):
        raise InfeasibleError(
            f"combined budget {rhos.sum():.6g} is below the minimum "
            f"constraint-satisfying power {p_min:.6g}"
        )

    lam = np.zeros(m)
    for t in range(1, max_iters + 1):
        f_nodes, powers, energies = wp.solve(lam)
        gap = powers - rhos
        if _per_node_converged(lam, gap, rhos, energies.sum()):
            return _precoder_from_nodes(f_nodes, prob.n_t, prob.q), lam
        if t % 50 == 0:
            lam = _polish_active_set(wp, lam, rhos)
            f_nodes, powers, energies = wp.solve(lam)
            gap = powers - rhos
            if _per_node_converged(lam, gap, rhos, energies.sum()):
                return _precoder_from_nodes(f_nodes, prob.n_t, prob.q), lam
        lam = np.maximum(0.0, lam + (step_scale / np.sqrt(t)) * gap)
    raise MaxIterationsError(
        f"per-node dual ascent did not converge in {max_iters} iterations; "
        "budgets may be nearly infeasible"
    )


def evaluate_mse_analytic(precoder: DigitalPrecoder, prob: DesignProblem) -> float:
    """Closed-form estimation MSE f^H Psi f plus the combiner noise floor."""
    d = prob.q * prob.n_t
    f_nodes = precoder.f.reshape(prob.m_nodes, d)
    energy = np.einsum("md,mde,me->", f_nodes.conj(), prob.psi, f_nodes, optimize=True)
    return float(energy.real) + prob.noise_floor


def node_power(f_m: np.ndarray, gamma_m: np.ndarray) -> float:
    """Average transmit power of one node: vec(F)^H Gamma vec(F)."""
    v = vec(f_m)
    if gamma_m.shape != (v.size, v.size):
        raise DimensionError("power form does not match the precoder size")
    return float((v.conj() @ gamma_m @ v).real)
