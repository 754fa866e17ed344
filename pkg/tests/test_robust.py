import numpy as np
import pytest

from hybeam.channel import StochasticUncertainty, sample_norm_ball_error, NormBallUncertainty
from hybeam.config import ScenarioConfig
from hybeam.design import design_zf, solve_eq_qp
from hybeam.errors import DimensionError
from hybeam.linalg import kron, vec
from hybeam.network import FcModel, NodeModel, PriorModel
from hybeam.randmat import complex_normal, psd_sqrt
from hybeam.robust import (
    assemble_norm_ball,
    assemble_stochastic,
    compute_norm_ball_constants,
    design_robust_norm_ball,
    design_robust_stochastic,
    evaluate_average_mse,
    lemma2_expectation,
    mse_with_channel_error,
    norm_ball_gradient,
    norm_ball_objective,
    worst_case_mse_bound,
    RobustProblemNormBall,
)

from conftest import crandn, make_problem, random_hpd, SMALL_CFG


def _imperfect_setup(rng, cfg=SMALL_CFG, sigma_h_sq=0.3):
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng, cfg)
    u = StochasticUncertainty(sigma_h_sq=sigma_h_sq, alpha_fc=cfg.alpha_fc, beta=cfg.beta)
    rp = assemble_stochastic(chan.h, nodes, prior, fc, w_rf, u)
    return chan, nodes, prior, fc, w_rf, prob, u, rp


# ---------------------------------------------------------------- lemma 2


def test_expectation_deterministic_when_uncorrelated(rng):
    x_hat = crandn(rng, 3, 2)
    z = crandn(rng, 2, 2)
    zero_r, zero_t = np.zeros((3, 3)), np.zeros((2, 2))
    got = lemma2_expectation(x_hat, z, zero_r, zero_t, "left")
    assert np.allclose(got, x_hat @ z @ x_hat.conj().T)


def test_expectation_pure_noise_cases(rng):
    r_r = random_hpd(rng, 3)
    r_t = random_hpd(rng, 2)
    left = lemma2_expectation(np.zeros((3, 2)), np.eye(2), r_r, r_t, "left")
    assert np.allclose(left, np.trace(r_t) * r_r)
    right = lemma2_expectation(np.zeros((3, 2)), np.eye(3), r_r, r_t, "right")
    assert np.allclose(right, np.trace(r_r) * r_t.T)


@pytest.mark.parametrize("side", ["left", "right"])
def test_expectation_matches_monte_carlo(rng, side):
    r, t = 4, 4
    x_hat = crandn(rng, r, t)
    r_r = random_hpd(rng, r)
    r_t = random_hpd(rng, t)
    z = random_hpd(rng, t if side == "left" else r)
    closed = lemma2_expectation(x_hat, z, r_r, r_t, side)

    half_r = psd_sqrt(r_r)
    half_t_t = psd_sqrt(r_t).T
    n_draws = 100_000
    acc = np.zeros_like(closed)
    for _ in range(n_draws):
        x = x_hat + half_r @ complex_normal(rng, (r, t)) @ half_t_t
        acc += x @ z @ x.conj().T if side == "left" else x.conj().T @ z @ x
    emp = acc / n_draws
    dominant = np.abs(closed) >= 0.5 * np.abs(closed).max()
    rel = np.abs(emp[dominant] - closed[dominant]) / np.abs(closed[dominant])
    assert rel.max() < 0.02


def test_expectation_rejects_bad_shapes(rng):
    with pytest.raises(DimensionError):
        lemma2_expectation(crandn(rng, 3, 2), np.eye(3), np.eye(3), np.eye(2), "left")
    with pytest.raises(ValueError):
        lemma2_expectation(crandn(rng, 3, 2), np.eye(2), np.eye(3), np.eye(2), "up")


# ---------------------------------------------------------------- stochastic


def test_stochastic_assembly_scalar_reduction():
    a, r, r_theta, h_hat, sigma_h = 1.3 + 0.2j, 0.4, 0.8, 0.9 - 0.5j, 0.25
    node = NodeModel(np.array([[a]]), np.array([[r]], dtype=complex), rho=1.0)
    prior = PriorModel(np.array([[r_theta]], dtype=complex))
    fc = FcModel(np.array([[0.05]], dtype=complex), n_rf_fc=1)
    u = StochasticUncertainty(sigma_h_sq=sigma_h)
    rp = assemble_stochastic(
        np.array([[[h_hat]]], dtype=complex), [node], prior, fc,
        np.array([[1.0]], dtype=complex), u,
    )
    want = r * abs(h_hat) ** 2 + sigma_h * (abs(a) ** 2 * r_theta + r)
    assert np.isclose(rp.omega[0, 0, 0], want)
    assert np.isclose(rp.alpha_scalar, sigma_h)


def test_zero_uncertainty_reduces_to_perfect_design(rng):
    chan, nodes, prior, fc, w_rf, prob, u, rp = _imperfect_setup(rng, sigma_h_sq=0.0)
    assert np.allclose(rp.omega, prob.psi, atol=1e-12)
    robust = design_robust_stochastic(rp)
    perfect = design_zf(prob)
    assert np.linalg.norm(robust.f - perfect.f) <= 1e-10 * np.linalg.norm(perfect.f)


def test_average_mse_matches_sampled_mean(rng):
    chan, nodes, prior, fc, w_rf, prob, u, rp = _imperfect_setup(rng, sigma_h_sq=0.3)
    pre = design_robust_stochastic(rp)
    closed = evaluate_average_mse(pre, rp)

    half_r = psd_sqrt(u.receive_correlation(SMALL_CFG.n_r))
    half_t_t = psd_sqrt(u.transmit_correlation(SMALL_CFG.n_t)).T
    n_draws = 10_000
    total = 0.0
    for _ in range(n_draws):
        delta = np.stack(
            [
                half_r @ complex_normal(rng, (SMALL_CFG.n_r, SMALL_CFG.n_t)) @ half_t_t
                for _ in range(SMALL_CFG.m_nodes)
            ]
        )
        total += mse_with_channel_error(
            pre, chan.h, delta, nodes, prior, w_rf, rp.noise_floor
        )
    assert abs(total / n_draws - closed) < 0.02 * closed


def test_robust_beats_agnostic_under_average_mse(rng):
    for _ in range(5):
        chan, nodes, prior, fc, w_rf, prob, u, rp = _imperfect_setup(rng, sigma_h_sq=0.4)
        robust = design_robust_stochastic(rp)
        agnostic = design_zf(prob)
        assert evaluate_average_mse(robust, rp) <= evaluate_average_mse(agnostic, rp) + 1e-10


def test_robust_design_optimal_over_feasible_perturbations(rng):
    chan, nodes, prior, fc, w_rf, prob, u, rp = _imperfect_setup(rng, sigma_h_sq=0.3)
    pre = design_robust_stochastic(rp)
    obj = evaluate_average_mse(pre, rp)
    w_dense = np.hstack(list(rp.w))
    _, s, vh = np.linalg.svd(w_dense)
    null = vh[s.size :].conj().T
    omega = np.zeros((w_dense.shape[1], w_dense.shape[1]), dtype=complex)
    d = rp.q * rp.n_t
    for m in range(rp.m_nodes):
        omega[m * d : (m + 1) * d, m * d : (m + 1) * d] = rp.omega[m]
    for _ in range(1000):
        cand = pre.f + null @ crandn(rng, null.shape[1]) * rng.choice([1e-2, 1.0])
        cand_obj = (cand.conj() @ omega @ cand).real + rp.noise_floor
        assert cand_obj >= obj - 1e-9 * max(1.0, obj)


def test_scalar_robust_design_closed_form():
    a, r, h_hat = 0.9, 0.5, 1.1 + 0.3j
    node = NodeModel(np.array([[a]]), np.array([[r]], dtype=complex), rho=1.0)
    prior = PriorModel.identity(1)
    fc = FcModel(np.array([[0.1]], dtype=complex), n_rf_fc=1)
    u = StochasticUncertainty(sigma_h_sq=0.3)
    rp = assemble_stochastic(
        np.array([[[h_hat]]], dtype=complex), [node], prior, fc,
        np.array([[1.0]], dtype=complex), u,
    )
    pre = design_robust_stochastic(rp)
    # Single scalar constraint w_hat * f = 1 pins the solution completely.
    assert np.allclose(pre.f, [1.0 / (a * h_hat)])


def test_omega_dominates_nominal_term(rng):
    chan, nodes, prior, fc, w_rf, prob, u, rp = _imperfect_setup(rng, sigma_h_sq=0.5)
    for m in range(rp.m_nodes):
        gap = rp.omega[m] - prob.psi[m]
        assert np.linalg.eigvalsh(gap).min() >= -1e-10


# ---------------------------------------------------------------- norm ball


def test_constants_zero_radius():
    node = NodeModel(np.eye(2, dtype=complex), np.eye(2, dtype=complex), rho=1.0)
    eta, zeta = compute_norm_ball_constants(
        [node], PriorModel.identity(2), np.eye(2, dtype=complex), 0.0
    )
    assert eta == 0.0 and zeta == 0.0


def test_constants_scalar_hand_formula(rng):
    a, r_theta, eps = 1.4 - 0.3j, 0.7, 0.2
    node = NodeModel(np.array([[a]]), np.array([[0.5]], dtype=complex), rho=1.0)
    eta, zeta = compute_norm_ball_constants(
        [node], PriorModel(np.array([[r_theta]], dtype=complex)),
        np.array([[1.0]], dtype=complex), eps,
    )
    assert np.isclose(eta, eps * abs(a) * np.sqrt(r_theta))
    assert np.isclose(zeta, eps * np.sqrt(0.5))


def test_constants_with_orthonormal_combiner(rng):
    q_mat, _ = np.linalg.qr(crandn(rng, 6, 2))
    nodes = [
        NodeModel(crandn(rng, 3, 2), random_hpd(rng, 3), rho=1.0) for _ in range(2)
    ]
    prior = PriorModel(random_hpd(rng, 2))
    eta, zeta = compute_norm_ball_constants(nodes, prior, q_mat, 0.3)
    signal = sum(np.trace(n.a_obs @ prior.r_theta @ n.a_obs.conj().T).real for n in nodes)
    assert np.isclose(eta, 0.3 * np.sqrt(signal))


def test_signal_distortion_respects_eta_bound(rng):
    cfg = SMALL_CFG
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng, cfg)
    eps = 0.4
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, eps)
    pre = design_robust_norm_ball(rp)
    f_norm_sq = np.linalg.norm(pre.f) ** 2
    u = NormBallUncertainty(epsilon_h=eps, sampling_mode="surface")
    for _ in range(1000):
        distortion = 0.0
        for m, node in enumerate(nodes):
            delta = sample_norm_ball_error(cfg.n_r, cfg.n_t, u, rng)
            cov = node.a_obs @ prior.r_theta @ node.a_obs.conj().T
            d_m = kron(cov.T, (w_rf.conj().T @ delta).conj().T @ (w_rf.conj().T @ delta))
            v = vec(pre.per_node[m])
            distortion += (v.conj() @ d_m @ v).real
        assert distortion <= rp.eta**2 * f_norm_sq + 1e-10


def test_zero_radius_matches_closed_form_solve(rng):
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng)
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, 0.0)
    pre = design_robust_norm_ball(rp)
    d = rp.q * rp.n_t
    lhl = np.zeros((rp.m_nodes * d, rp.m_nodes * d), dtype=complex)
    for m in range(rp.m_nodes):
        lhl[m * d : (m + 1) * d, m * d : (m + 1) * d] = (
            rp.l_hat[m].conj().T @ rp.l_hat[m]
        )
    w_dense = np.hstack(list(rp.w))
    f_ref = solve_eq_qp(lhl, w_dense, rp.c)
    ref_obj = norm_ball_objective(f_ref, rp)
    got_obj = norm_ball_objective(pre.f, rp)
    assert got_obj <= ref_obj * (1 + 1e-6)
    assert abs(got_obj - ref_obj) <= 1e-6 * max(ref_obj, 1e-12)


def test_descent_from_particular_solution(rng):
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng)
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, 0.3)
    pre = design_robust_norm_ball(rp)
    w_dense = np.hstack(list(rp.w))
    f0 = np.linalg.lstsq(w_dense, rp.c, rcond=None)[0]
    assert norm_ball_objective(pre.f, rp) <= norm_ball_objective(f0, rp) + 1e-12
    assert np.linalg.norm(w_dense @ pre.f - rp.c) <= 1e-8 * np.linalg.norm(rp.c)


def test_tiny_instance_matches_direct_search(rng):
    cfg = ScenarioConfig(
        m_nodes=2, n_t=2, n_r=4, p=1, q=1, n_cl=2, n_rf_node=1, n_rf_fc=1
    )
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng, cfg)
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, 0.5)
    pre = design_robust_norm_ball(rp)
    got = norm_ball_objective(pre.f, rp)

    # Shrinking random search over the 3-dim nullspace as an oracle.
    w_dense = np.hstack(list(rp.w))
    _, s, vh = np.linalg.svd(w_dense)
    null = vh[s.size :].conj().T
    f0 = np.linalg.lstsq(w_dense, rp.c, rcond=None)[0]
    z = np.zeros(null.shape[1], dtype=complex)
    best = norm_ball_objective(f0, rp)
    radius = np.linalg.norm(f0) + 1.0
    for _ in range(60):
        for _ in range(200):
            cand = z + radius * crandn(rng, null.shape[1])
            val = norm_ball_objective(f0 + null @ cand, rp)
            if val < best:
                best, z = val, cand
        radius *= 0.75
    assert got <= best * (1 + 1e-3)


def test_objective_is_convex_along_segments(rng):
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng)
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, 0.4)
    n = rp.m_nodes * rp.q * rp.n_t
    for _ in range(50):
        f1, f2 = crandn(rng, n), crandn(rng, n)
        mid = norm_ball_objective((f1 + f2) / 2, rp)
        avg = (norm_ball_objective(f1, rp) + norm_ball_objective(f2, rp)) / 2
        assert mid <= avg + 1e-10


def test_gradient_matches_finite_differences(rng):
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng)
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, 0.4)
    n = rp.m_nodes * rp.q * rp.n_t
    f = crandn(rng, n)
    grad = norm_ball_gradient(f, rp)
    h = 1e-6
    for idx in rng.choice(n, size=6, replace=False):
        for direction, part in ((1.0, np.real), (1j, np.imag)):
            e = np.zeros(n, dtype=complex)
            e[idx] = direction
            num = (
                norm_ball_objective(f + h * e, rp)
                - norm_ball_objective(f - h * e, rp)
            ) / (2 * h)
            ana = 2 * part(grad[idx])
            assert abs(num - ana) <= 1e-5 * max(1.0, abs(ana))


def test_worst_case_bound_trivial_cases(rng):
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng)
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, 0.0)
    n = rp.m_nodes * rp.q * rp.n_t
    zero = np.zeros(n, dtype=complex)
    assert np.isclose(norm_ball_objective(zero, rp) + rp.noise_floor, rp.noise_floor)
    f = crandn(rng, n)
    d = rp.q * rp.n_t
    quad = 0.0
    for m in range(rp.m_nodes):
        seg = f[m * d : (m + 1) * d]
        quad += np.linalg.norm(rp.l_hat[m] @ seg) ** 2
    assert np.isclose(norm_ball_objective(f, rp), quad)


def test_bound_dominates_realized_mse(rng):
    cfg = SMALL_CFG
    chan, nodes, prior, fc, w_rf, prob = make_problem(rng, cfg)
    eps = 0.35
    rp = assemble_norm_ball(chan.h, nodes, prior, fc, w_rf, eps)
    pre = design_robust_norm_ball(rp)
    bound = worst_case_mse_bound(pre, rp)
    u = NormBallUncertainty(epsilon_h=eps, sampling_mode="surface")
    for _ in range(1000):
        delta = np.stack(
            [
                sample_norm_ball_error(cfg.n_r, cfg.n_t, u, rng)
                for _ in range(cfg.m_nodes)
            ]
        )
        realized = mse_with_channel_error(
            pre, chan.h, delta, nodes, prior, w_rf, rp.noise_floor
        )
        assert realized <= bound + 1e-10
