import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopmanip import adaptive as ad
from coopmanip import dynamics as dyn
from coopmanip.dynamics import ObjectParams, ObjectState, Wrench
from coopmanip.trajectory import DesiredSample, LineTrajectory, SplineTrajectory

import runs

vec3 = st.tuples(*[st.floats(-3, 3)] * 3).map(np.array)
angles = st.floats(-math.pi, math.pi)


def _sample(q, qd=(0, 0, 0), qdd=(0, 0, 0)):
    return DesiredSample(np.asarray(q, float), np.asarray(qd, float), np.asarray(qdd, float))


@st.composite
def params(draw):
    return ObjectParams(m_b=draw(st.floats(0.5, 30)), I_Gzz=draw(st.floats(0.02, 4)),
                        r_p=np.array([draw(st.floats(-0.4, 0.4)), draw(st.floats(-0.4, 0.4))]))


# -- gains ---------------------------------------------------------------------

def test_gains_accept_diagonals_and_reject_indefinite():
    g = ad.AdaptiveGains(K_D=[1, 2, 3])
    np.testing.assert_array_equal(g.K_D, np.diag([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        ad.AdaptiveGains(K_D=[1, 0, 3])
    with pytest.raises(ValueError):
        ad.AdaptiveGains(Gamma_theta=np.diag([1, 1, 1]))
    with pytest.raises(ValueError):
        ad.AdaptiveGains(Gamma_psi=np.array([[1, 2, 0], [0, 1, 0], [0, 0, 1]]))
    with pytest.raises(ValueError):
        ad.AdaptiveGains(lam=-1)


# -- composite error and reference motion ----------------------------------------

def test_composite_error_zero_on_trajectory():
    s = ad.composite_error(ObjectState([1, 2], 0.3, [0.5, 0], 0.1), _sample([1, 2, 0.3], [0.5, 0, 0.1]), 2.0)
    np.testing.assert_array_equal(s, 0.0)


def test_composite_error_position_term():
    s = ad.composite_error(ObjectState([0.1, 0], 0, [0, 0], 0), _sample([0, 0, 0]), 2.0)
    np.testing.assert_allclose(s, [0.2, 0, 0])


def test_composite_error_wraps_yaw():
    s = ad.composite_error(ObjectState([0, 0], 3.1, [0, 0], 0), _sample([0, 0, -3.1]), 1.0)
    assert s[2] == pytest.approx(6.2 - 2 * math.pi)
    assert s[2] == pytest.approx(-0.083, abs=5e-4)


def test_reference_motion_on_trajectory():
    des = _sample([1, 0, 0.2], [0.3, -0.1, 0.05], [0.1, 0.2, -0.3])
    qd_r, qdd_r = ad.reference_motion(ObjectState([1, 0], 0.2, [0.3, -0.1], 0.05), des, 1.5)
    np.testing.assert_allclose(qd_r, des.qd)
    np.testing.assert_allclose(qdd_r, des.qdd)


@given(vec3, vec3, angles)
def test_zero_lambda_reference_is_desired_rate(pos, vel, th):
    des = _sample([0.2, -0.1, 0.4], [0.3, 0.1, -0.2])
    qd_r, _ = ad.reference_motion(ObjectState(pos[:2], th, vel[:2], vel[2]), des, 0.0)
    np.testing.assert_allclose(qd_r, des.qd, atol=1e-15)


@given(vec3, vec3, angles, st.floats(0, 5))
def test_reference_rate_offset_is_s(pos, vel, th, lam):
    state = ObjectState(pos[:2], th, vel[:2], vel[2])
    des = _sample([0.2, -0.1, 0.4], [0.3, 0.1, -0.2], [1, 0, 0])
    qd_r, _ = ad.reference_motion(state, des, lam)
    np.testing.assert_allclose(state.qdot - qd_r, ad.composite_error(state, des, lam), atol=1e-14)


def test_reference_acceleration_matches_finite_difference(rng):
    """Drive the body exactly along a smooth path offset from a smooth reference."""
    h = 1e-5
    for _ in range(20):
        wp_d = np.c_[np.cumsum(rng.uniform(0.3, 1.0, 4)), rng.normal(size=4), rng.normal(size=4) * 0.5]
        wp_a = wp_d + rng.normal(size=(4, 3)) * 0.05
        ref, act = SplineTrajectory(wp_d, 5.0), SplineTrajectory(wp_a, 4.0)
        lam = rng.uniform(0.5, 3)
        t = rng.uniform(1.0, 3.0)

        def qd_r(t):
            a = act(t)
            state = ObjectState(a.q[:2], a.q[2], a.qd[:2], a.qd[2])
            return ad.reference_motion(state, ref(t), lam)

        fd = (qd_r(t + h)[0] - qd_r(t - h)[0]) / (2 * h)
        np.testing.assert_allclose(qd_r(t)[1], fd, atol=1e-4)


# -- regressors ------------------------------------------------------------------

def test_regressor_zero_without_reference_motion():
    assert np.all(ad.regressor_theta(0.7, 0.0, np.array([1.0, 2.0, 3.0]), np.zeros(3)) == 0)


def test_regressor_unit_mass_column():
    Y = ad.regressor_theta(0.0, 0.0, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(Y[:, 0], [1, 0, 0])
    np.testing.assert_allclose(Y[:, 3], 0)


@given(params(), angles, st.floats(-5, 5), vec3, vec3)
def test_regressor_identity(p, th, w, qd_r, qdd_r):
    direct = dyn.mass_matrix(p, th) @ qdd_r + dyn.coriolis_matrix(p, th, w) @ qd_r
    Y = ad.regressor_theta(th, w, qd_r, qdd_r)
    assert np.abs(Y @ p.theta_vector - direct).max() < 1e-10 * (1 + np.abs(direct).max())


def test_regressor_identity_bulk(rng):
    worst = 0.0
    for _ in range(1000):
        p = ObjectParams(m_b=rng.uniform(0.5, 30), I_Gzz=rng.uniform(0.02, 4), r_p=rng.uniform(-0.4, 0.4, 2))
        th, w = rng.uniform(-np.pi, np.pi), rng.uniform(-5, 5)
        qd_r, qdd_r = rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3)
        direct = dyn.mass_matrix(p, th) @ qdd_r + dyn.coriolis_matrix(p, th, w) @ qd_r
        worst = max(worst, np.abs(ad.regressor_theta(th, w, qd_r, qdd_r) @ p.theta_vector - direct).max())
    assert worst < 1e-10


@given(angles, st.floats(-5, 5), vec3, vec3)
def test_regressor_columns_are_unit_parameter_dynamics(th, w, qd_r, qdd_r):
    """Column j equals H qdd_r + C qd_r with Theta = e_j, built from the dynamics formulas."""
    c, s = math.cos(th), math.sin(th)
    Y = ad.regressor_theta(th, w, qd_r, qdd_r)
    for j in range(4):
        e = np.eye(4)[j]
        m, mrx, mry, Ip = e
        # H and C are linear in Theta; write them with m r_p in place of m * r_p
        mr = np.array([c * mrx - s * mry, s * mrx + c * mry])       # m R r_p
        H = np.array([[m, 0, mr[1]], [0, m, -mr[0]], [mr[1], -mr[0], Ip]])
        C = np.zeros((3, 3))
        C[:2, 2] = w * mr
        np.testing.assert_allclose(Y[:, j], H @ qdd_r + C @ qd_r, atol=1e-12)


@given(angles, st.floats(-5, 5), vec3, vec3, vec3.map(lambda v: np.r_[v, 1.0]),
       vec3.map(lambda v: np.r_[v, -0.5]), st.floats(-3, 3), st.floats(-3, 3))
def test_regressor_linear_in_parameters(th, w, qd_r, qdd_r, t1, t2, a, b):
    Y = ad.regressor_theta(th, w, qd_r, qdd_r)
    np.testing.assert_allclose(Y @ (a * t1 + b * t2), a * (Y @ t1) + b * (Y @ t2), atol=1e-10)


def test_regressor_psi_is_identity():
    Y = ad.regressor_psi(ObjectState([1, 2], 0.5, [1, 0], 2))
    np.testing.assert_array_equal(Y, np.eye(3))
    psi = np.array([1.0, -2.0, 0.3])
    np.testing.assert_array_equal(Y @ psi, psi)


def test_constant_psi_fit_recovers_kinetic_friction():
    """Least-squares constant wrench from a steady slide equals the friction load."""
    p = ObjectParams(m_b=4.0, I_Gzz=0.3, r_p=np.array([0.1, 0.05]), mu=0.3, rho_eff=0.1)
    direction = np.array([0.6, 0.8])
    F = p.mu * p.m_b * p.g * direction
    dt = 1e-3
    state = ObjectState([0, 0], 0.4, 0.5 * direction, 0.0)
    a = p.com_offset_world(state.theta)
    M = -(a[0] * F[1] - a[1] * F[0])          # no net moment about the COM
    tau = np.array([F[0], F[1], M])
    residuals = []
    for _ in range(200):
        nxt = dyn.step(state, p, Wrench.from_vector(tau), dt)
        qdd = (nxt.qdot - state.qdot) / dt
        model = dyn.mass_matrix(p, state.theta) @ qdd + dyn.coriolis_vector(p, state.theta, state.omega)
        residuals.append(tau - model)          # f_k = tau - H qdd - C qd
        state = nxt
    R = np.array(residuals)
    psi, *_ = np.linalg.lstsq(np.tile(np.eye(3), (len(R), 1)), R.ravel(), rcond=None)
    np.testing.assert_allclose(psi, tau, atol=1e-9)
    np.testing.assert_allclose(psi[:2], p.mu * p.m_b * p.g * direction, atol=1e-9)


# -- control law and adaptation ---------------------------------------------------

def test_control_wrench_zero():
    est = ad.EstimateState()
    tau, sat = ad.control_wrench(est, np.zeros((3, 4)), np.eye(3), np.zeros(3), np.eye(3))
    assert np.all(tau.as_vector() == 0) and not sat


def test_control_wrench_damping_only():
    tau, _ = ad.control_wrench(ad.EstimateState(), np.zeros((3, 4)), np.zeros((3, 3)),
                               np.array([0.1, 0, 0.2]), np.diag([10.0, 10.0, 5.0]))
    np.testing.assert_allclose(tau.as_vector(), [-1, 0, -1])


@given(params(), angles, st.floats(-5, 5), vec3, vec3, vec3)
def test_control_wrench_perfect_feedforward(p, th, w, qd_r, qdd_r, psi):
    est = ad.EstimateState(p.theta_vector, psi)
    Y = ad.regressor_theta(th, w, qd_r, qdd_r)
    tau, _ = ad.control_wrench(est, Y, ad.regressor_psi(), np.zeros(3), np.eye(3))
    expect = dyn.mass_matrix(p, th) @ qdd_r + dyn.coriolis_matrix(p, th, w) @ qd_r + psi
    np.testing.assert_allclose(tau.as_vector(), expect, atol=1e-10 * (1 + np.abs(expect).max()))


def test_control_wrench_saturation():
    est = ad.EstimateState(psi_hat=[30.0, 40.0, -9.0])
    tau, sat = ad.control_wrench(est, np.zeros((3, 4)), np.eye(3), np.zeros(3), np.eye(3), F_max=10, M_max=2)
    np.testing.assert_allclose(tau.f, [6, 8])
    assert tau.m == -2 and sat


@given(vec3, vec3, vec3)
def test_control_and_adaptation_are_pure(th4, psi, s):
    est = ad.EstimateState(np.r_[th4, 1.0], psi)
    Y = ad.regressor_theta(0.3, 0.5, th4, psi)
    g = ad.AdaptiveGains()
    a = ad.control_wrench(est, Y, np.eye(3), s, g.K_D)[0].as_vector()
    b = ad.control_wrench(est, Y, np.eye(3), s, g.K_D)[0].as_vector()
    assert np.array_equal(a, b)
    e1, e2 = ad.adapt_step(est, Y, np.eye(3), s, g, 0.01), ad.adapt_step(est, Y, np.eye(3), s, g, 0.01)
    assert np.array_equal(e1.theta_hat, e2.theta_hat) and np.array_equal(e1.psi_hat, e2.psi_hat)
    np.testing.assert_array_equal(est.psi_hat, psi)         # input untouched


def test_adapt_step_still_on_sliding_surface():
    est = ad.EstimateState([1, 2, 3, 4], [5, 6, 7])
    out = ad.adapt_step(est, np.ones((3, 4)), np.eye(3), np.zeros(3), ad.AdaptiveGains(), 0.01)
    np.testing.assert_array_equal(out.theta_hat, est.theta_hat)
    np.testing.assert_array_equal(out.psi_hat, est.psi_hat)


def test_adapt_step_psi_update():
    g = ad.AdaptiveGains(Gamma_psi=np.eye(3))
    out = ad.adapt_step(ad.EstimateState(), np.zeros((3, 4)), np.eye(3), np.array([1.0, 0, 0]), g, 0.01)
    np.testing.assert_allclose(out.psi_hat, [-0.01, 0, 0])


def test_adapt_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        ad.adapt_step(ad.EstimateState(), np.zeros((3, 4)), np.eye(3), np.zeros(3), ad.AdaptiveGains(), 0.0)


def test_estimates_stay_bounded_in_mass_drop_run():
    log = runs.run("a1_mass_drop")
    cfg = log.config
    m_final = cfg.object.mass + sum(e.mass for e in cfg.events if e.kind == "mass_drop")
    theta_scale = np.linalg.norm([m_final, 0.5 * m_final, 0.5 * m_final, m_final])
    psi_scale = cfg.object.mu * m_final * 9.81 * (1 + cfg.object.rho_eff)
    th = np.c_[[log[f"theta_hat_{k}"] for k in range(1, 5)]].T
    ps = np.c_[[log[f"psi_hat_{k}"] for k in range(1, 4)]].T
    assert np.isfinite(th).all() and np.isfinite(ps).all()
    assert np.linalg.norm(th, axis=1).max() < 10 * theta_scale
    assert np.linalg.norm(ps, axis=1).max() < 10 * psi_scale


# -- Lyapunov -----------------------------------------------------------------------

def test_lyapunov_zero_at_truth():
    g = ad.AdaptiveGains()
    th, ps = np.array([5, 0.2, 0.1, 0.6]), np.array([1.0, 2.0, 0.1])
    assert ad.lyapunov_value(np.zeros(3), ad.EstimateState(th, ps), th, ps, np.eye(3), g) == 0.0


@given(params(), angles, vec3, vec3, vec3)
def test_lyapunov_positive_off_truth(p, th, s, d_psi, d_th):
    g = ad.AdaptiveGains()
    truth_t, truth_p = p.theta_vector, np.array([1.0, -1.0, 0.2])
    est = ad.EstimateState(truth_t + np.r_[d_th, 0.0], truth_p + d_psi)
    V = ad.lyapunov_value(s, est, truth_t, truth_p, dyn.mass_matrix(p, th), g)
    nonzero = np.any(s != 0) or np.any(d_psi != 0) or np.any(d_th != 0)
    assert V > 0 if nonzero else V == 0


def test_lyapunov_nonincreasing_in_closed_loop():
    dt = 1e-3
    V, _ = runs.lyapunov_trace(dt)
    assert V[0] > V[-1] > 0
    assert np.diff(V).max() <= 1e-3 * dt


def test_lyapunov_excess_shrinks_with_step():
    """The rise of V above the continuous-time rate -s'K_D s vanishes as dt -> 0."""
    excess = []
    for dt in (1e-3, 5e-4):
        V, rate = runs.lyapunov_trace(dt)
        excess.append(max(0.0, (np.diff(V) + dt * rate[:-1]).max()))
    assert excess[0] > 0
    assert excess[1] <= 0.6 * excess[0]


# -- PD baseline ---------------------------------------------------------------------

def test_pd_zero_error():
    tau, _ = ad.pd_wrench(ObjectState([1, 1], 0.2, [0.1, 0], 0), _sample([1, 1, 0.2], [0.1, 0, 0]),
                          np.diag([50, 50, 20]), np.diag([10, 10, 5]))
    assert np.all(tau.as_vector() == 0)


def test_pd_position_error():
    tau, _ = ad.pd_wrench(ObjectState([0.1, 0], 0, [0, 0], 0), _sample([0, 0, 0]),
                          np.diag([50, 50, 20]), np.diag([10, 10, 5]))
    np.testing.assert_allclose(tau.f, [-5, 0])
    assert tau.m == 0


def test_pd_saturates_like_adaptive():
    tau, sat = ad.pd_wrench(ObjectState([1.0, 0], 0, [0, 0], 0), _sample([0, 0, 0]),
                            np.diag([50, 50, 20]), np.diag([10, 10, 5]), F_max=20)
    np.testing.assert_allclose(tau.f, [-20, 0])
    assert sat


def test_pd_steady_error_exceeds_adaptive():
    ad_log, pd_log = runs.run("a1_mass_drop"), runs.run("a1_mass_drop", controller="pd")
    assert pd_log.summary["steady_position_error"] > ad_log.summary["steady_position_error"]


def test_controller_tracks_line_without_knowing_params():
    """Closed loop on the exact model drives the tracking error down."""
    p = ObjectParams(m_b=3.0, I_Gzz=0.2, r_p=np.array([0.05, 0.05]), mu=0.0)
    traj = LineTrajectory([0, 0], [1, 0], 4.0, yaw_end=0.3)
    ctl = ad.AdaptiveController(ad.AdaptiveGains(lam=2.0, K_D=[30, 30, 5]))
    st_ = ObjectState.at_rest(0.1, -0.1)
    dt = 1e-3
    for k in range(6000):
        tau, _ = ctl.update(st_, traj(k * dt), dt)
        st_ = dyn.step(st_, p, tau, dt)
    q = traj(6.0).q
    assert np.linalg.norm(st_.x_p - q[:2]) < 1e-2
    assert abs(st_.theta - q[2]) < 1e-2
