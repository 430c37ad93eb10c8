from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamform import array as ar
from beamform import estimators as est
from beamform import worstcase as wc
from beamform.socp import ConeSolution, load_program, solve
from conftest import crandn, random_hpd
from oracles import amplification_bisection, wc_cmv_oracle

A10 = ar.steering_vector(10, 93.0)


def cmv(R, a, eps, delta=1.0):
    w, sol = wc.solve_weights(wc.build_wc_cmv(R, a, eps, delta))
    assert sol.status == "optimal"
    return w


def test_white_noise_without_robustness_is_matched_filter():
    w = cmv(np.eye(10), A10, 0.0)
    np.testing.assert_allclose(w, A10 / 10, atol=1e-6)


def test_white_noise_amplification_matches_bisection():
    w = cmv(np.eye(10), A10, 2.1)
    c = np.vdot(w, A10)
    ref = amplification_bisection(2.1, 10)
    assert ref == pytest.approx(2.977, abs=1e-3)
    assert abs(c - ref) < 1e-3
    np.testing.assert_allclose(w, c.real * A10 / 10, atol=1e-9)


@pytest.mark.parametrize("eps", [3.3, np.sqrt(10.0), 4.0])
def test_epsilon_at_or_beyond_array_norm_rejected(eps):
    with pytest.raises(wc.InfeasibleParametersError):
        wc.build_wc_cmv(np.eye(10), A10, eps, 1.0)
    with pytest.raises(wc.InfeasibleParametersError):
        wc.build_wc_ccm(np.eye(10), np.zeros(10), A10, eps, 1.0, 1.0)


def test_epsilon_just_below_norm_is_accepted():
    prog = wc.build_wc_cmv(np.eye(10), A10, np.sqrt(10.0) - 1e-6, 1.0)
    assert prog.cones[1].dim == 21


def test_cone_dimensions():
    M = 7
    a = ar.steering_vector(M, 80.0)
    p_cmv = wc.build_wc_cmv(np.eye(M), a, 1.0, 1.0)
    p_ccm = wc.build_wc_ccm(np.eye(M), np.ones(M), a, 1.0, 1.0, 1.0)
    assert [c.dim for c in p_cmv.cones] == [2 * M + 1, 2 * M + 1, 1]
    assert [c.dim for c in p_ccm.cones] == [2 * M + 2, 2 * M + 1, 1]
    assert p_ccm.m == 4 * M + 4 and p_ccm.n == 2 * M + 1
    assert [c.kind for c in p_ccm.cones] == ["soc", "soc", "zero"]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), eps=st.floats(0.0, 2.9))
def test_wc_cmv_matches_closed_form_oracle(seed, eps):
    rng = np.random.default_rng(seed)
    R = random_hpd(rng, 10)
    w = cmv(R, A10, eps)
    ref = wc_cmv_oracle(R, A10, eps, 1.0)
    assert np.linalg.norm(w - ref) <= 1e-6 * np.linalg.norm(ref)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_ccm_without_modulus_term_equals_cmv(seed):
    rng = np.random.default_rng(seed)
    R = random_hpd(rng, 10)
    d = crandn(rng, 10)
    w_ccm, sol = wc.solve_weights(wc.build_wc_ccm(R, d, A10, 2.1, 1.0, 0.0))
    assert sol.status == "optimal"
    assert np.linalg.norm(w_ccm - cmv(R, A10, 2.1)) < 1e-6 * np.linalg.norm(w_ccm)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), gamma=st.floats(0.0, 3.0), t=st.floats(-2.0, 2.0))
def test_rotated_cone_is_the_quadratic_epigraph(seed, gamma, t):
    rng = np.random.default_rng(seed)
    M = 4
    R, d, w = random_hpd(rng, M), crandn(rng, M), crandn(rng, M)
    a = ar.steering_vector(M, 70.0)
    prog = wc.build_wc_ccm(R, d, a, 0.5, 1.0, gamma)
    U = est.cholesky(R)
    q = np.linalg.norm(U @ w) ** 2 - 2 * gamma * np.vdot(d, w).real
    tau = q + t
    s = prog.slack(np.concatenate([[tau], est.to_real(w)]))[: 2 * M + 2]
    margin = s[0] - np.linalg.norm(s[1:])
    # margin has the sign of tau - q
    scale = 1.0 + abs(q) + abs(tau)
    if t > 1e-9 * scale:
        assert margin > 0
    elif t < -1e-9 * scale:
        assert margin < 0
    # s0^2 - ||s1:||^2 = tau - q exactly
    assert s[0] ** 2 - s[1:] @ s[1:] == pytest.approx(t, abs=1e-10 * scale ** 2)


def test_ccm_solution_satisfies_constraints(rng):
    R = random_hpd(rng, 10)
    w, sol = wc.solve_weights(wc.build_wc_ccm(R, crandn(rng, 10), A10, 2.1, 1.0, 1.0))
    slack, imag = wc.constraint_slack(w, A10, 2.1, 1.0)
    assert slack >= -1e-9 and abs(imag) < 1e-9


def test_params_validation():
    with pytest.raises(ValueError):
        wc.WcParams(epsilon=-1)
    with pytest.raises(ValueError):
        wc.WcParams(mu=1.0)
    with pytest.raises(ValueError):
        wc.WcParams(sigma_n2=0.0)
    with pytest.raises(ValueError):
        wc.WcParams(delta=0.0)


def test_init_state():
    st0 = wc.WcState.init(A10, wc.WcParams(sigma_n2=0.5))
    np.testing.assert_allclose(st0.w, A10 / 10)
    np.testing.assert_array_equal(st0.est.R_hat, 0.5 * np.eye(10))
    np.testing.assert_array_equal(st0.est.d_hat, np.zeros(10))


def test_zero_snapshot_only_decays_statistics():
    params = wc.WcParams()
    s0 = wc.WcState.init(A10, params)
    s1, info = wc.wc_adapt_step(s0, np.zeros(10), A10, params)
    np.testing.assert_allclose(s1.est.R_hat, params.mu * s0.est.R_hat)
    np.testing.assert_allclose(s1.est.d_hat, 0)
    assert info.y == 0 and info.status == "optimal"
    # decayed white statistics: the robust solution is still along a
    c = np.vdot(s1.w, A10).real
    np.testing.assert_allclose(s1.w, c * A10 / 10, atol=1e-9)


def test_constraints_hold_every_step_stationary():
    rng = np.random.default_rng(8)
    sc = ar.stationary(snr_db=0.0, n=300)
    X = ar.generate_snapshots(sc, ar.segment_steering(sc, A10), rng)
    seen = []

    def check(i, state, info):
        assert info.status == "optimal"
        seen.append(wc.constraint_slack(state.w, A10, 2.1, 1.0))

    wc.run_wc_ccm(X, A10, wc.WcParams(), eval_at=[], on_step=check)
    slack = np.array(seen)
    assert len(slack) == 300
    assert slack[:, 0].min() >= -1e-6
    assert np.abs(slack[:, 1]).max() < 1e-6


def test_two_sensor_step_matches_offline_solve(tmp_path):
    rng = np.random.default_rng(21)
    a = ar.steering_vector(2, 80.0)
    params = wc.WcParams(epsilon=0.5)
    progs = []

    def recording_solver(prog):
        progs.append(prog)
        return solve(prog)

    state = wc.WcState.init(a, params)
    for k in range(5):
        state, _ = wc.wc_adapt_step(state, crandn(rng, 2), a, params, solver=recording_solver)
    path = tmp_path / "last.socp"
    from beamform.socp import dump_program
    dump_program(progs[-1], path)
    offline = wc.weights_from_solution(solve(load_program(path)).u)
    np.testing.assert_allclose(state.w, offline, atol=1e-12)


def _failing_solver(prog):
    return ConeSolution(None, "max-iterations", np.nan, np.nan, np.nan, 100, None)


def test_failed_solve_holds_weights_and_dumps(tmp_path):
    params = wc.WcParams()
    s0 = wc.WcState.init(A10, params)
    s1, info = wc.wc_adapt_step(s0, crandn(np.random.default_rng(0), 10), A10, params,
                                solver=_failing_solver, on_failure=wc.dump_to_dir(tmp_path))
    assert info.status == "max-iterations"
    np.testing.assert_array_equal(s1.w, s0.w)
    assert s1.failures == 1 and s1.steps == 1
    dumped = sorted(p.name for p in tmp_path.iterdir())
    assert dumped == ["fail_00001.socp"]
    assert load_program(tmp_path / dumped[0]).m == 44


def test_too_many_failures_abort_the_run():
    X = crandn(np.random.default_rng(0), 50, 10)
    calls = {"n": 0}

    def flaky(prog):
        calls["n"] += 1
        return _failing_solver(prog) if calls["n"] % 10 == 0 else solve(prog)

    # 1% of 50 snapshots is 0.5, so a single failure aborts
    with pytest.raises(wc.SolverAbort):
        wc.run_wc_ccm(X, A10, wc.WcParams(), solver=flaky)
    out = wc.run_wc_ccm(X, A10, wc.WcParams(max_fail_frac=0.2), eval_at=[50], solver=flaky)
    assert set(out) == {50}


def test_wc_cmv_run_uses_normalized_window():
    rng = np.random.default_rng(3)
    X = crandn(rng, 40, 10)
    params = wc.WcParams(sigma_n2=0.7)
    out = wc.run_wc_cmv(X, A10, params, eval_at=[10, 40])
    e = est.WindowedEstimates.init(10, 0.7, params.mu)
    for x in X[:40]:
        e = est.update_rxx(e, x)
    ref = wc_cmv_oracle(e.R_hat, A10, 2.1, 1.0)  # argmin is scale free
    np.testing.assert_allclose(out[40], ref, atol=1e-8)
    assert wc.window_weight(0.5, 0) == 1.0
    assert wc.window_weight(0.5, 2) == pytest.approx(0.25 + 1.5)


def test_convexity_check_examples():
    assert wc.convexity_check(1.0, 1.0, 1.0) == (True, 0.0)
    assert wc.convexity_check(2.0, 1.0, 1.0) == (False, -1.0)
    assert wc.convexity_check(0.0, 0.3, 0.2).satisfied
    with pytest.raises(ValueError):
        wc.convexity_check(-1.0, 1.0, 1.0)


def test_epsilon_diagnostic_examples():
    rep = wc.epsilon_ratio_diagnostic(A10 / 10, A10, 2.1)
    assert rep.ratio == pytest.approx(0.0, abs=1e-20)
    assert rep.within_bound and not rep.degenerate
    assert rep.c == pytest.approx(1.0)
    assert rep.amplification_floor == pytest.approx(1 / (1 - 2.1 / np.sqrt(10)))
    near = wc.epsilon_ratio_diagnostic(A10 / 10, A10, np.sqrt(10) - 1e-9)
    assert abs(near.bound) < 1e-8
    orth = np.array([1, -1] + [0] * 8, dtype=complex) * np.conj(A10[:1])
    w_orth = orth - np.vdot(A10, orth) * A10 / 10
    assert wc.epsilon_ratio_diagnostic(w_orth, A10, 2.1).degenerate


def test_robust_solutions_respect_ratio_bound(rng):
    for eps in (0.5, 2.1, 3.0):
        w = cmv(random_hpd(rng, 10), A10, eps)
        rep = wc.epsilon_ratio_diagnostic(w, A10, eps)
        assert rep.within_bound
        assert rep.c.real >= rep.amplification_floor * (1 - 1e-9) - 1e-9 or eps == 0.5


def test_larger_epsilon_shrinks_ratio_at_high_snr():
    rng = np.random.default_rng(12)
    sc = ar.table4(snr_db=20.0, n=200)
    X = ar.generate_snapshots(sc, ar.segment_steering(sc, A10), rng)
    ratios = {}
    for eps in (2.1, 3.0):
        params = wc.WcParams(epsilon=eps, sigma_n2=sc.sigma_n2)
        w = wc.run_wc_cmv(X, A10, params, eval_at=[200])[200]
        ratios[eps] = wc.epsilon_ratio_diagnostic(w, A10, eps).ratio
    assert ratios[3.0] < ratios[2.1]


def test_with_epsilon_copies():
    p = wc.WcParams()
    assert wc.with_epsilon(p, 1.0) == replace(p, epsilon=1.0)
