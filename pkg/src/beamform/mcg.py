"""Low-complexity robust beamformers based on a modified conjugate gradient.

Each snapshot performs a single CG iteration on drifting statistics and one
step of a Lagrange multiplier that enforces the robust constraint
``Re{w^H a} - delta >= eps~ ||w||^2`` on average.

RCMV-MCG iterates on ``v`` with ``[R_xx + eps~ lam I] v = a`` as fixed
point and reports ``w = lam v / 2``. RCCM-MCG iterates on ``w`` itself with
fixed point ``[R_a + eps~ lam I] w = gamma d + lam a / 2``.

The per-snapshot work is a handful of ``O(M^2)`` matrix-vector operations;
nothing is inverted or factorized inside a step.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from numba import njit

from .estimators import WindowedEstimates


def epsilon_tilde_bound(M: int) -> float:
    """Largest admissible ``eps~`` for an ``M``-element array."""
    if M < 2:
        raise ValueError("need M >= 2")
    return M / 2.0


@dataclass(frozen=True)
class McgParams:
    epsilon_tilde: float = 2.1
    delta: float = 1.0
    gamma: float = 1.0
    mu: float = 0.995
    eta: float = 0.25
    mu_lambda: float = 800.0
    delta_lambda_max: float = 200.0
    lambda_0: float = 1.0

    def __post_init__(self):
        if not self.epsilon_tilde > 0:
            raise ValueError("epsilon_tilde must be positive")
        if not 0.0 <= self.eta <= 0.5:
            raise ValueError(f"eta must lie in [0, 0.5], got {self.eta}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("forgetting factor must be in (0, 1)")
        if not self.lambda_0 > 0:
            raise ValueError("lambda_0 must be positive")
        if self.delta <= 0 or self.gamma < 0 or self.mu_lambda < 0 or self.delta_lambda_max <= 0:
            raise ValueError("need delta > 0, gamma >= 0, mu_lambda >= 0, delta_lambda_max > 0")

    def check_size(self, M: int) -> None:
        bound = epsilon_tilde_bound(M)
        if self.epsilon_tilde > bound:
            raise ValueError(f"epsilon_tilde={self.epsilon_tilde} exceeds M/2 = {bound} for M={M}")


CMV_DEFAULTS = McgParams(mu_lambda=800.0)
CCM_DEFAULTS = McgParams(mu_lambda=100.0)


@dataclass(frozen=True)
class McgState:
    w: np.ndarray
    v: np.ndarray | None  # CG vector for the CMV variant; None for CCM
    p: np.ndarray
    g: np.ndarray
    lambda_hat: float
    lambda_prev: float
    est: WindowedEstimates
    i: int = 0


def init_cmv(a, params: McgParams) -> McgState:
    a = np.asarray(a, dtype=complex)
    M = a.size
    params.check_size(M)
    est = WindowedEstimates.init(M, params.delta, params.mu)
    lam = params.lambda_0
    return McgState(np.zeros(M, complex), np.zeros(M, complex), a.copy(), a.copy(), lam, lam, est)


def init_ccm(a, params: McgParams) -> McgState:
    a = np.asarray(a, dtype=complex)
    M = a.size
    params.check_size(M)
    est = WindowedEstimates.init(M, params.delta, params.mu, with_d=True)
    lam = params.lambda_0
    return McgState(a / M, None, a.copy(), a.copy(), lam, lam, est)


@njit(cache=True, inline="always", error_model="numpy")
def _lambda_step(lam, w, a, eps_t, delta, mu_lambda, dl_max):
    wn2 = 0.0
    wa = 0.0
    for k in range(w.shape[0]):
        wn2 += w[k].real ** 2 + w[k].imag ** 2
        wa += (np.conj(w[k]) * a[k]).real
    dl = mu_lambda * (eps_t * wn2 - wa + delta)
    if not np.isfinite(dl):
        return np.nan, np.nan
    while dl <= -lam or dl >= dl_max:
        dl *= 0.5
    return lam + dl, eps_t * wn2 - wa + delta


def lambda_update(lambda_hat: float, w, a, params: McgParams) -> float:
    """Multiplier step ``mu_lambda (eps~ ||w||^2 - Re{w^H a} + delta)``, halved until it
    keeps the multiplier positive and stays below ``delta_lambda_max``."""
    if not lambda_hat > 0:
        raise ValueError("lambda_hat must be positive")
    lam, viol = _lambda_step(float(lambda_hat), np.asarray(w, dtype=np.complex128),
                             np.asarray(a, dtype=np.complex128), params.epsilon_tilde,
                             params.delta, params.mu_lambda, params.delta_lambda_max)
    if math.isnan(viol):
        raise FloatingPointError("non-finite multiplier update")
    return lam


@njit(cache=True, inline="always", error_model="numpy")
def _cg_direction(R, lam, eps_t, p, pR):
    M = p.shape[0]
    for r in range(M):
        acc = 0j
        for c in range(M):
            acc += R[r, c] * p[c]
        pR[r] = acc + lam * eps_t * p[r]


@njit(cache=True, inline="always", error_model="numpy")
def _rank_one(R, mu, x, scale):
    M = x.shape[0]
    for r in range(M):
        xr = x[r] * scale
        for c in range(M):
            R[r, c] = mu * R[r, c] + xr * np.conj(x[c])


@njit(cache=True, inline="always", error_model="numpy")
def _cg_scalars(p, g_prev, pR, mu, eta):
    num = 0.0
    den = 0.0
    for k in range(p.shape[0]):
        num += (np.conj(p[k]) * g_prev[k]).real
        den += (np.conj(p[k]) * pR[k]).real
    return (mu - eta) * num / den


@njit(cache=True, inline="always", error_model="numpy")
def _pr_update(p, g_new, g_prev):
    """Polak-Ribiere ``beta`` (real part), then ``p <- g_new + beta p``; returns beta."""
    gg = 0.0
    num = 0.0
    for k in range(p.shape[0]):
        gg += g_prev[k].real ** 2 + g_prev[k].imag ** 2
        num += (np.conj(g_new[k] - g_prev[k]) * g_new[k]).real
    beta = num / gg if gg > 0.0 else 0.0
    for k in range(p.shape[0]):
        p[k] = g_new[k] + beta * p[k]
    return beta


@njit(cache=True, inline="always", error_model="numpy")
def _cmv_step(R, v, p, g, w, pR, gn, lam2, x, a, eps_t, delta, mu, eta, mu_lambda, dl_max, trace):
    """In-place RCMV-MCG update; ``lam2 = [lam(i), lam(i-1)]``."""
    M = x.shape[0]
    lam, lam_prev = lam2[0], lam2[1]
    _rank_one(R, mu, x, 1.0)
    _cg_direction(R, lam, eps_t, p, pR)
    nu = (lam - mu * lam_prev) * eps_t
    alpha = _cg_scalars(p, g, pR, mu, eta)
    xv = 0j
    for k in range(M):
        xv += np.conj(x[k]) * v[k]
    for k in range(M):
        gn[k] = (1.0 - mu) * a[k] + mu * g[k] - alpha * pR[k] - x[k] * xv - nu * v[k]
        v[k] += alpha * p[k]
    beta = _pr_update(p, gn, g)
    for k in range(M):
        g[k] = gn[k]
        w[k] = lam * v[k] / 2.0
    new_lam, viol = _lambda_step(lam, w, a, eps_t, delta, mu_lambda, dl_max)
    lam2[1] = lam
    lam2[0] = new_lam
    trace[0] = lam
    trace[1] = alpha
    trace[2] = beta
    trace[3] = -viol


@njit(cache=True, inline="always", error_model="numpy")
def _ccm_step(R, d, p, g, w, pR, gn, wp, lam2, x, y, a, eps_t, delta, gamma, mu, eta,
              mu_lambda, dl_max, trace):
    M = x.shape[0]
    lam, lam_prev = lam2[0], lam2[1]
    y2 = y.real ** 2 + y.imag ** 2
    _rank_one(R, mu, x, y2)
    for k in range(M):
        d[k] = mu * d[k] + x[k] * np.conj(y)
    _cg_direction(R, lam, eps_t, p, pR)
    nu = (lam - mu * lam_prev) * eps_t
    alpha = _cg_scalars(p, g, pR, mu, eta)
    xw = 0j
    for k in range(M):
        xw += np.conj(x[k]) * w[k]
        wp[k] = w[k]
    for k in range(M):
        w[k] += alpha * p[k]
    for k in range(M):
        gn[k] = (mu * g[k] - alpha * pR[k] - y2 * x[k] * xw + gamma * x[k] * np.conj(y)
                 + nu * (a[k] / (2.0 * eps_t) - wp[k]))
    beta = _pr_update(p, gn, g)
    for k in range(M):
        g[k] = gn[k]
    new_lam, viol = _lambda_step(lam, w, a, eps_t, delta, mu_lambda, dl_max)
    lam2[1] = lam
    lam2[0] = new_lam
    trace[0] = lam
    trace[1] = alpha
    trace[2] = beta
    trace[3] = -viol


def _arrays(state: McgState, ccm: bool):
    est = state.est
    R = np.array(est.R_hat, dtype=np.complex128, order="C")
    d = np.array(est.d_hat, dtype=np.complex128) if ccm else None
    v = None if ccm else np.array(state.v, dtype=np.complex128)
    return (R, d, v, np.array(state.p, dtype=np.complex128), np.array(state.g, dtype=np.complex128),
            np.array(state.w, dtype=np.complex128),
            np.array([state.lambda_hat, state.lambda_prev], dtype=np.float64))


def _check_lambda(lam2, i):
    if not np.isfinite(lam2[0]):
        raise FloatingPointError(f"multiplier became non-finite at snapshot {i}")


def mcg_cmv_step(state: McgState, x, a, params: McgParams) -> McgState:
    """One RCMV-MCG snapshot update; returns a new state."""
    R, _, v, p, g, w, lam2 = _arrays(state, False)
    M = w.size
    trace = np.empty(4)
    _cmv_step(R, v, p, g, w, np.empty(M, complex), np.empty(M, complex), lam2,
              np.asarray(x, np.complex128), np.asarray(a, np.complex128), params.epsilon_tilde,
              params.delta, params.mu, params.eta, params.mu_lambda, params.delta_lambda_max, trace)
    _check_lambda(lam2, state.i + 1)
    est = replace(state.est, R_hat=0.5 * (R + R.conj().T), count=state.est.count + 1)
    return McgState(w, v, p, g, float(lam2[0]), float(lam2[1]), est, state.i + 1)


def mcg_ccm_step(state: McgState, x, y, a, params: McgParams) -> McgState:
    """One RCCM-MCG snapshot update with output ``y = w(i-1)^H x(i)``."""
    R, d, _, p, g, w, lam2 = _arrays(state, True)
    M = w.size
    trace = np.empty(4)
    _ccm_step(R, d, p, g, w, np.empty(M, complex), np.empty(M, complex), np.empty(M, complex),
              lam2, np.asarray(x, np.complex128), complex(y), np.asarray(a, np.complex128),
              params.epsilon_tilde, params.delta, params.gamma, params.mu, params.eta,
              params.mu_lambda, params.delta_lambda_max, trace)
    _check_lambda(lam2, state.i + 1)
    est = replace(state.est, R_hat=0.5 * (R + R.conj().T), d_hat=d, count=state.est.count + 1)
    return McgState(w, None, p, g, float(lam2[0]), float(lam2[1]), est, state.i + 1)


@njit(cache=True, error_model="numpy")
def _run_cmv(X, a, R, v, p, g, w, lam2, eps_t, delta, mu, eta, mu_lambda, dl_max, eval_mask, W, trace):
    N, M = X.shape
    pR = np.empty(M, dtype=np.complex128)
    gn = np.empty(M, dtype=np.complex128)
    j = 0
    for i in range(N):
        _cmv_step(R, v, p, g, w, pR, gn, lam2, X[i], a, eps_t, delta, mu, eta, mu_lambda, dl_max, trace[i])
        if not np.isfinite(lam2[0]):
            return i + 1
        if eval_mask[i]:
            W[j] = w
            j += 1
    return 0


@njit(cache=True, error_model="numpy")
def _run_ccm(X, a, R, d, p, g, w, lam2, eps_t, delta, gamma, mu, eta, mu_lambda, dl_max, eval_mask, W, trace):
    N, M = X.shape
    pR = np.empty(M, dtype=np.complex128)
    gn = np.empty(M, dtype=np.complex128)
    wp = np.empty(M, dtype=np.complex128)
    j = 0
    for i in range(N):
        y = 0j
        for k in range(M):
            y += np.conj(w[k]) * X[i, k]
        _ccm_step(R, d, p, g, w, pR, gn, wp, lam2, X[i], y, a, eps_t, delta, gamma, mu, eta,
                  mu_lambda, dl_max, trace[i])
        if not np.isfinite(lam2[0]):
            return i + 1
        if eval_mask[i]:
            W[j] = w
            j += 1
    return 0


class McgRun(NamedTuple):
    weights: dict  # 1-based snapshot index -> w
    trace: np.ndarray  # (N, 4): lambda_hat(i), alpha, beta, constraint slack after the step
    state: McgState


def _eval_mask(N, eval_at):
    mask = np.zeros(N, dtype=np.bool_)
    idx = np.arange(1, N + 1) if eval_at is None else np.asarray(sorted(set(eval_at)), dtype=int)
    if idx.size and (idx.min() < 1 or idx.max() > N):
        raise ValueError("evaluation index outside the snapshot range")
    mask[idx - 1] = True
    return mask, idx


def run_rcmv_mcg(X, a, params: McgParams = CMV_DEFAULTS, eval_at=None, state: McgState | None = None) -> McgRun:
    """RCMV-MCG over the rows of ``X``; weights kept at ``eval_at`` (1-based)."""
    X = np.ascontiguousarray(X, dtype=np.complex128)
    a = np.asarray(a, dtype=np.complex128)
    state = state or init_cmv(a, params)
    R, _, v, p, g, w, lam2 = _arrays(state, False)
    mask, idx = _eval_mask(X.shape[0], eval_at)
    W = np.empty((idx.size, a.size), dtype=np.complex128)
    trace = np.empty((X.shape[0], 4))
    bad = _run_cmv(X, a, R, v, p, g, w, lam2, params.epsilon_tilde, params.delta, params.mu,
                   params.eta, params.mu_lambda, params.delta_lambda_max, mask, W, trace)
    if bad:
        raise FloatingPointError(f"multiplier became non-finite at snapshot {bad}")
    est = replace(state.est, R_hat=0.5 * (R + R.conj().T), count=state.est.count + X.shape[0])
    final = McgState(w, v, p, g, float(lam2[0]), float(lam2[1]), est, state.i + X.shape[0])
    return McgRun(dict(zip(idx.tolist(), W)), trace, final)


def run_rccm_mcg(X, a, params: McgParams = CCM_DEFAULTS, eval_at=None, state: McgState | None = None) -> McgRun:
    X = np.ascontiguousarray(X, dtype=np.complex128)
    a = np.asarray(a, dtype=np.complex128)
    state = state or init_ccm(a, params)
    R, d, _, p, g, w, lam2 = _arrays(state, True)
    mask, idx = _eval_mask(X.shape[0], eval_at)
    W = np.empty((idx.size, a.size), dtype=np.complex128)
    trace = np.empty((X.shape[0], 4))
    bad = _run_ccm(X, a, R, d, p, g, w, lam2, params.epsilon_tilde, params.delta, params.gamma,
                   params.mu, params.eta, params.mu_lambda, params.delta_lambda_max, mask, W, trace)
    if bad:
        raise FloatingPointError(f"multiplier became non-finite at snapshot {bad}")
    est = replace(state.est, R_hat=0.5 * (R + R.conj().T), d_hat=d, count=state.est.count + X.shape[0])
    final = McgState(w, None, p, g, float(lam2[0]), float(lam2[1]), est, state.i + X.shape[0])
    return McgRun(dict(zip(idx.tolist(), W)), trace, final)


def cmv_fixed_point(state: McgState, a, params: McgParams) -> np.ndarray:
    """``[R_xx + eps~ lam I]^{-1} a`` with the multiplier used in the last step."""
    M = np.asarray(a).size
    return np.linalg.solve(state.est.R_hat + params.epsilon_tilde * state.lambda_prev * np.eye(M), a)


def ccm_fixed_point(state: McgState, a, params: McgParams) -> np.ndarray:
    """``[R_a + eps~ lam I]^{-1} (gamma d + lam a / 2)``."""
    a = np.asarray(a)
    lam = state.lambda_prev
    A = state.est.R_hat + params.epsilon_tilde * lam * np.eye(a.size)
    return np.linalg.solve(A, params.gamma * state.est.d_hat + lam * a / 2.0)


def write_trace(trace: np.ndarray, path: str | os.PathLike) -> None:
    """Per-step CSV with columns ``i,lambda_hat,alpha,beta,slack``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "lambda_hat", "alpha", "beta", "slack"])
        for i, row in enumerate(trace, start=1):
            wr.writerow([i] + [repr(float(v)) for v in row])
