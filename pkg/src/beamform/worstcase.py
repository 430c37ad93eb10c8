"""Worst-case robust beamformers solved as second-order cone programs.

Both designs keep ``Re{w^H a} - delta >= epsilon ||w||`` and ``Im{w^H a} = 0``
for the presumed steering vector ``a``. The minimum-variance design (WC-CMV)
minimizes ``w^H R w``; the constant-modulus design (WC-CCM) minimizes
``w^H R_a w - 2 gamma Re{d^H w}`` and is re-solved once per snapshot while
``R_a`` and ``d`` track the beamformer output.

Decision vector layout: ``u = [tau, Re w, Im w]``.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from . import estimators as est
from .socp import ConeProgram, SOC, Zero, solve
from .socp.io import dump_program

log = logging.getLogger(__name__)


class InfeasibleParametersError(ValueError):
    """``epsilon >= ||a||``: no weight vector meets the worst-case constraint."""


class SolverAbort(RuntimeError):
    """Too many per-snapshot solves failed in one trial."""


@dataclass(frozen=True)
class WcParams:
    epsilon: float = 2.1
    delta: float = 1.0
    gamma: float = 1.0
    mu: float = 0.995
    sigma_n2: float = 1.0
    max_fail_frac: float = 0.01

    def __post_init__(self):
        if self.epsilon < 0 or self.delta <= 0 or self.gamma < 0:
            raise ValueError("need epsilon >= 0, delta > 0, gamma >= 0")
        if not 0 < self.mu < 1:
            raise ValueError("forgetting factor must be in (0, 1)")
        if self.sigma_n2 <= 0:
            raise ValueError("sigma_n2 must be positive")


def _check_epsilon(a, epsilon):
    if epsilon >= np.linalg.norm(a):
        raise InfeasibleParametersError(
            f"epsilon={epsilon} must be below ||a|| = {np.linalg.norm(a):.6g}")


def _constraint_rows(emb: est.RealEmbedding, epsilon: float, M: int):
    """Rows of ``F'`` (without the tau column) for the robust SOC and the zero cone."""
    rows = np.zeros((2 * M + 2, 2 * M))
    rows[0] = emb.a_breve
    rows[1:2 * M + 1] = epsilon * np.eye(2 * M)
    rows[-1] = emb.a_bar
    return rows


def build_wc_cmv(R_hat, a, epsilon: float, delta: float) -> ConeProgram:
    """min ||R^{1/2} w|| subject to the worst-case and phase constraints.

    Minimizing the norm instead of its square leaves the argmin unchanged and
    keeps the first cone at dimension ``2M + 1``.
    """
    a = np.asarray(a, dtype=complex)
    M = a.size
    _check_epsilon(a, epsilon)
    emb = est.embed_real(est.cholesky(R_hat), None, a)
    m = (2 * M + 1) + (2 * M + 1) + 1
    Ft = np.zeros((m, 2 * M + 1))
    Ft[0, 0] = 1.0
    Ft[1:2 * M + 1, 1:] = emb.R_acr
    Ft[2 * M + 1:, 1:] = _constraint_rows(emb, epsilon, M)
    f = np.zeros(m)
    f[2 * M + 1] = -delta
    p = np.zeros(2 * M + 1)
    p[0] = 1.0
    return ConeProgram(p, f, Ft.T, (SOC(2 * M + 1), SOC(2 * M + 1), Zero(1)))


def build_wc_ccm(R_a_hat, d_hat, a, epsilon: float, delta: float, gamma: float) -> ConeProgram:
    """Constant-modulus worst-case program with a rotated-cone epigraph.

    The first cone ``(1/2 + tau/2 + gamma d'w, 1/2 - tau/2 - gamma d'w, R w)``
    is equivalent to ``tau >= ||R w||^2 - 2 gamma d'w``.
    """
    a = np.asarray(a, dtype=complex)
    M = a.size
    _check_epsilon(a, epsilon)
    emb = est.embed_real(est.cholesky(R_a_hat), d_hat, a)
    m = 4 * M + 4
    Ft = np.zeros((m, 2 * M + 1))
    Ft[0, 0], Ft[0, 1:] = 0.5, gamma * emb.d_r
    Ft[1, 0], Ft[1, 1:] = -0.5, -gamma * emb.d_r
    Ft[2:2 * M + 2, 1:] = emb.R_acr
    Ft[2 * M + 2:, 1:] = _constraint_rows(emb, epsilon, M)
    f = np.zeros(m)
    f[0] = f[1] = 0.5
    f[2 * M + 2] = -delta
    p = np.zeros(2 * M + 1)
    p[0] = 1.0
    return ConeProgram(p, f, Ft.T, (SOC(2 * M + 2), SOC(2 * M + 1), Zero(1)))


def weights_from_solution(u: np.ndarray) -> np.ndarray:
    return est.from_real(np.asarray(u)[1:])


def constraint_slack(w, a, epsilon, delta) -> tuple[float, float]:
    """``(Re{w^H a} - delta - epsilon ||w||, Im{w^H a})``."""
    wa = np.vdot(w, a)
    return float(wa.real - delta - epsilon * np.linalg.norm(w)), float(wa.imag)


def solve_weights(prog: ConeProgram, solver=solve):
    sol = solver(prog)
    return (weights_from_solution(sol.u) if sol.status == "optimal" else None), sol


@dataclass(frozen=True)
class WcState:
    w: np.ndarray
    est: est.WindowedEstimates
    failures: int = 0
    steps: int = 0

    @classmethod
    def init(cls, a, params: WcParams, with_d: bool = True) -> "WcState":
        a = np.asarray(a, dtype=complex)
        M = a.size
        return cls(a / M, est.WindowedEstimates.init(M, params.sigma_n2, params.mu, with_d))


class StepInfo(NamedTuple):
    y: complex
    status: str
    iterations: int


DumpHook = Callable[[ConeProgram, int], None]


def dump_to_dir(directory: str | os.PathLike) -> DumpHook:
    """Failure hook writing each rejected program as ``fail_<step>.socp``."""
    def hook(prog, step):
        os.makedirs(directory, exist_ok=True)
        dump_program(prog, os.path.join(directory, f"fail_{step:05d}.socp"))
    return hook


def window_weight(mu: float, count: int) -> float:
    """Total weight ``mu^i + sum_{k<i} mu^k`` carried by an estimate after ``i`` updates."""
    return mu ** count + (1.0 - mu ** count) / (1.0 - mu)


def _normalized(e: est.WindowedEstimates, w_prev):
    """``(R_a, d)`` divided by the current cost scale ``w^H R_a w``.

    Scaling both by the same positive number leaves the argmin unchanged but
    keeps the optimal ``tau`` near one. Without it the rotated cone's first
    two entries grow like ``tau/2`` with nearly opposite signs and the
    interior-point iterates lose their accuracy long before convergence.
    """
    q = float(np.real(np.vdot(w_prev, e.R_hat @ w_prev)))
    q = max(q, 1e-12 * float(np.trace(e.R_hat).real))
    return e.R_hat / q, e.d_hat / q


def wc_adapt_step(state: WcState, x, a, params: WcParams, solver=solve,
                  on_failure: DumpHook | None = None) -> tuple[WcState, StepInfo]:
    """One WC-CCM snapshot update followed by a fresh cone solve.

    A non-optimal solve keeps the previous weights and bumps ``failures``.
    """
    x = np.asarray(x, dtype=complex)
    y = np.vdot(state.w, x)
    e = est.update_ra_d(state.est, x, y)
    prog = build_wc_ccm(*_normalized(e, state.w), a, params.epsilon, params.delta, params.gamma)
    w, sol = solve_weights(prog, solver)
    failures = state.failures
    if w is None:
        failures += 1
        log.warning("snapshot %d: cone solve returned %s, holding weights", state.steps + 1, sol.status)
        if on_failure is not None:
            on_failure(prog, state.steps + 1)
        w = state.w
    return WcState(w, e, failures, state.steps + 1), StepInfo(y, sol.status, sol.iterations)


def wc_cmv_weights(R_hat, a, params: WcParams, solver=solve):
    """Solve WC-CMV for a given covariance estimate; None if the solve fails."""
    w, _ = solve_weights(build_wc_cmv(R_hat, a, params.epsilon, params.delta), solver)
    return w


def run_wc_ccm(X: np.ndarray, a, params: WcParams, eval_at=None, solver=solve,
               on_failure: DumpHook | None = None, on_step=None):
    """Run the WC-CCM recursion over the rows of ``X``.

    Returns ``{i: w(i)}`` for every 1-based ``i`` in ``eval_at`` (all
    snapshots when None). Raises ``SolverAbort`` once failures exceed
    ``max_fail_frac`` of the stream length.
    """
    N = X.shape[0]
    wanted = set(range(1, N + 1)) if eval_at is None else set(eval_at)
    limit = params.max_fail_frac * N
    state = WcState.init(a, params)
    out = {}
    for i in range(1, N + 1):
        state, info = wc_adapt_step(state, X[i - 1], a, params, solver, on_failure)
        if state.failures > limit:
            raise SolverAbort(f"{state.failures} failed solves by snapshot {i} (limit {limit:g})")
        if on_step is not None:
            on_step(i, state, info)
        if i in wanted:
            out[i] = state.w
    return out


def run_wc_cmv(X: np.ndarray, a, params: WcParams, eval_at, solver=solve):
    """WC-CMV weights at each 1-based ``i`` in ``eval_at``.

    The covariance estimate ``R(i) = mu R(i-1) + x x^H`` starts from
    ``sigma_n2 I``; the weights do not feed back into it, so the cone program
    is only solved where the weights are needed.
    """
    a = np.asarray(a, dtype=complex)
    e = est.WindowedEstimates.init(a.size, params.sigma_n2, params.mu)
    out, last = {}, a / a.size
    targets = sorted(eval_at)
    i = 0
    for t in targets:
        while i < t:
            e = est.update_rxx(e, X[i])
            i += 1
        w = wc_cmv_weights(e.R_hat / window_weight(params.mu, e.count), a, params, solver)
        if w is not None:
            last = w
        out[t] = last
    return out


class ConvexityCheck(NamedTuple):
    satisfied: bool
    margin: float


def convexity_check(gamma: float, delta: float, sigma_s2: float) -> ConvexityCheck:
    """Sufficient condition ``gamma <= delta * sigma_s2`` for a convex CM cost."""
    if min(gamma, delta, sigma_s2) < 0:
        raise ValueError("inputs must be nonnegative")
    margin = delta * sigma_s2 - gamma
    return ConvexityCheck(margin >= 0, float(margin))


class EpsilonReport(NamedTuple):
    c: complex
    ratio: float  # ||b||^2 / |c|^2, nan when w is orthogonal to a
    bound: float  # 1/eps^2 - 1/M
    within_bound: bool
    amplification_floor: float  # lower bound on c: delta / (1 - eps/sqrt(M))
    degenerate: bool


def epsilon_ratio_diagnostic(w, a, epsilon: float, M: int | None = None, delta: float = 1.0) -> EpsilonReport:
    """Split ``w = c a/M + b`` with ``b`` orthogonal to ``a`` and compare ``||b||^2/|c|^2`` to its bound."""
    w = np.asarray(w, dtype=complex)
    a = np.asarray(a, dtype=complex)
    M = a.size if M is None else M
    c = np.vdot(a, w)
    b = w - c * a / M
    bound = (1.0 / epsilon ** 2 if epsilon > 0 else np.inf) - 1.0 / M
    root_m = np.sqrt(M)
    floor = delta / (1.0 - epsilon / root_m) if epsilon < root_m else np.inf
    if abs(c) <= 1e-12 * max(np.linalg.norm(w), 1e-300) * root_m:
        return EpsilonReport(c, float("nan"), bound, False, floor, True)
    ratio = float(np.real(np.vdot(b, b)) / abs(c) ** 2)
    return EpsilonReport(c, ratio, bound, ratio <= bound * (1 + 1e-9) + 1e-15, floor, False)


def with_epsilon(params: WcParams, epsilon: float) -> WcParams:
    return replace(params, epsilon=epsilon)
