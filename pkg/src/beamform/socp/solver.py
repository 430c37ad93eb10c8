"""Dense SOC program solver.

Programs are stated in the form

    minimize    p'u
    subject to  f + F'u  in  K_1 x K_2 x ... x K_r

with each ``K_j`` a second-order cone ``{(t, v): t >= ||v||}`` or a zero
cone. ``F`` has shape ``(n, m)`` so that ``F'u`` has one entry per cone row.
The matching dual is

    maximize    -f'z
    subject to  F z = p,  z in K*

(zero cones are free in the dual). Zero-cone rows are eliminated up front
through a null-space basis, then the conic part goes to the interior-point
kernel in ``_ipm``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _ipm


class Cone(NamedTuple):
    kind: str  # "soc" or "zero"
    dim: int


def SOC(dim: int) -> Cone:
    return Cone("soc", int(dim))


def Zero(dim: int) -> Cone:
    return Cone("zero", int(dim))


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class ConeProgram:
    p: np.ndarray
    f: np.ndarray
    F: np.ndarray
    cones: tuple[Cone, ...]

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        f = np.asarray(self.f, dtype=float).ravel()
        F = np.asarray(self.F, dtype=float).reshape(p.size, f.size)
        cones = tuple(Cone(str(k), int(d)) for k, d in self.cones)
        for c in cones:
            if c.kind not in ("soc", "zero") or c.dim < 1:
                raise ValueError(f"bad cone {c}")
        if sum(c.dim for c in cones) != f.size:
            raise ValueError(f"cone dims sum to {sum(c.dim for c in cones)}, f has {f.size} rows")
        if not (np.all(np.isfinite(F)) and np.all(np.isfinite(f)) and np.all(np.isfinite(p))):
            raise ValueError("program data must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "cones", cones)

    @property
    def n(self) -> int:
        return self.p.size

    @property
    def m(self) -> int:
        return self.f.size

    def slack(self, u) -> np.ndarray:
        return self.f + self.F.T @ u

    def row_slices(self):
        o = 0
        for c in self.cones:
            yield c, slice(o, o + c.dim)
            o += c.dim


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8
    max_iter: int = 100
    step_frac: float = 0.99
    polish: int = 3  # Newton steps on the complementarity system after convergence


@dataclass(frozen=True)
class ConeSolution:
    u: np.ndarray
    status: str
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int
    z: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class KktReport:
    primal_residual: float
    dual_residual: float
    duality_gap: float
    complementarity: float

    def max(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.duality_gap)


def _project_soc(v):
    t, x = v[0], v[1:]
    nx = np.linalg.norm(x)
    if nx <= t:
        return v
    if nx <= -t:
        return np.zeros_like(v)
    a = 0.5 * (t + nx)
    return np.concatenate([[a], a * x / nx])


def cone_violation(prog: ConeProgram, s, dual=False) -> float:
    """Euclidean distance of ``s`` from the cone product (or its dual)."""
    acc = 0.0
    for c, sl in prog.row_slices():
        v = s[sl]
        if c.kind == "zero":
            if not dual:
                acc += v @ v
        else:
            r = v - _project_soc(v)
            acc += r @ r
    return float(np.sqrt(acc))


def check_kkt(prog: ConeProgram, sol: ConeSolution) -> KktReport:
    """Recompute optimality residuals from ``sol.u`` and ``sol.z`` alone."""
    u = np.asarray(sol.u, dtype=float)
    z = np.asarray(sol.z, dtype=float)
    s = prog.slack(u)
    # scaled by data plus iterate size, so badly scaled but solved programs pass
    un, zn = np.linalg.norm(u), np.linalg.norm(z)
    fn = max(1.0, np.linalg.norm(prog.f) + un + np.linalg.norm(s))
    pn = max(1.0, np.linalg.norm(prog.p) + un + zn)
    pres = cone_violation(prog, s) / fn
    dres = np.hypot(np.linalg.norm(prog.F @ z - prog.p), cone_violation(prog, z, dual=True)) / pn
    pobj = prog.p @ u
    dobj = -(prog.f @ z)
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    comp = abs(s @ z) / max(1.0, abs(pobj), abs(dobj))
    return KktReport(float(pres), float(dres), float(gap), float(comp))


def _null_space(A, full=False):
    """Orthonormal null-space basis and rank; with ``full`` also the right singular vectors."""
    if A.shape[0] == 0:
        Vt = np.eye(A.shape[1])
        return (Vt, 0, Vt) if full else (Vt, 0)
    _, sv, Vt = np.linalg.svd(A)
    tol = max(A.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    r = int(np.sum(sv > tol))
    return (Vt[r:].T, r, Vt) if full else (Vt[r:].T, r)


def polish(prog: ConeProgram, u, z, steps: int = 3):
    """Newton refinement of an interior-point solution.

    Solves ``F z = p``, ``s o z = 0`` blockwise (``s = f + F'u``, Jordan
    product) and ``s = 0`` on zero cones. Interior-point iterates reach
    objective accuracy ``tol`` but weights only about ``sqrt(tol)`` when the
    optimum sits on curved cone boundaries; a few Newton steps on the
    optimality conditions recover full precision. Steps that increase the
    KKT residual are discarded.
    """
    kinds = np.array([1 if c.kind == "zero" else 0 for c in prog.cones], dtype=np.int64)
    dims = np.array([c.dim for c in prog.cones], dtype=np.int64)
    try:
        return _ipm.polish(np.ascontiguousarray(prog.F), prog.p, prog.f, kinds, dims,
                           np.asarray(u, dtype=float), np.asarray(z, dtype=float), steps)
    except Exception:  # singular Newton matrix
        return u, z


def _finish(prog, u, z, status, iters, polish_steps=0):
    if status == OPTIMAL and polish_steps:
        u, z = polish(prog, u, z, polish_steps)
    if u is None:
        nan = float("nan")
        return ConeSolution(None, status, nan, nan, nan, iters, z)
    sol = ConeSolution(u, status, 0.0, 0.0, 0.0, iters, z)
    rep = check_kkt(prog, sol)
    return ConeSolution(u, status, rep.primal_residual, rep.dual_residual, rep.duality_gap, iters, z)


def solve(prog: ConeProgram, settings: SolverSettings | None = None) -> ConeSolution:
    """Solve a cone program.

    ``status`` is one of ``"optimal"``, ``"infeasible"``, ``"unbounded"`` or
    ``"max-iterations"``. For infeasible programs ``z`` holds a Farkas
    certificate and ``u`` is None.
    """
    st = settings or SolverSettings()
    soc_rows, zero_rows, dims = [], [], []
    for c, sl in prog.row_slices():
        idx = np.arange(sl.start, sl.stop)
        if c.kind == "zero":
            zero_rows.append(idx)
        else:
            soc_rows.append(idx)
            dims.append(c.dim)
    soc_rows = np.concatenate(soc_rows) if soc_rows else np.zeros(0, dtype=int)
    zero_rows = np.concatenate(zero_rows) if zero_rows else np.zeros(0, dtype=int)
    dims = np.asarray(dims, dtype=np.int64)

    # equalities f_Z + F_Z' u = 0  ->  u = u0 + N v
    A = prog.F[:, zero_rows].T
    b = -prog.f[zero_rows]
    if zero_rows.size:
        u0 = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.linalg.norm(A @ u0 - b) > 1e3 * np.finfo(float).eps * max(1.0, np.linalg.norm(b)) * max(1.0, np.linalg.norm(A)):
            z = np.zeros(prog.m)
            return _finish(prog, None, z, INFEASIBLE, 0)
        N, _ = _null_space(A)
    else:
        u0 = np.zeros(prog.n)
        N = np.eye(prog.n)

    G0 = -prog.F[:, soc_rows].T
    h = prog.f[soc_rows] + prog.F[:, soc_rows].T @ u0
    G1 = G0 @ N
    c1 = N.T @ prog.p
    if G1.shape[1]:
        Nrange_null, r, Vt = _null_space(G1, full=True)
        R = Vt[:r].T
    else:
        Nrange_null, R = np.zeros((0, 0)), np.zeros((0, 0))
    if Nrange_null.size and np.linalg.norm(Nrange_null.T @ c1) > 1e-9 * max(1.0, np.linalg.norm(c1)):
        # objective decreases along a direction the cones never see
        return _finish(prog, None, None, UNBOUNDED, 0)
    T = N @ R
    G = np.ascontiguousarray(G0 @ T)
    c = np.ascontiguousarray(T.T @ prog.p)
    const = float(prog.p @ u0)

    def dual_full(zk):
        z = np.zeros(prog.m)
        z[soc_rows] = zk
        if zero_rows.size:
            Fz = prog.F[:, zero_rows]
            z[zero_rows] = np.linalg.lstsq(Fz, prog.p - prog.F[:, soc_rows] @ zk, rcond=None)[0]
        return z

    if G.shape[1] == 0:
        zk = np.zeros(soc_rows.size)
        inside = cone_violation(ConeProgram(np.zeros(1), h, np.zeros((1, h.size)), tuple(SOC(d) for d in dims)), h) == 0.0
        return _finish(prog, u0 if inside else None, dual_full(zk), OPTIMAL if inside else INFEASIBLE, 0)

    try:
        x, s, zk, tau, kappa, code, iters, *_ = _ipm.ipm(
            G, np.ascontiguousarray(h), c, dims, const, 0.5 * st.tol, st.max_iter, st.step_frac)
    except Exception:  # singular Newton system
        return _finish(prog, None, None, MAX_ITERATIONS, st.max_iter)

    if code == _ipm.OPTIMAL:
        return _finish(prog, u0 + T @ (x / tau), dual_full(zk / tau), OPTIMAL, iters, st.polish)
    if code == _ipm.PRIMAL_INFEASIBLE:
        return _finish(prog, None, dual_full(zk / -(h @ zk)), INFEASIBLE, iters)
    if code == _ipm.DUAL_INFEASIBLE:
        return _finish(prog, None, None, UNBOUNDED, iters)
    if not tau > 0:
        return _finish(prog, None, None, MAX_ITERATIONS, iters)
    # stalled near the optimum: accept the best iterate if Newton refinement certifies it
    u, z = u0 + T @ (x / tau), dual_full(zk / tau)
    if code == _ipm.NUMERICAL_ERROR and st.polish:
        pu, pz = polish(prog, u, z, st.polish + 5)
        if check_kkt(prog, ConeSolution(pu, OPTIMAL, 0, 0, 0, iters, pz)).max() <= st.tol:
            return _finish(prog, pu, pz, OPTIMAL, iters)
    return _finish(prog, u, z, MAX_ITERATIONS, iters)
