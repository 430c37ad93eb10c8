"""Homogeneous self-dual primal-dual interior-point kernel for SOC programs.

Solves the pair

    minimize    c'x                 maximize   -h'z
    subject to  G x + s = h         subject to  G'z + c = 0
                s in K                          z in K

where K is a product of second-order cones of sizes ``dims``. A size-1
block is the nonnegative ray. ``G`` must have full column rank; equality
constraints are eliminated by the caller.

Search directions use Nesterov-Todd scaling and a Mehrotra predictor-corrector
on the self-dual embedding, so infeasible and unbounded problems terminate
with a certificate instead of diverging.
"""
import numpy as np
from numba import njit

OPTIMAL = 0
PRIMAL_INFEASIBLE = 1
DUAL_INFEASIBLE = 2
MAX_ITERATIONS = 3
NUMERICAL_ERROR = 4


@njit(cache=True)
def _offsets(dims):
    offs = np.zeros(dims.shape[0], dtype=np.int64)
    acc = 0
    for k in range(dims.shape[0]):
        offs[k] = acc
        acc += dims[k]
    return offs


@njit(cache=True)
def _tail_norm(v, o, d):
    acc = 0.0
    for j in range(o + 1, o + d):
        acc += v[j] * v[j]
    return np.sqrt(acc)


@njit(cache=True)
def _jnorm(v, o, d):
    t = _tail_norm(v, o, d)
    return np.sqrt(max((v[o] - t) * (v[o] + t), 0.0))


@njit(cache=True)
def _shift_interior(v, offs, dims):
    worst = -np.inf
    for k in range(dims.shape[0]):
        worst = max(worst, _tail_norm(v, offs[k], dims[k]) - v[offs[k]])
    if worst >= -1e-8 * max(np.linalg.norm(v), 1.0):
        for k in range(dims.shape[0]):
            v[offs[k]] += 1.0 + worst


@njit(cache=True)
def _strictly_interior(s, z, offs, dims):
    for k in range(dims.shape[0]):
        if not (_jnorm(s, offs[k], dims[k]) > 0.0 and _jnorm(z, offs[k], dims[k]) > 0.0):
            return False
        if not (s[offs[k]] > 0.0 and z[offs[k]] > 0.0):
            return False
    return True


@njit(cache=True)
def _nt_scaling(s, z, offs, dims):
    nb = dims.shape[0]
    beta = np.empty(nb)
    wbar = np.empty(s.shape[0])
    for k in range(nb):
        o = offs[k]
        d = dims[k]
        sn = _jnorm(s, o, d)
        zn = _jnorm(z, o, d)
        dot = 0.0
        for j in range(o, o + d):
            dot += s[j] * z[j]
        dot /= sn * zn
        gamma = np.sqrt(0.5 * (1.0 + dot))
        wbar[o] = (s[o] / sn + z[o] / zn) / (2.0 * gamma)
        for j in range(o + 1, o + d):
            wbar[j] = (s[j] / sn - z[j] / zn) / (2.0 * gamma)
        beta[k] = np.sqrt(sn / zn)
    return beta, wbar


@njit(cache=True)
def _scale(v, beta, wbar, offs, dims, inverse):
    """``W v`` or ``W^{-1} v`` blockwise."""
    out = np.empty_like(v)
    sign = -1.0 if inverse else 1.0
    for k in range(dims.shape[0]):
        o = offs[k]
        d = dims[k]
        w0 = wbar[o]
        t = 0.0
        for j in range(o + 1, o + d):
            t += wbar[j] * v[j]
        coef = sign * v[o] + t / (1.0 + w0)
        b = 1.0 / beta[k] if inverse else beta[k]
        out[o] = b * (w0 * v[o] + sign * t)
        for j in range(o + 1, o + d):
            out[j] = b * (v[j] + coef * wbar[j])
    return out


@njit(cache=True)
def _scale_cols(A, beta, wbar, offs, dims, inverse):
    out = np.empty_like(A)
    for col in range(A.shape[1]):
        out[:, col] = _scale(np.ascontiguousarray(A[:, col]), beta, wbar, offs, dims, inverse)
    return out


@njit(cache=True)
def _jprod(u, v, offs, dims):
    out = np.empty_like(u)
    for k in range(dims.shape[0]):
        o = offs[k]
        d = dims[k]
        acc = 0.0
        for j in range(o, o + d):
            acc += u[j] * v[j]
        out[o] = acc
        for j in range(o + 1, o + d):
            out[j] = u[o] * v[j] + v[o] * u[j]
    return out


@njit(cache=True)
def _jdiv(u, v, offs, dims):
    """Solve ``u o w = v`` for ``w`` with ``u`` in the cone interior."""
    out = np.empty_like(u)
    for k in range(dims.shape[0]):
        o = offs[k]
        d = dims[k]
        t = _tail_norm(u, o, d)
        det = (u[o] - t) * (u[o] + t)
        acc = u[o] * v[o]
        for j in range(o + 1, o + d):
            acc -= u[j] * v[j]
        w0 = acc / det
        out[o] = w0
        for j in range(o + 1, o + d):
            out[j] = (v[j] - w0 * u[j]) / u[o]
    return out


@njit(cache=True)
def _max_step(lam, d, offs, dims):
    """Largest ``alpha`` with ``lam + alpha d`` in the cone.

    Each block is moved by the Lorentz boost taking ``lam`` to a multiple of
    ``(1, 0)``; there the bound is ``1 / (||rho_1|| - rho_0)``. Unlike the
    quadratic-root formula this does not lose the answer to cancellation
    when ``d`` is nearly parallel to ``lam``.
    """
    alpha = np.inf
    for k in range(dims.shape[0]):
        o = offs[k]
        n = dims[k]
        l0 = lam[o]
        d0 = d[o]
        if n == 1:
            if d0 < 0.0:
                alpha = min(alpha, -l0 / d0)
            continue
        lnrm = _jnorm(lam, o, n)
        if not (lnrm > 0.0 and l0 > 0.0):
            return 0.0
        b0 = l0 / lnrm
        ld = 0.0
        for j in range(o + 1, o + n):
            ld += lam[j] * d[j]
        ld /= lnrm
        rho0 = (b0 * d0 - ld) / lnrm
        cc = d0 - ld / (1.0 + b0)
        acc = 0.0
        for j in range(o + 1, o + n):
            r = d[j] - cc * lam[j] / lnrm
            acc += r * r
        t = np.sqrt(acc) / lnrm - rho0
        if t > 0.0:
            alpha = min(alpha, 1.0 / t)
    return alpha


@njit(cache=True)
def _step(lam, dst, dzt, tau, dtau, kappa, dkappa, offs, dims):
    a = min(_max_step(lam, dst, offs, dims), _max_step(lam, dzt, offs, dims))
    if dtau < 0.0:
        a = min(a, -tau / dtau)
    if dkappa < 0.0:
        a = min(a, -kappa / dkappa)
    return a


@njit(cache=True)
def ipm(G, h, c, dims, const, tol, max_iter, step_frac):
    """Run the interior-point iteration.

    Returns ``(x, s, z, tau, kappa, status, iterations, pres, dres, gap)``;
    on OPTIMAL the solution is ``x/tau, s/tau, z/tau``, on an infeasibility
    status ``z`` (primal) or ``(x, s)`` (dual) hold the certificate.
    """
    m, n = G.shape
    nb = dims.shape[0]
    offs = _offsets(dims)
    N = n + m + 1

    GtG = G.T @ G
    x = np.linalg.solve(GtG, G.T @ h)
    s = h - G @ x
    _shift_interior(s, offs, dims)
    z = G @ np.linalg.solve(GtG, -c)
    _shift_interior(z, offs, dims)
    tau = 1.0
    kappa = 1.0

    hnrm = max(1.0, np.linalg.norm(h))
    cnrm = max(1.0, np.linalg.norm(c))
    e = np.zeros(m)
    for k in range(nb):
        e[offs[k]] = 1.0

    status = MAX_ITERATIONS
    pres = np.inf
    dres = np.inf
    gap = np.inf
    it = 0
    K = np.zeros((N, N))
    rhs = np.empty(N)
    # best iterate so far, returned when the iteration stalls
    best = np.inf
    bx, bs, bz, btau, bkappa = x.copy(), s.copy(), z.copy(), tau, kappa
    for it in range(max_iter + 1):
        Gx = G @ x
        Gtz = G.T @ z
        cx = c @ x
        hz = h @ z
        sz = s @ z
        rx = Gtz + c * tau
        rz = s + Gx - h * tau
        rt = kappa + cx + hz

        # residuals relative to the data plus the size of the current iterate
        xn = np.linalg.norm(x)
        pres = np.linalg.norm(rz) / (tau * max(1.0, np.linalg.norm(h) + (xn + np.linalg.norm(s)) / tau))
        dres = np.linalg.norm(rx) / (tau * max(1.0, np.linalg.norm(c) + (xn + np.linalg.norm(z)) / tau))
        pcost = cx / tau + const
        dcost = -hz / tau + const
        gap = max(sz / (tau * tau), abs(cx + hz) / tau) / max(1.0, abs(pcost), abs(dcost))
        if pres <= tol and dres <= tol and gap <= tol:
            status = OPTIMAL
            break
        score = max(pres, dres, gap)
        if score < best:
            best = score
            bx, bs, bz, btau, bkappa = x.copy(), s.copy(), z.copy(), tau, kappa
        if hz < 0.0 and np.linalg.norm(Gtz) / cnrm <= tol * -hz:
            status = PRIMAL_INFEASIBLE
            break
        if cx < 0.0 and np.linalg.norm(Gx + s) / hnrm <= tol * -cx:
            status = DUAL_INFEASIBLE
            break
        if it == max_iter:
            break
        if not _strictly_interior(s, z, offs, dims):
            status = NUMERICAL_ERROR
            break

        beta, wbar = _nt_scaling(s, z, offs, dims)
        lam = _scale(z, beta, wbar, offs, dims, False)
        Gt = _scale_cols(G, beta, wbar, offs, dims, True)
        ht = _scale(h, beta, wbar, offs, dims, True)
        wrz = _scale(rz, beta, wbar, offs, dims, True)
        lamsq = _jprod(lam, lam, offs, dims)
        mu = (sz + tau * kappa) / (nb + 1)

        K[:, :] = 0.0
        K[:n, n:n + m] = Gt.T
        K[:n, N - 1] = c
        K[n:n + m, :n] = Gt
        for j in range(m):
            K[n + j, n + j] = -1.0
        K[n:n + m, N - 1] = -ht
        K[N - 1, :n] = -c
        K[N - 1, n:n + m] = -ht
        K[N - 1, N - 1] = kappa / tau

        # predictor
        ds = -lamsq
        dk = -tau * kappa
        rhs[:n] = -rx
        rhs[n:n + m] = -wrz - _jdiv(lam, ds, offs, dims)
        rhs[N - 1] = rt + dk / tau
        sol = np.linalg.solve(K, rhs)
        dzt = sol[n:n + m]
        dtau = sol[N - 1]
        dst = _jdiv(lam, ds, offs, dims) - dzt
        dkappa = (dk - kappa * dtau) / tau
        alpha = min(1.0, _step(lam, dst, dzt, tau, dtau, kappa, dkappa, offs, dims))
        sigma = (1.0 - alpha) ** 3

        # corrector
        eta = 1.0 - sigma
        ds = -lamsq - _jprod(dst, dzt, offs, dims) + sigma * mu * e
        dk = -tau * kappa - dtau * dkappa + sigma * mu
        rhs[:n] = -eta * rx
        rhs[n:n + m] = -eta * wrz - _jdiv(lam, ds, offs, dims)
        rhs[N - 1] = eta * rt + dk / tau
        sol = np.linalg.solve(K, rhs)
        dx = sol[:n]
        dzt = sol[n:n + m]
        dtau = sol[N - 1]
        dst = _jdiv(lam, ds, offs, dims) - dzt
        dkappa = (dk - kappa * dtau) / tau
        alpha = min(1.0, step_frac * _step(lam, dst, dzt, tau, dtau, kappa, dkappa, offs, dims))
        if not alpha > 1e-12:
            status = NUMERICAL_ERROR
            break

        x = x + alpha * dx
        s = s + alpha * _scale(dst, beta, wbar, offs, dims, False)
        z = z + alpha * _scale(dzt, beta, wbar, offs, dims, True)
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    if status == MAX_ITERATIONS or status == NUMERICAL_ERROR:
        return bx, bs, bz, btau, bkappa, status, it, pres, dres, best
    return x, s, z, tau, kappa, status, it, pres, dres, gap


@njit(cache=True)
def _soc_dist2(v, o, d, dual_zero, kind):
    """Squared distance of block ``v[o:o+d]`` from its cone (zero blocks are free when ``dual_zero``)."""
    if kind == 1:
        if dual_zero:
            return 0.0
        acc = 0.0
        for j in range(o, o + d):
            acc += v[j] * v[j]
        return acc
    t = v[o]
    nx = _tail_norm(v, o, d)
    if nx <= t:
        return 0.0
    if nx <= -t:
        acc = 0.0
        for j in range(o, o + d):
            acc += v[j] * v[j]
        return acc
    a = 0.5 * (t + nx)
    acc = (t - a) ** 2
    for j in range(o + 1, o + d):
        r = v[j] - a * v[j] / nx
        acc += r * r
    return acc


@njit(cache=True)
def kkt_score(F, p, f, kinds, dims, u, z):
    """Largest of the scaled primal, dual and gap residuals (same scaling as ``check_kkt``)."""
    offs = _offsets(dims)
    s = f + F.T @ u
    un = np.linalg.norm(u)
    zn = np.linalg.norm(z)
    fn = max(1.0, np.linalg.norm(f) + un + np.linalg.norm(s))
    pn = max(1.0, np.linalg.norm(p) + un + zn)
    pv = 0.0
    dv = 0.0
    for k in range(dims.shape[0]):
        pv += _soc_dist2(s, offs[k], dims[k], False, kinds[k])
        dv += _soc_dist2(z, offs[k], dims[k], True, kinds[k])
    r = F @ z - p
    dres = np.sqrt(r @ r + dv) / pn
    pobj = p @ u
    dobj = -(f @ z)
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    return max(np.sqrt(pv) / fn, dres, gap)


@njit(cache=True)
def polish(F, p, f, kinds, dims, u, z, steps):
    """Newton steps on ``F z = p``, ``s o z = 0`` (``s = 0`` on zero blocks).

    Returns the best ``(u, z)`` seen; stops at the first step that does not
    lower ``kkt_score``. A singular Newton matrix raises, so callers should
    fall back to the unpolished point.
    """
    n, m = F.shape
    offs = _offsets(dims)
    best = kkt_score(F, p, f, kinds, dims, u, z)
    J = np.zeros((n + m, n + m))
    J[:n, n:] = F
    r = np.empty(n + m)
    for _ in range(steps):
        s = f + F.T @ u
        r[:n] = F @ z - p
        for k in range(dims.shape[0]):
            o = offs[k]
            d = dims[k]
            for i in range(o, o + d):
                J[n + i, :] = 0.0
            if kinds[k] == 1:
                for i in range(o, o + d):
                    r[n + i] = s[i]
                    J[n + i, :n] = F[:, i]
                continue
            # arrow(s) z and its Jacobian blocks arrow(z) F' and arrow(s)
            acc = 0.0
            for j in range(o, o + d):
                acc += s[j] * z[j]
            r[n + o] = acc
            for j in range(o + 1, o + d):
                r[n + j] = s[o] * z[j] + s[j] * z[o]
            for c in range(n):
                acc = 0.0
                for j in range(o, o + d):
                    acc += z[j] * F[c, j]
                J[n + o, c] = acc
                for j in range(o + 1, o + d):
                    J[n + j, c] = z[o] * F[c, j] + z[j] * F[c, o]
            J[n + o, n + o] = s[o]
            for j in range(o + 1, o + d):
                J[n + o, n + j] = s[j]
                J[n + j, n + o] = s[j]
                J[n + j, n + j] = s[o]
        dlt = np.linalg.solve(J, -r)
        if not np.all(np.isfinite(dlt)):
            break
        u_new = u + dlt[:n]
        z_new = z + dlt[n:]
        score = kkt_score(F, p, f, kinds, dims, u_new, z_new)
        if score < best:
            best = score
            u = u_new
            z = z_new
        else:
            break
    return u, z
