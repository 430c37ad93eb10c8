"""Exponentially windowed statistics, Cholesky factors and the real embedding."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class CholeskyError(np.linalg.LinAlgError):
    """Matrix is not numerically positive definite, even after jitter."""


@dataclass(frozen=True)
class WindowedEstimates:
    R_hat: np.ndarray
    mu: float
    d_hat: np.ndarray | None = None
    count: int = 0

    @classmethod
    def init(cls, M: int, scale: float, mu: float, with_d: bool = False):
        """``R_hat(0) = scale * I`` and, if requested, ``d_hat(0) = 0``."""
        if not 0.0 < mu < 1.0:
            raise ValueError(f"forgetting factor must be in (0, 1), got {mu}")
        R = scale * np.eye(M, dtype=complex)
        d = np.zeros(M, dtype=complex) if with_d else None
        return cls(R, mu, d, 0)


def _hermitize(R):
    return 0.5 * (R + R.conj().T)


def update_rxx(est: WindowedEstimates, x: np.ndarray) -> WindowedEstimates:
    """``R(i) = mu R(i-1) + x x^H``."""
    R = est.mu * est.R_hat + np.outer(x, x.conj())
    return replace(est, R_hat=_hermitize(R), count=est.count + 1)


def update_ra_d(est: WindowedEstimates, x: np.ndarray, y: complex) -> WindowedEstimates:
    """Constant-modulus statistics for output ``y = w(i-1)^H x(i)``.

    ``R_a(i) = mu R_a(i-1) + |y|^2 x x^H`` and ``d(i) = mu d(i-1) + x y*``.
    """
    if est.d_hat is None:
        raise ValueError("estimates were created without a cross-correlation vector")
    R = est.mu * est.R_hat + abs(y) ** 2 * np.outer(x, x.conj())
    d = est.mu * est.d_hat + x * np.conj(y)
    return replace(est, R_hat=_hermitize(R), d_hat=d, count=est.count + 1)


def cholesky(R: np.ndarray) -> np.ndarray:
    """Upper-triangular ``U`` with ``U^H U = R``.

    One retry with ``1e-10 * trace(R)/M`` diagonal jitter is made before giving up.
    """
    R = np.asarray(R)
    M = R.shape[0]
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * abs(np.trace(R).real) / M
        try:
            L = np.linalg.cholesky(R + jitter * np.eye(M))
        except np.linalg.LinAlgError as exc:
            raise CholeskyError("matrix is not positive definite") from exc
    return L.conj().T


@dataclass(frozen=True)
class RealEmbedding:
    R_acr: np.ndarray
    d_r: np.ndarray
    a_breve: np.ndarray
    a_bar: np.ndarray


def to_real(v: np.ndarray) -> np.ndarray:
    """``[Re v; Im v]``."""
    return np.concatenate([v.real, v.imag])


def from_real(v: np.ndarray) -> np.ndarray:
    M = v.shape[0] // 2
    return v[:M] + 1j * v[M:]


def real_matrix(R: np.ndarray) -> np.ndarray:
    """Real 2M x 2M matrix acting on ``to_real(w)`` like ``R`` acts on ``w``."""
    return np.block([[R.real, -R.imag], [R.imag, R.real]])


def embed_real(R_ac: np.ndarray, d: np.ndarray | None, a: np.ndarray) -> RealEmbedding:
    M = a.shape[0]
    d_r = np.zeros(2 * M) if d is None else to_real(d)
    a_bar = np.concatenate([a.imag, -a.real])
    return RealEmbedding(real_matrix(R_ac), d_r, to_real(a), a_bar)
