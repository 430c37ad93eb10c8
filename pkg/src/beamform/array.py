"""Uniform linear array signal model.

Snapshots follow ``x(i) = A s(i) + n(i)`` with a half-wavelength ULA whose
element ``m`` (zero based) has phase ``exp(j*pi*m*cos(theta))``; angles are
in degrees from the array axis, so broadside is 90 degrees.

The desired user transmits unit-modulus symbols with uniform random phase,
interferers are circular complex Gaussian and the sensor noise is white
circular Gaussian with per-element SNR ``sigma_s2 / sigma_n2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    num_sensors: int

    def __post_init__(self):
        if int(self.num_sensors) < 2:
            raise ValueError(f"need at least 2 sensors, got {self.num_sensors}")


@dataclass(frozen=True)
class SourceSpec:
    doa_deg: float
    power_db_rel: float = 0.0
    is_desired: bool = False


@dataclass(frozen=True)
class MismatchModel:
    """Local coherent scattering of the desired user's wavefront.

    ``angle_dist`` selects how scatterer angles spread around the presumed
    direction: ``"uniform"`` (zero-mean uniform with standard deviation
    ``angle_std_deg``) or ``"gaussian"``.
    """
    kind: str = "none"
    num_paths: int = 4
    angle_std_deg: float = 2.0
    angle_dist: str = "uniform"
    resample_per_trial: bool = True

    def __post_init__(self):
        if self.kind not in ("none", "coherent-scattering"):
            raise ValueError(f"unknown mismatch kind {self.kind!r}")
        if self.angle_dist not in ("uniform", "gaussian"):
            raise ValueError(f"unknown angle distribution {self.angle_dist!r}")
        if self.num_paths < 0 or self.angle_std_deg < 0:
            raise ValueError("num_paths and angle_std_deg must be nonnegative")


@dataclass(frozen=True)
class Segment:
    """Sources active on snapshots ``start..stop`` (1-based, inclusive)."""
    start: int
    stop: int
    sources: tuple[SourceSpec, ...]

    def __post_init__(self):
        desired = [s for s in self.sources if s.is_desired]
        if len(desired) != 1:
            raise ValueError("each segment needs exactly one desired source")
        if desired[0].power_db_rel != 0.0:
            raise ValueError("the desired source defines the 0 dB reference")
        if self.stop < self.start:
            raise ValueError(f"empty segment {self.start}..{self.stop}")

    @property
    def desired(self) -> SourceSpec:
        return next(s for s in self.sources if s.is_desired)

    @property
    def interferers(self) -> tuple[SourceSpec, ...]:
        return tuple(s for s in self.sources if not s.is_desired)


@dataclass(frozen=True)
class Scenario:
    geometry: ArrayGeometry
    segments: tuple[Segment, ...]
    snr_db: float = 0.0
    sigma_s2: float = 1.0
    mismatch: MismatchModel = field(default_factory=MismatchModel)

    def __post_init__(self):
        if not self.segments:
            raise ValueError("scenario has no segments")
        expected = 1
        for seg in self.segments:
            if seg.start != expected:
                raise ValueError(f"segment starting at {seg.start} leaves a gap or overlap")
            expected = seg.stop + 1
        doas = {s.desired.doa_deg for s in self.segments}
        if len(doas) != 1:
            raise ValueError("desired DoA must be the same in all segments")

    @property
    def num_snapshots(self) -> int:
        return self.segments[-1].stop

    @property
    def sigma_n2(self) -> float:
        return self.sigma_s2 * 10.0 ** (-self.snr_db / 10.0)

    @property
    def desired_doa(self) -> float:
        return self.segments[0].desired.doa_deg

    def segment_at(self, i: int) -> Segment:
        """Segment active at 1-based snapshot ``i``."""
        for seg in self.segments:
            if seg.start <= i <= seg.stop:
                return seg
        raise IndexError(f"snapshot {i} outside 1..{self.num_snapshots}")

    def truncated(self, n: int) -> "Scenario":
        """Same scenario restricted to the first ``n`` snapshots."""
        if not 1 <= n <= self.num_snapshots:
            raise ValueError(f"cannot truncate to {n} snapshots")
        segs = []
        for seg in self.segments:
            if seg.start > n:
                break
            segs.append(Segment(seg.start, min(seg.stop, n), seg.sources))
        return Scenario(self.geometry, tuple(segs), self.snr_db, self.sigma_s2, self.mismatch)


class Snapshot(NamedTuple):
    index: int
    x: np.ndarray


def steering_vector(geometry: ArrayGeometry | int, theta_deg: float) -> np.ndarray:
    M = geometry if isinstance(geometry, int) else geometry.num_sensors
    if not 0.0 < theta_deg < 180.0:
        raise ValueError(f"DoA must lie in (0, 180) degrees, got {theta_deg}")
    phase = np.pi * np.arange(M) * np.cos(np.deg2rad(theta_deg))
    return np.exp(1j * phase)


def steering_matrix(geometry, thetas_deg: Sequence[float]) -> np.ndarray:
    """Columns are steering vectors, shape (M, D)."""
    return np.stack([steering_vector(geometry, t) for t in thetas_deg], axis=1)


def coherent_scattering(geometry, presumed_deg: float, phases, angles_deg) -> np.ndarray:
    """``a + sum_k exp(j*phi_k) a(theta_k)`` for given path phases and angles."""
    a1 = steering_vector(geometry, presumed_deg).copy()
    for phi, theta in zip(phases, angles_deg):
        a1 += np.exp(1j * phi) * steering_vector(geometry, theta)
    return a1


def realize_mismatch(model: MismatchModel, geometry, presumed_deg: float, rng) -> np.ndarray:
    """Draw the actual desired-user steering vector for one trial."""
    if model.kind == "none" or model.num_paths == 0:
        return steering_vector(geometry, presumed_deg)
    K = model.num_paths
    phases = rng.uniform(0.0, 2.0 * np.pi, size=K)
    if model.angle_dist == "gaussian":
        offsets = rng.normal(0.0, model.angle_std_deg, size=K)
    else:
        half = np.sqrt(3.0) * model.angle_std_deg
        offsets = rng.uniform(-half, half, size=K)
    angles = np.clip(presumed_deg + offsets, 1e-6, 180.0 - 1e-6)
    return coherent_scattering(geometry, presumed_deg, phases, angles)


def segment_steering(scenario: Scenario, a1: np.ndarray) -> list[np.ndarray]:
    """Per-segment (M, D) steering matrices; column 0 is the desired user."""
    out = []
    for seg in scenario.segments:
        cols = [a1] + [steering_vector(scenario.geometry, s.doa_deg) for s in seg.interferers]
        out.append(np.stack(cols, axis=1))
    return out


def segment_powers(scenario: Scenario, seg: Segment) -> np.ndarray:
    """Source powers in segment order (desired first)."""
    rel = [0.0] + [s.power_db_rel for s in seg.interferers]
    return scenario.sigma_s2 * 10.0 ** (np.asarray(rel) / 10.0)


def generate_snapshots(scenario: Scenario, steering: Sequence[np.ndarray], rng,
                       n: int | None = None) -> np.ndarray:
    """Array observations for snapshots ``1..n``, returned as rows of an (n, M) array.

    ``steering`` holds one (M, D) matrix per scenario segment with the desired
    user's actual steering vector in column 0.
    """
    n = scenario.num_snapshots if n is None else n
    M = scenario.geometry.num_sensors
    sigma_s = np.sqrt(scenario.sigma_s2)
    sigma_n = np.sqrt(scenario.sigma_n2)
    X = np.empty((n, M), dtype=complex)
    for seg, A in zip(scenario.segments, steering):
        if seg.start > n:
            break
        stop = min(seg.stop, n)
        L = stop - seg.start + 1
        if A.shape != (M, len(seg.sources)):
            raise ValueError("steering matrix does not match segment sources")
        powers = segment_powers(scenario, seg)
        S = np.empty((L, A.shape[1]), dtype=complex)
        S[:, 0] = sigma_s * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=L))
        D = A.shape[1] - 1
        if D:
            g = rng.standard_normal((L, D)) + 1j * rng.standard_normal((L, D))
            S[:, 1:] = g * np.sqrt(powers[1:] / 2.0)
        noise = rng.standard_normal((L, M)) + 1j * rng.standard_normal((L, M))
        X[seg.start - 1:stop] = S @ A.T + noise * (sigma_n / np.sqrt(2.0))
    return X


def iter_snapshots(X: np.ndarray) -> Iterator[Snapshot]:
    for i, x in enumerate(X, start=1):
        yield Snapshot(i, x)


def truth_matrices(scenario: Scenario, seg: Segment, a1: np.ndarray):
    """Analytic ``(R_s, R_in)`` for a segment given the actual desired steering vector."""
    M = scenario.geometry.num_sensors
    R_s = scenario.sigma_s2 * np.outer(a1, a1.conj())
    R_in = scenario.sigma_n2 * np.eye(M, dtype=complex)
    for src, p in zip(seg.interferers, segment_powers(scenario, seg)[1:]):
        ai = steering_vector(scenario.geometry, src.doa_deg)
        R_in += p * np.outer(ai, ai.conj())
    return R_s, R_in


def sinr(w: np.ndarray, R_s: np.ndarray, R_in: np.ndarray) -> float:
    """Output SINR in dB."""
    w = np.asarray(w)
    if not np.any(w):
        raise ValueError("SINR undefined for zero weight vector")
    num = np.real(np.vdot(w, R_s @ w))
    den = np.real(np.vdot(w, R_in @ w))
    return float(10.0 * np.log10(num / den))


def optimal_sinr(a1: np.ndarray, sigma_s2: float, R_in: np.ndarray) -> float:
    """SINR in dB of ``w = R_in^{-1} a1``, the best any beamformer can reach."""
    sol = np.linalg.solve(R_in, a1)
    return float(10.0 * np.log10(sigma_s2 * np.real(np.vdot(a1, sol))))


def schedule(rows, M, snr_db, mismatch, n):
    segs = []
    for (start, stop), users in rows:
        sources = tuple(SourceSpec(doa, p, is_desired=(k == 0)) for k, (p, doa) in enumerate(users))
        segs.append(Segment(start, stop, sources))
    sc = Scenario(ArrayGeometry(M), tuple(segs), snr_db, 1.0, mismatch)
    return sc if n is None else sc.truncated(n)


# (power dB relative to user 1, DoA degrees); user 1 first
TABLE4 = (
    ((1, 1000), ((0, 93), (13, 120), (1, 140), (22, 67), (10, 157))),
    ((1001, 2000), ((0, 93), (30, 120), (25, 170), (4, 104), (9, 68))),
)
TABLE5 = (
    ((1, 1000), ((0, 93), (10, 120), (5, 140), (10, 150), (7, 105))),
    ((1001, 2000), ((0, 93), (30, 120), (34, 170), (6, 104), (9, 68))),
)


def table4(snr_db=0.0, M=10, mismatch=None, n=None) -> Scenario:
    return schedule(TABLE4, M, snr_db, mismatch or MismatchModel(), n)


def table5(snr_db=0.0, M=10, mismatch=None, n=None) -> Scenario:
    return schedule(TABLE5, M, snr_db, mismatch or MismatchModel(), n)


def stationary(snr_db=0.0, M=10, mismatch=None, n=2000, rows=None) -> Scenario:
    """Single-segment scenario; by default the first ``TABLE4`` segment held for ``n`` snapshots."""
    users = (rows or TABLE4)[0][1]
    return schedule((((1, n), users),), M, snr_db, mismatch or MismatchModel(), None)
