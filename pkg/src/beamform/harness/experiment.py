"""Monte-Carlo experiment runner.

Each trial draws one steering-vector realization and one snapshot stream
from ``numpy.random.default_rng(seed ^ trial)``, runs every requested
algorithm on that stream and scores the weights against the analytic
covariances of the segment active at each evaluation index. Sweep
experiments redraw from the same trial seed at every sweep point, so the
points share their random numbers.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .. import array as ar
from .. import mcg
from .. import worstcase as wc
from .config import ExperimentConfig, _sweep_params, validate

log = logging.getLogger(__name__)


class ResultRow(NamedTuple):
    experiment: str
    algorithm: str
    x_value: float
    sinr_db_mean: float
    sinr_db_std: float
    trials: int


@dataclass(frozen=True)
class Aborted:
    trial: int
    algorithm: str
    reason: str


@dataclass(frozen=True)
class ExperimentResult:
    rows: list
    aborted: list  # trials dropped from every row because an algorithm gave up

    @property
    def completed(self) -> int:
        return self.rows[0].trials if self.rows else 0


def loaded_smi(batch, a, sigma_n2: float, loading: float = 10.0) -> np.ndarray:
    """``(R + loading * sigma_n2 I)^{-1} a`` with ``R`` the sample covariance of the rows of ``batch``."""
    X = np.atleast_2d(np.asarray(batch, dtype=complex))
    if X.shape[0] == 0:
        raise ValueError("loaded SMI needs at least one snapshot")
    R = X.T @ X.conj() / X.shape[0]
    return np.linalg.solve(R + loading * sigma_n2 * np.eye(R.shape[0]), np.asarray(a, dtype=complex))


def _running_smi(X, a, sigma_n2, loading, eval_at):
    """Loaded SMI over the first ``i`` rows for each ``i`` in ``eval_at``."""
    out, acc, i = {}, np.zeros((X.shape[1], X.shape[1]), dtype=complex), 0
    for t in sorted(eval_at):
        acc += X[i:t].T @ X[i:t].conj()
        i = t
        out[t] = np.linalg.solve(acc / t + loading * sigma_n2 * np.eye(X.shape[1]), a)
    return out


def build_scenario(cfg: ExperimentConfig, snr_db: float | None = None, n: int | None = None) -> ar.Scenario:
    sc = cfg.scenario
    snr = sc.snr_db if snr_db is None else snr_db
    scen = ar.schedule(sc.rows(), sc.num_sensors, snr, sc.mismatch_model(), None)
    return scen.truncated(n or sc.snapshots)


def _eval_points(cfg: ExperimentConfig):
    if cfg.kind == "sinr-vs-snapshots":
        pts = list(range(cfg.eval_every, cfg.scenario.snapshots + 1, cfg.eval_every))
        return pts or [cfg.scenario.snapshots]
    return [cfg.eval_at]


def _weights(alg, X, a, scen, eval_at, wcp, rcmv, rccm, loading):
    if alg == "wc-ccm":
        return wc.run_wc_ccm(X, a, wcp, eval_at)
    if alg == "wc-cmv":
        return wc.run_wc_cmv(X, a, wcp, eval_at)
    if alg == "rcmv-mcg":
        return mcg.run_rcmv_mcg(X, a, rcmv, eval_at).weights
    if alg == "rccm-mcg":
        return mcg.run_rccm_mcg(X, a, rccm, eval_at).weights
    if alg == "loaded-smi":
        return _running_smi(X, a, scen.sigma_n2, loading, eval_at)
    raise ValueError(alg)


def run_trial(cfg: ExperimentConfig, trial: int):
    """SINR samples ``{(algorithm, x): sinr_db}`` for one trial, or an ``Aborted`` record."""
    xs = cfg.sweep if cfg.kind != "sinr-vs-snapshots" else (None,)
    eval_at = _eval_points(cfg)
    n = max(eval_at)
    out = {}
    for x in xs:
        rng = np.random.default_rng(cfg.seed ^ trial)
        scen = build_scenario(cfg, snr_db=x if cfg.kind == "sinr-vs-snr" else None, n=n)
        a = ar.steering_vector(scen.geometry, scen.desired_doa)
        a1 = ar.realize_mismatch(scen.mismatch, scen.geometry, scen.desired_doa, rng)
        X = ar.generate_snapshots(scen, ar.segment_steering(scen, a1), rng)
        wcp, rcmv, rccm = _sweep_params(cfg, x)
        wcp = replace(wcp, sigma_n2=scen.sigma_n2)
        truth = {}
        for i in eval_at:
            seg = scen.segment_at(i)
            if seg.start not in truth:
                truth[seg.start] = ar.truth_matrices(scen, seg, a1)
        for alg in cfg.algorithms:
            if alg == "optimal":
                W = None
            else:
                try:
                    W = _weights(alg, X, a, scen, eval_at, wcp, rcmv, rccm, cfg.loading)
                except (wc.SolverAbort, FloatingPointError) as exc:
                    return Aborted(trial, alg, str(exc))
            for i in eval_at:
                R_s, R_in = truth[scen.segment_at(i).start]
                key = (alg, float(i) if x is None else float(x))
                if W is None:
                    out[key] = ar.optimal_sinr(a1, scen.sigma_s2, R_in)
                else:
                    out[key] = ar.sinr(W[i], R_s, R_in)
    return out


def _aggregate(cfg, samples):
    rows = []
    keys = sorted({k for s in samples for k in s})
    for alg, x in keys:
        v = np.array([s[(alg, x)] for s in samples])
        std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        rows.append(ResultRow(cfg.label, alg, x, float(np.mean(v)), std, int(v.size)))
    return rows


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run all trials and average per (algorithm, x).

    Trials whose run aborts (too many failed cone solves, or a diverging
    multiplier) are dropped from every row and listed in ``aborted``.
    ``jobs > 1`` spreads trials over worker processes; results do not
    depend on it.
    """
    validate(cfg)
    trials = range(cfg.trials)
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run_trial, [cfg] * cfg.trials, trials))
    else:
        results = [run_trial(cfg, t) for t in trials]
    aborted = [r for r in results if isinstance(r, Aborted)]
    for r in aborted:
        log.warning("trial %d dropped: %s aborted (%s)", r.trial, r.algorithm, r.reason)
    samples = [r for r in results if not isinstance(r, Aborted)]
    return ExperimentResult(_aggregate(cfg, samples), aborted)
