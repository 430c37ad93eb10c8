"""Experiment configuration as flat ``section.key = value`` text.

Example::

    # comment
    experiment.kind = sinr-vs-snapshots
    scenario.id = table5
    scenario.mismatch = coherent-scattering
    run.algorithms = rccm-mcg, rcmv-mcg, loaded-smi, optimal
    run.trials = 50
    wc.epsilon = 2.1
    rccm.mu_lambda = 100

Unknown keys are rejected. ``serialize`` writes every key so that
``parse(serialize(c)) == c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from ..array import MismatchModel, TABLE4, TABLE5
from ..mcg import CCM_DEFAULTS, CMV_DEFAULTS, McgParams, epsilon_tilde_bound
from ..worstcase import WcParams

KINDS = ("sinr-vs-snapshots", "sinr-vs-snr", "sinr-vs-epsilon", "gamma-sweep")
SCENARIOS = ("table4", "table5", "custom")
ALGORITHMS = ("wc-ccm", "wc-cmv", "rcmv-mcg", "rccm-mcg", "loaded-smi", "optimal")
MISMATCH_KINDS = ("none", "coherent-scattering")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# rows as in ``array.TABLE4``: ((start, stop), ((power_db, doa), ...)) with user 1 first
Rows = tuple


@dataclass(frozen=True)
class ScenarioConfig:
    id: str = "table4"
    num_sensors: int = 10
    snr_db: float = 0.0
    snapshots: int = 2000
    mismatch: str = "none"
    num_paths: int = 4
    angle_std_deg: float = 2.0
    angle_dist: str = "uniform"
    segments: Rows = ()  # only for id = custom

    def rows(self) -> Rows:
        return {"table4": TABLE4, "table5": TABLE5}.get(self.id, self.segments)

    def mismatch_model(self) -> MismatchModel:
        return MismatchModel(self.mismatch, self.num_paths, self.angle_std_deg, self.angle_dist)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "sinr-vs-snapshots"
    name: str = ""
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    algorithms: tuple[str, ...] = ("wc-ccm", "wc-cmv", "loaded-smi", "optimal")
    trials: int = 50
    seed: int = 1
    eval_every: int = 25
    eval_at: int = 200  # snapshot index for sweep experiments
    sweep: tuple[float, ...] = ()
    loading: float = 10.0  # loaded-SMI diagonal loading in units of sigma_n2
    wc: WcParams = field(default_factory=WcParams)
    rcmv: McgParams = CMV_DEFAULTS
    rccm: McgParams = CCM_DEFAULTS

    @property
    def label(self) -> str:
        return self.name or self.kind


# ---------------------------------------------------------------- values

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _fmt_rows(rows: Rows) -> str:
    segs = []
    for (start, stop), users in rows:
        segs.append(f"{start}-{stop}: " + ", ".join(f"{_fmt(float(p))}@{_fmt(float(d))}" for p, d in users))
    return "; ".join(segs)


def _parse_rows(text: str) -> Rows:
    """``1-1000: 0@93, 13@120; 1001-2000: ...`` (power dB @ DoA, desired user first)."""
    out = []
    for part in filter(None, (s.strip() for s in text.split(";"))):
        span, _, users = part.partition(":")
        start, _, stop = span.partition("-")
        us = []
        for u in filter(None, (s.strip() for s in users.split(","))):
            p, _, d = u.partition("@")
            us.append((float(p), float(d)))
        out.append(((int(start), int(stop)), tuple(us)))
    return tuple(out)


def _to_bool(s: str) -> bool:
    s = s.lower()
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _convert(text: str, like):
    if isinstance(like, bool):
        return _to_bool(text)
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def _param_keys(obj) -> dict:
    # noise power comes from the scenario, not the config
    return {f.name: getattr(obj, f.name) for f in fields(obj) if f.name != "sigma_n2"}


# ------------------------------------------------------------ parse/dump

_TOP = {"experiment.kind": "kind", "experiment.name": "name",
        "run.trials": "trials", "run.seed": "seed", "run.eval_every": "eval_every",
        "run.eval_at": "eval_at", "loaded_smi.loading": "loading"}


def serialize(cfg: ExperimentConfig) -> str:
    lines = [f"experiment.kind = {cfg.kind}", f"experiment.name = {cfg.name}"]
    sc = cfg.scenario
    for f in fields(sc):
        v = getattr(sc, f.name)
        if f.name == "segments":
            if sc.id == "custom":
                lines.append(f"scenario.segments = {_fmt_rows(v)}")
            continue
        lines.append(f"scenario.{f.name} = {_fmt(v)}")
    lines += [f"run.algorithms = {', '.join(cfg.algorithms)}",
              f"run.trials = {cfg.trials}", f"run.seed = {cfg.seed}",
              f"run.eval_every = {cfg.eval_every}", f"run.eval_at = {cfg.eval_at}",
              f"run.sweep = {_fmt(tuple(float(x) for x in cfg.sweep))}",
              f"loaded_smi.loading = {_fmt(float(cfg.loading))}"]
    for sec in ("wc", "rcmv", "rccm"):
        for k, v in _param_keys(getattr(cfg, sec)).items():
            lines.append(f"{sec}.{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> ExperimentConfig:
    """Parse config text; raises ``ConfigError`` on any problem."""
    cfg = ExperimentConfig()
    top, scen, params = {}, {}, {"wc": {}, "rcmv": {}, "rccm": {}}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {n}: expected 'key = value'")
        try:
            if key in _TOP:
                attr = _TOP[key]
                top[attr] = _convert(value, getattr(cfg, attr))
            elif key == "run.algorithms":
                top["algorithms"] = tuple(s.strip() for s in value.split(",") if s.strip())
            elif key == "run.sweep":
                top["sweep"] = tuple(float(s) for s in value.split(",") if s.strip())
            elif key.startswith("scenario."):
                k = key[len("scenario."):]
                if k == "segments":
                    scen[k] = _parse_rows(value)
                elif k in {f.name for f in fields(ScenarioConfig)}:
                    scen[k] = _convert(value, getattr(cfg.scenario, k))
                else:
                    raise KeyError(key)
            elif key.partition(".")[0] in params:
                sec, _, k = key.partition(".")
                known = _param_keys(getattr(cfg, sec))
                if k not in known:
                    raise KeyError(key)
                params[sec][k] = _convert(value, known[k])
            else:
                raise KeyError(key)
        except KeyError:
            raise ConfigError(f"line {n}: unknown key {key!r}") from None
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {key}: {exc}") from None
    try:
        cfg = replace(cfg, scenario=replace(cfg.scenario, **scen), **top,
                      wc=replace(cfg.wc, **params["wc"]),
                      rcmv=replace(cfg.rcmv, **params["rcmv"]),
                      rccm=replace(cfg.rccm, **params["rccm"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    validate(cfg)
    return cfg


def load(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return parse(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


# ------------------------------------------------------------ validation

def _sweep_params(cfg: ExperimentConfig, x: float):
    """Algorithm parameters at one sweep point."""
    wc, rcmv, rccm = cfg.wc, cfg.rcmv, cfg.rccm
    if cfg.kind == "sinr-vs-epsilon":
        wc, rcmv, rccm = (replace(wc, epsilon=x), replace(rcmv, epsilon_tilde=x),
                          replace(rccm, epsilon_tilde=x))
    elif cfg.kind == "gamma-sweep":
        wc, rccm = replace(wc, gamma=x), replace(rccm, gamma=x)
    return wc, rcmv, rccm


def validate(cfg: ExperimentConfig) -> None:
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    sc = cfg.scenario
    need(cfg.kind in KINDS, f"experiment.kind must be one of {', '.join(KINDS)}")
    need(sc.id in SCENARIOS, f"scenario.id must be one of {', '.join(SCENARIOS)}")
    need(sc.mismatch in MISMATCH_KINDS, f"scenario.mismatch must be one of {', '.join(MISMATCH_KINDS)}")
    try:
        sc.mismatch_model()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    need(sc.num_sensors >= 2, "scenario.num_sensors must be at least 2")
    need(math.isfinite(sc.snr_db), "scenario.snr_db must be finite")
    if sc.id == "custom":
        need(bool(sc.segments), "custom scenario needs scenario.segments")
    else:
        need(not sc.segments, "scenario.segments is only allowed with scenario.id = custom")
    rows = sc.rows()
    length = rows[-1][0][1] if rows else 0
    need(1 <= sc.snapshots <= length, f"scenario.snapshots must lie in 1..{length}")
    need(cfg.algorithms and len(set(cfg.algorithms)) == len(cfg.algorithms), "run.algorithms must be a nonempty list without repeats")
    bad = [a for a in cfg.algorithms if a not in ALGORITHMS]
    need(not bad, f"unknown algorithm(s) {bad}; choose from {', '.join(ALGORITHMS)}")
    need(cfg.trials >= 1, "run.trials must be positive")
    need(cfg.seed >= 0, "run.seed must be nonnegative")
    need(cfg.eval_every >= 1, "run.eval_every must be positive")
    need(cfg.loading > 0, "loaded_smi.loading must be positive")
    if cfg.kind == "sinr-vs-snapshots":
        need(not cfg.sweep, "run.sweep is not used by sinr-vs-snapshots")
    else:
        need(bool(cfg.sweep), f"{cfg.kind} needs run.sweep values")
        need(1 <= cfg.eval_at <= sc.snapshots, "run.eval_at must lie within the scenario length")
        need(all(math.isfinite(x) for x in cfg.sweep), "run.sweep values must be finite")
    M = sc.num_sensors
    points = cfg.sweep if cfg.kind in ("sinr-vs-epsilon", "gamma-sweep") else (None,)
    for x in points:
        try:
            wc, rcmv, rccm = _sweep_params(cfg, x) if x is not None else (cfg.wc, cfg.rcmv, cfg.rccm)
        except ValueError as exc:
            raise ConfigError(f"sweep value {x}: {exc}") from None
        if {"wc-ccm", "wc-cmv"} & set(cfg.algorithms):
            need(wc.epsilon < math.sqrt(M), f"epsilon={wc.epsilon} must be below sqrt(M) = {math.sqrt(M):.4g}")
        for name, p in (("rcmv-mcg", rcmv), ("rccm-mcg", rccm)):
            if name in cfg.algorithms:
                need(p.epsilon_tilde <= epsilon_tilde_bound(M),
                     f"{name}: epsilon_tilde={p.epsilon_tilde} exceeds M/2 = {epsilon_tilde_bound(M)}")
