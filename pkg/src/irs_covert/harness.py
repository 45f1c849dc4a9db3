"""Monte Carlo experiment orchestration: configuration, sweeps and record emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .covertness import CovertnessBudget, epsilon_bar, kl_divergence
from .forms import build_quadratic_forms
from .no_csi import NoCsiInstance, no_csi_suite
from .psca import PscaConfig, psca_optimize, solve_relaxed
from .scenario import (Geometry, ReflectDesign, SystemParams, cascade_vectors, db_to_linear,
                       dbm_to_watts, default_params, linear_to_db, sample_channels,
                       watts_to_dbm)
from .two_stage import baseline_no_irs, two_stage_optimize

log = logging.getLogger(__name__)

ALGORITHMS = ("psca", "psca_unit_amp", "two_stage", "upper_bound", "no_irs",
              "nocsi_unit", "nocsi_common", "nocsi_per_element")
SWEEP_KINDS = ("elements", "epsilon", "irs_x")
DEFAULT_SWEEPS = {
    "elements": [25, 50, 75, 100],
    "epsilon": [0.05, 0.1, 0.15, 0.2],
    "irs_x": [70.0, 80.0, 90.0, 100.0],
}
CSV_FIELDS = ("sweep_value", "trial", "algorithm", "bob_snr_db", "p_a_dbm",
              "willie_gain_db", "kl_value", "wallclock_ms", "status")
PSCA_MAX_ELEMENTS = 50
# linear values are floored here before conversion so that dB fields stay finite
_TINY = 1e-300


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ConfigError(f"unknown sweep kind {self.kind!r}; expected one of {SWEEP_KINDS}")
        if len(self.values) == 0:
            raise ConfigError("sweep values must be non-empty")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: Geometry = field(default_factory=Geometry)
    params: SystemParams = field(default_factory=default_params)
    sweep: SweepSpec = field(default_factory=lambda: SweepSpec("elements", (25, 50)))
    trials: int = 100
    seed: int = 20210401
    algorithms: tuple = ("two_stage", "no_irs", "nocsi_unit", "nocsi_common",
                         "nocsi_per_element")
    output_path: str = ""
    allow_large: bool = False
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.sweep.kind == "elements":
            for n in self.sweep.values:
                if int(n) != n or n < 1 or int(n) % self.params.n_x:
                    raise ConfigError(f"N = {n} is not a multiple of n_x = {self.params.n_x}")
        if self.sweep.kind == "epsilon" and not all(0 < e <= 1 for e in self.sweep.values):
            raise ConfigError("epsilon sweep values must lie in (0, 1]")

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


@dataclass
class TrialRecord:
    sweep_value: float
    trial: int
    algorithm: str
    bob_snr_db: float
    p_a_dbm: float
    willie_gain_db: float
    kl_value: float
    wallclock_ms: float
    status: str

    def sort_key(self):
        return (self.sweep_value, self.trial, self.algorithm)


# ---------------------------------------------------------------- config I/O

_PARAM_UNITS = {
    "p_max_dbm": ("p_max", dbm_to_watts),
    "sigma_b2_dbm": ("sigma_b2", dbm_to_watts),
    "sigma_w2_dbm": ("sigma_w2", dbm_to_watts),
    "rician_k_db": ("rician_k", db_to_linear),
    "beta0_db": ("beta0", db_to_linear),
    "p_max_w": ("p_max", float),
    "sigma_b2_w": ("sigma_b2", float),
    "sigma_w2_w": ("sigma_w2", float),
}
_PARAM_PLAIN = ("blocklength", "epsilon", "n_x", "n_z")


def _params_from_dict(d: dict) -> SystemParams:
    kw = {}
    for key, value in d.items():
        if key in _PARAM_UNITS:
            name, conv = _PARAM_UNITS[key]
            kw[name] = float(conv(value))
        elif key in _PARAM_PLAIN:
            kw[key] = value
        else:
            raise ConfigError(f"unknown params field {key!r} (use unit-suffixed names)")
    try:
        return default_params(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _geometry_from_dict(d: dict) -> Geometry:
    kw = {}
    for key, value in d.items():
        if key in ("alice_m", "irs_m", "bob_m", "willie_m"):
            if len(value) != 3:
                raise ConfigError(f"{key} must have three coordinates")
            kw[key[:-2]] = tuple(float(x) for x in value)
        elif key == "path_loss_exponents":
            for link, alpha in value.items():
                kw[f"alpha_{link}"] = float(alpha)
        else:
            raise ConfigError(f"unknown geometry field {key!r}")
    try:
        return Geometry(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(d: dict) -> ExperimentConfig:
    known = {"geometry", "params", "sweep", "trials", "seed", "algorithms", "output_path",
             "allow_large", "workers", "record_timing"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config fields {sorted(extra)}")
    kw = {}
    if "geometry" in d:
        kw["geometry"] = _geometry_from_dict(d["geometry"])
    if "params" in d:
        kw["params"] = _params_from_dict(d["params"])
    if "sweep" in d:
        s = d["sweep"]
        try:
            kw["sweep"] = SweepSpec(s["kind"], tuple(s["values"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError("sweep needs 'kind' and a 'values' list") from exc
    for key in ("trials", "seed", "workers"):
        if key in d:
            kw[key] = int(d[key])
    if "algorithms" in d:
        kw["algorithms"] = tuple(d["algorithms"])
    for key in ("output_path",):
        if key in d:
            kw[key] = str(d[key])
    for key in ("allow_large", "record_timing"):
        if key in d:
            kw[key] = bool(d[key])
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    g, p = cfg.geometry, cfg.params
    return {
        "geometry": {
            "alice_m": list(g.alice), "irs_m": list(g.irs), "bob_m": list(g.bob),
            "willie_m": list(g.willie),
            "path_loss_exponents": {k: g.exponent(k) for k in ("ar", "ab", "aw", "rb", "rw")},
        },
        "params": {
            "p_max_dbm": float(watts_to_dbm(p.p_max)),
            "blocklength": p.blocklength,
            "sigma_b2_dbm": float(watts_to_dbm(p.sigma_b2)),
            "sigma_w2_dbm": float(watts_to_dbm(p.sigma_w2)),
            "epsilon": p.epsilon, "n_x": p.n_x, "n_z": p.n_z,
            "rician_k_db": float(linear_to_db(p.rician_k)),
            "beta0_db": float(linear_to_db(p.beta0)),
        },
        "sweep": {"kind": cfg.sweep.kind, "values": list(cfg.sweep.values)},
        "trials": cfg.trials, "seed": cfg.seed, "algorithms": list(cfg.algorithms),
        "output_path": cfg.output_path, "allow_large": cfg.allow_large,
        "workers": cfg.workers, "record_timing": cfg.record_timing,
    }


# ------------------------------------------------------------------- trials

def _db(x: float) -> float:
    return float(linear_to_db(max(x, _TINY)))


def _dbm(x: float) -> float:
    return float(watts_to_dbm(max(x, _TINY)))


def point_setup(cfg: ExperimentConfig, value) -> tuple[Geometry, SystemParams]:
    """Geometry and parameters at one sweep value."""
    g, p = cfg.geometry, cfg.params
    if cfg.sweep.kind == "elements":
        p = p.with_(n_z=int(value) // p.n_x)
    elif cfg.sweep.kind == "epsilon":
        p = p.with_(epsilon=float(value))
    else:
        g = g.with_irs_x(float(value))
    return g, p


def run_algorithms(channels, params: SystemParams, algorithms, *, allow_large: bool = False,
                   eps_bar: float | None = None) -> dict:
    """Run each algorithm on one channel draw.

    Returns {name: (design or None, status, seconds)}. A failing algorithm is
    reported through its status and never raises.
    """
    budget = CovertnessBudget.from_params(params)
    a, b = cascade_vectors(channels)
    qf = build_quadratic_forms(a, b, channels.h_ab, channels.h_aw)
    common = dict(sigma_w2=params.sigma_w2, p_max=params.p_max, sigma_b2=params.sigma_b2)
    suite = None
    out = {}
    for name in algorithms:
        t0 = time.perf_counter()
        status = "ok"
        design = None
        try:
            if name in ("psca", "psca_unit_amp"):
                if params.n_elements > PSCA_MAX_ELEMENTS and not allow_large:
                    status = "skipped"
                else:
                    res = psca_optimize(qf, budget,
                                        PscaConfig(unit_amplitude=(name == "psca_unit_amp")),
                                        **common)
                    design = res.design
                    if res.status != "converged":
                        status = res.status
            elif name == "two_stage":
                design = two_stage_optimize(qf, budget, **common)
            elif name == "upper_bound":
                if params.n_elements > PSCA_MAX_ELEMENTS and not allow_large:
                    status = "skipped"
                else:
                    design = _upper_bound_design(qf, budget, params)
            elif name == "no_irs":
                design = baseline_no_irs(channels.h_ab, channels.h_aw, budget,
                                         params.sigma_w2, params.sigma_b2, params.p_max)
            else:
                if suite is None:
                    inst = NoCsiInstance.from_channels(channels, params, eps_bar)
                    suite = no_csi_suite(inst, params.blocklength)
                design = suite[name[len("nocsi_"):]]
        except Exception as exc:  # recorded, never propagated
            log.warning("%s failed: %s: %s", name, type(exc).__name__, exc)
            status = "failed"
            design = None
        out[name] = (design, status, time.perf_counter() - t0)
    return out


def _upper_bound_design(qf, budget, params) -> ReflectDesign:
    """Relaxation bound as a record: SNR bound, SDP power, and the gain Tr(AW)/p_a."""
    W, p_a = solve_relaxed(qf, budget, sigma_w2=params.sigma_w2, p_max=params.p_max)
    gain = max(float(np.real(np.sum(qf.A * W.T))), 0.0) / p_a if p_a > 0 else 0.0
    snr = float(np.real(np.sum(qf.B * W.T))) / params.sigma_b2
    return ReflectDesign(p_a=p_a, rho=np.zeros(0), theta=np.zeros(0),
                         bob_snr=snr, willie_gain=gain,
                         kl_value=kl_divergence(p_a, gain, params.sigma_w2, budget.blocklength))


def _trial_task(args):
    cfg, sweep_idx, trial = args
    value = cfg.sweep.values[sweep_idx]
    g, p = point_setup(cfg, value)
    eps_bar = epsilon_bar(CovertnessBudget.from_params(p)) if any(
        a.startswith("nocsi") for a in cfg.algorithms) else None
    channels = sample_channels(g, p, (cfg.seed, sweep_idx, trial))
    results = run_algorithms(channels, p, cfg.algorithms, allow_large=cfg.allow_large,
                             eps_bar=eps_bar)
    records = []
    for name, (design, status, secs) in results.items():
        ms = round(secs * 1e3, 3) if cfg.record_timing else 0.0
        if design is None:
            nan = float("nan")
            records.append(TrialRecord(float(value), trial, name, nan, nan, nan, nan, ms, status))
            continue
        records.append(TrialRecord(
            sweep_value=float(value), trial=trial, algorithm=name,
            bob_snr_db=_db(design.bob_snr), p_a_dbm=_dbm(design.p_a),
            willie_gain_db=_db(design.willie_gain), kl_value=float(design.kl_value),
            wallclock_ms=ms, status=status))
    return records


def run_sweep(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All (sweep value, trial) pairs, every selected algorithm on the same channel draw.

    Trial t at sweep index i uses the stream (seed, i, t), so results do not
    depend on the worker count. Records are sorted by (sweep_value, trial, algorithm).
    """
    tasks = [(cfg, i, t) for i in range(len(cfg.sweep.values)) for t in range(cfg.trials)]
    if cfg.workers == 1:
        batches = map(_trial_task, tasks)
        records = [r for batch in batches for r in batch]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = [r for batch in pool.map(_trial_task, tasks, chunksize=4) for r in batch]
    records.sort(key=TrialRecord.sort_key)
    return records


def run_location_sweep(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Sweep of the IRS x-coordinate; y and z stay as in the configured geometry."""
    if cfg.sweep.kind != "irs_x":
        raise ConfigError("location sweep needs sweep kind 'irs_x'")
    return run_sweep(cfg)


@dataclass
class Aggregate:
    sweep_value: float
    algorithm: str
    mean_bob_snr_db: float
    mean_p_a_dbm: float
    ok_fraction: float
    count: int


def aggregate(records) -> list[Aggregate]:
    """Means over status = ok records, in the linear domain, reported in dB."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.algorithm), []).append(r)
    out = []
    for (value, alg), rs in sorted(groups.items()):
        ok = [r for r in rs if r.status == "ok"]
        if ok:
            snr = float(np.mean([10 ** (r.bob_snr_db / 10) for r in ok]))
            pw = float(np.mean([10 ** ((r.p_a_dbm - 30) / 10) for r in ok]))
            out.append(Aggregate(value, alg, _db(snr), _dbm(pw), len(ok) / len(rs), len(rs)))
        else:
            out.append(Aggregate(value, alg, math.nan, math.nan, 0.0, len(rs)))
    return out


# ------------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".9g")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in CSV_FIELDS])
    return buf.getvalue()


def records_to_json(records) -> str:
    rows = [{f: getattr(r, f) for f in CSV_FIELDS} for r in records]
    return json.dumps(rows, indent=1) + "\n"


def records_from_json(text: str) -> list[TrialRecord]:
    return [TrialRecord(**row) for row in json.loads(text)]


def emit(records, fmt: str, path=None) -> str:
    """Write records as csv or json to ``path`` (UTF-8, LF); returns the text."""
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write records to {path}: {exc}") from exc
    return text

