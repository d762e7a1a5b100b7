"""Truncation sweeps over ``n`` with CSV and JSON output.

A sweep config is a TOML file::

    [model]
    name = "gm1"                      # or "jackson"
    z = [0]
    [model.params]                    # GM1Params / JacksonParams fields
    b = 1.5
    mu = 2.0
    [model.core]                      # gm1: k_max; jackson: k_coeffs, k_bound
    k_max = 9
    [model.lyapunov]                  # coefficients plus analytic_certificate
    v_coef = 2.0
    [sweep]
    n_min = 15
    n_max = 80
    n_step = 1
    ring_depth = 2
    thresholds = [1e-2, 1e-4]
    [output]
    dir = "results"
    stem = "gm1"
    record_timing = false
    [run]
    threads = 1
    self_check = true
    containment_tol = 1e-9

Every key is optional except ``model.name``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python 3.10
    import tomli

from .errors import ConfigurationError, HypothesisError, HypothesisFailure, ModelError, SolverError
from .gradient_interval import GradientEnclosure, dtmc_enclosure, relative_metrics
from .jump_embed import ctmc_alpha_prime_interval
from .models.gm1 import GM1Chain, GM1Params, gm1_analytic
from .models.jackson import JacksonParams, JacksonRates, jackson_analytic

CSV_HEADER = (
    "n,states,alpha_lo,alpha_hi,dalpha_lo,dalpha_hi,lower_rel,upper_rel,"
    "gap_rel,contraction,hypothesis_ok,wall_time_ms"
)
MODELS = ("gm1", "jackson")

_SECTIONS = {
    "model": {"name", "z", "params", "core", "lyapunov"},
    "sweep": {"n_min", "n_max", "n_step", "ring_depth", "thresholds"},
    "output": {"dir", "stem", "record_timing"},
    "run": {"threads", "self_check", "containment_tol"},
}
_CORE_KEYS = {"gm1": {"k_max"}, "jackson": {"k_coeffs", "k_bound"}}
_LYAP_KEYS = {
    "gm1": {"v_coef", "v_pow", "vt_coef", "vt_pow", "nut_coef", "nut_pow", "analytic_certificate"},
    "jackson": {"v_coeffs", "vt_coeffs", "nut_coeffs", "analytic_certificate"},
}
_DEFAULTS = {
    "gm1": {"n_min": 15, "n_max": 100},
    "jackson": {"n_min": 19, "n_max": 60},
}


@dataclass
class SweepConfig:
    model: str
    z: tuple[int, ...] | None = None
    params: dict[str, Any] = field(default_factory=dict)
    core: dict[str, Any] = field(default_factory=dict)
    lyapunov: dict[str, Any] = field(default_factory=dict)
    n_min: int = 15
    n_max: int = 80
    n_step: int = 1
    ring_depth: int = 2
    thresholds: tuple[float, ...] = (1e-1, 1e-2, 1e-4, 1e-6)
    out_dir: str = "results"
    stem: str | None = None
    record_timing: bool = False
    threads: int = 1
    self_check: bool = True
    containment_tol: float = 1e-9

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"model.name: unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("n_min", "n_max", "n_step", "ring_depth", "threads"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigurationError(f"{name}: expected an integer, got {val!r}")
        if self.n_step < 1:
            raise ConfigurationError("sweep.n_step: must be at least 1")
        if self.n_min < 1:
            raise ConfigurationError("sweep.n_min: must be at least 1")
        if self.ring_depth < 0:
            raise ConfigurationError("sweep.ring_depth: must be non-negative")
        if self.threads < 1:
            raise ConfigurationError("run.threads: must be at least 1")
        try:
            self.thresholds = tuple(sorted({float(t) for t in self.thresholds}, reverse=True))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"sweep.thresholds: {exc}") from exc
        if any(t <= 0 for t in self.thresholds):
            raise ConfigurationError("sweep.thresholds: thresholds must be positive")
        if not self.containment_tol >= 0:
            raise ConfigurationError("run.containment_tol: must be non-negative")
        bad = set(self.core) - _CORE_KEYS[self.model]
        if bad:
            raise ConfigurationError(f"model.core: unknown keys {sorted(bad)} for {self.model}")
        bad = set(self.lyapunov) - _LYAP_KEYS[self.model]
        if bad:
            raise ConfigurationError(f"model.lyapunov: unknown keys {sorted(bad)} for {self.model}")
        if self.stem is None:
            self.stem = self.model

    @property
    def ns(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1, self.n_step))

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["thresholds"] = list(self.thresholds)
        if self.z is not None:
            d["z"] = list(self.z)
        return d


def load_config(path: str | Path, overrides: dict | None = None) -> SweepConfig:
    """Parse a TOML sweep config; ``overrides`` replace flat fields afterwards."""
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"{path}: file not found") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return config_from_dict(raw, overrides, source=str(path))


def config_from_dict(raw: dict, overrides: dict | None = None, source: str = "<config>") -> SweepConfig:
    for section, value in raw.items():
        if section not in _SECTIONS:
            raise ConfigurationError(f"{source}: unknown section [{section}]")
        if not isinstance(value, dict):
            raise ConfigurationError(f"{source}: [{section}] must be a table")
        bad = set(value) - _SECTIONS[section]
        if bad:
            raise ConfigurationError(f"{source}: unknown keys {sorted(bad)} in [{section}]")
    model = raw.get("model", {})
    sweep = raw.get("sweep", {})
    output = raw.get("output", {})
    run = raw.get("run", {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    name = overrides.pop("model", model.get("name"))
    if name is None:
        raise ConfigurationError(f"{source}: model.name is required")
    defaults = _DEFAULTS.get(name, {})
    kwargs: dict[str, Any] = dict(
        model=name,
        z=tuple(model["z"]) if "z" in model else None,
        params=dict(model.get("params", {})),
        core=dict(model.get("core", {})),
        lyapunov=dict(model.get("lyapunov", {})),
        n_min=sweep.get("n_min", defaults.get("n_min", 15)),
        n_max=sweep.get("n_max", defaults.get("n_max", 80)),
        n_step=sweep.get("n_step", 1),
        ring_depth=sweep.get("ring_depth", 2),
        thresholds=tuple(sweep.get("thresholds", (1e-1, 1e-2, 1e-4, 1e-6))),
        out_dir=output.get("dir", "results"),
        stem=output.get("stem"),
        record_timing=output.get("record_timing", False),
        threads=run.get("threads", 1),
        self_check=run.get("self_check", True),
        containment_tol=run.get("containment_tol", 1e-9),
    )
    kwargs.update(overrides)
    try:
        return SweepConfig(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc


@dataclass(frozen=True)
class ModelSetup:
    pipeline: str
    chain: Any
    reference: dict[str, float] | None
    identity: dict


def build_model(cfg: SweepConfig) -> ModelSetup:
    try:
        if cfg.model == "gm1":
            params = GM1Params(**cfg.params)
            kw = dict(cfg.lyapunov)
            kw.update(cfg.core)
            if cfg.z is not None:
                if len(cfg.z) != 1:
                    raise ConfigurationError("model.z: G/M/1 states are one-dimensional")
                kw["z"] = cfg.z[0]
            chain = GM1Chain(params, **kw)
            ref = gm1_analytic(params)
            return ModelSetup(
                "dtmc", chain, {"alpha": ref.alpha, "alpha_prime": ref.alpha_prime},
                {"name": "gm1", "parameter": "mu", "theta0": params.mu, **dataclasses.asdict(params)},
            )
        params = JacksonParams(**cfg.params)
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.lyapunov.items()}
        kw.update({k: tuple(v) if isinstance(v, list) else v for k, v in cfg.core.items()})
        if cfg.z is not None:
            if len(cfg.z) != 2:
                raise ConfigurationError("model.z: Jackson states are two-dimensional")
            kw["z"] = tuple(cfg.z)
        model = JacksonRates(params, **kw)
        ref = jackson_analytic(params)
        return ModelSetup(
            "ctmc", model, {"alpha": ref.alpha, "alpha_prime": ref.alpha_prime},
            {"name": "jackson", "parameter": "R12", **dataclasses.asdict(params)},
        )
    except TypeError as exc:
        raise ConfigurationError(f"model: {exc}") from exc


@dataclass
class SweepRecord:
    n: int
    states: int | None
    alpha_lo: float | None = None
    alpha_hi: float | None = None
    dalpha_lo: float | None = None
    dalpha_hi: float | None = None
    lower_rel: float | None = None
    upper_rel: float | None = None
    gap_rel: float | None = None
    contraction: float | None = None
    hypothesis_ok: bool = False
    wall_time_ms: float | None = None
    error: str | None = None

    def contains(self, reference: dict[str, float], tol: float) -> bool:
        if not self.hypothesis_ok:
            return True
        a, da = reference["alpha"], reference["alpha_prime"]
        return (self.alpha_lo - tol <= a <= self.alpha_hi + tol
                and self.dalpha_lo - tol <= da <= self.dalpha_hi + tol)


def run_one(setup: ModelSetup, n: int, ring_depth: int, record_timing: bool) -> SweepRecord:
    t0 = time.perf_counter()
    states = None
    try:
        states = setup.chain.partition(n).size
        if setup.pipeline == "dtmc":
            enc: GradientEnclosure = dtmc_enclosure(setup.chain, n, ring_depth=ring_depth)
        else:
            enc = ctmc_alpha_prime_interval(setup.chain, n, ring_depth=ring_depth)
    except (HypothesisError, ConfigurationError, ModelError, SolverError) as exc:
        rec = SweepRecord(n, states, hypothesis_ok=False, error=f"{type(exc).__name__}: {exc}")
        if isinstance(exc, HypothesisFailure):
            rec.contraction = exc.contraction
    else:
        rec = SweepRecord(
            n, states, enc.alpha_lo, enc.alpha_hi, enc.dalpha_lo, enc.dalpha_hi,
            contraction=enc.contraction, hypothesis_ok=True,
        )
        if setup.reference is not None:
            rec.lower_rel, rec.upper_rel, rec.gap_rel = relative_metrics(enc, setup.reference["alpha_prime"])
    if record_timing:
        rec.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return rec


def summarize(cfg: SweepConfig, setup: ModelSetup, records: list[SweepRecord]) -> dict:
    ok_rows = [r for r in records if r.hypothesis_ok]
    first_below = {}
    for t in cfg.thresholds:
        hit = next((r.n for r in ok_rows if r.gap_rel is not None and r.gap_rel <= t), None)
        first_below[_fmt(t)] = hit
    gaps = [r.gap_rel for r in ok_rows if r.gap_rel is not None]
    monotone = all(b <= a + 1e-10 * max(1.0, abs(a)) for a, b in zip(gaps, gaps[1:]))
    summary = {
        "config": cfg.echo(),
        "model": setup.identity,
        "reference": setup.reference,
        "rows": len(records),
        "hypothesis_ok_rows": len(ok_rows),
        "first_n_gap_rel_below": first_below,
        "gap_rel_non_increasing": monotone,
        "failed_rows": {str(r.n): r.error for r in records if not r.hypothesis_ok},
    }
    if cfg.self_check and setup.reference is not None:
        bad = [r.n for r in records if not r.contains(setup.reference, cfg.containment_tol)]
        summary["containment"] = {"tolerance": cfg.containment_tol, "ok": not bad, "failures": bad}
    return summary


def run_sweep(cfg: SweepConfig) -> tuple[list[SweepRecord], dict]:
    """One record per ``n`` in ascending order plus the summary dict."""
    setup = build_model(cfg)
    ns = cfg.ns

    def job(n):
        return run_one(setup, n, cfg.ring_depth, cfg.record_timing)

    if cfg.threads > 1 and len(ns) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(job, ns))
    else:
        records = [job(n) for n in ns]
    return records, summarize(cfg, setup, records)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def records_to_csv(records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = CSV_HEADER.split(",")
    writer.writerow(cols)
    for r in records:
        d = dataclasses.asdict(r)
        d["states"] = r.states
        writer.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def _json_ready(obj):
    if isinstance(obj, float):
        return float(_fmt(obj)) if math.isfinite(obj) else _fmt(obj)
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    return obj


def emit(records: list[SweepRecord], summary: dict, out_dir: str | Path, stem: str) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>_summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        json_path = out / f"{stem}_summary.json"
        csv_path.write_text(records_to_csv(records))
        json_path.write_text(json.dumps(_json_ready(summary), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ConfigurationError(f"cannot write results to {out}: {exc}") from exc
    return csv_path, json_path
