"""Disorder sampling, experiment drivers and table output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Constant, Pulse, SqrtScaled, SystemConfig
from .engine import HorizonPolicy
from .errors import InvalidConfigError

log = logging.getLogger(__name__)

CSV_COLUMNS = ("figure", "key", "N", "seed", "metric", "value", "std", "stderr", "count", "error")


# ---------------------------------------------------------------- disorder


@dataclass(frozen=True)
class Uniform:
    """Uniform on ``[-half_width, half_width]``."""

    half_width: float

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width >= 0):
            raise InvalidConfigError("half_width must be finite and non-negative")


@dataclass(frozen=True)
class Lorentzian:
    """Cauchy distribution with half-width ``delta0``."""

    delta0: float

    def __post_init__(self):
        if not (math.isfinite(self.delta0) and self.delta0 >= 0):
            raise InvalidConfigError("delta0 must be finite and non-negative")


@dataclass(frozen=True)
class DiscreteBins:
    frequencies: tuple
    probabilities: tuple

    def __post_init__(self):
        f = tuple(float(x) for x in self.frequencies)
        p = tuple(float(x) for x in self.probabilities)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "probabilities", p)
        if not f or len(f) != len(p):
            raise InvalidConfigError("frequencies and probabilities must have equal, non-zero length")
        if any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-12:
            raise InvalidConfigError("probabilities must be non-negative and sum to 1")
        if not all(math.isfinite(x) for x in f):
            raise InvalidConfigError("bin frequencies must be finite")


@dataclass(frozen=True)
class DisorderSpec:
    distribution: Uniform | Lorentzian | DiscreteBins
    seed: int = 0


def ensemble_rng(seed, stream):
    """Independent Philox stream for ensemble member ``stream`` of master ``seed``."""
    if seed < 0 or stream < 0:
        raise InvalidConfigError("seeds must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def sample_frequencies(spec, n, stream=0, rng=None):
    """``n`` i.i.d. emitter frequencies; deterministic in ``(spec.seed, stream)``."""
    if n < 1:
        raise InvalidConfigError("need at least one emitter")
    rng = ensemble_rng(spec.seed, stream) if rng is None else rng
    d = spec.distribution
    if isinstance(d, Uniform):
        u = rng.random(n)
        return d.half_width * (2.0 * u - 1.0)
    if isinstance(d, Lorentzian):
        u = rng.random(n)
        return d.delta0 * np.tan(np.pi * (u - 0.5))
    if isinstance(d, DiscreteBins):
        idx = rng.choice(len(d.frequencies), size=n, p=d.probabilities)
        return np.asarray(d.frequencies)[idx]
    raise InvalidConfigError(f"unknown distribution {d!r}")


def bins_with_std(n_bins, std):
    """Equiprobable, equally spaced bins centred on 0 with the given standard deviation."""
    if n_bins < 1:
        raise InvalidConfigError("need at least one bin")
    pos = np.arange(n_bins) - (n_bins - 1) / 2
    scale = std / math.sqrt(np.mean(pos ** 2)) if n_bins > 1 else 0.0
    return DiscreteBins(tuple((scale * pos).tolist()), (1.0 / n_bins,) * n_bins)


# ---------------------------------------------------------------- specs


COMMON = dict(
    kappa=1.0, coupling="sqrt", G=1.0, g=1.0, gamma=0.0, width=10.0,
    T=10.0, segments=100, max_iters=200, method="adam", learning_rate=0.5,
    init_scale=0.0, max_time=200.0, residual_cutoff=1e-8, tol=1e-9, bins=0,
)

FIGURES = {
    "fig1b": dict(n_list=(10, 25, 50, 100), params=dict(coupling="constant", g=1.0, gamma=2.0)),
    "fig1c": dict(n_list=(10, 25, 50, 100), params=dict(coupling="sqrt", G=1.0)),
    "fig2": dict(n_list=(10, 50), params=dict(coupling="sqrt", G=1.0, gamma=0.5)),
    "fig3c": dict(n_list=(0,), params=dict(G_list=[1 / 3, 1.0, 3.0],
                                           delta_list=[0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
                                           max_iters=300, init_scale=1.0)),
    "fig4a": dict(n_list=(2, 4, 6, 8), params=dict(gamma=0.5, init_scale=1.0)),
    "fig4b": dict(n_list=(4, 8, 12, 16), params=dict(gamma=0.5, bins=2, init_scale=1.0)),
    "fig4c": dict(n_list=(4, 8), params=dict(gamma=0.5, bins=4, init_scale=1.0)),
}


@dataclass
class ExperimentSpec:
    figure: str
    n_list: list = None
    ensembles: int = 25
    seed: int = 0
    params: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise InvalidConfigError(f"unknown figure id {self.figure!r}; choose from {sorted(FIGURES)}")
        if self.n_list is None:
            self.n_list = list(FIGURES[self.figure]["n_list"])
        self.n_list = [int(n) for n in self.n_list]
        if not self.n_list:
            raise InvalidConfigError("N list must be non-empty")
        if self.figure != "fig3c" and min(self.n_list) < 1:
            raise InvalidConfigError("N must be positive")
        if self.ensembles < 1:
            raise InvalidConfigError("ensembles must be positive")
        if self.seed < 0:
            raise InvalidConfigError("seed must be non-negative")
        unknown = set(self.params) - set(COMMON) - set(FIGURES[self.figure]["params"])
        if unknown:
            raise InvalidConfigError(f"unknown parameters {sorted(unknown)}")

    def resolved_params(self):
        p = dict(COMMON)
        p.update(FIGURES[self.figure]["params"])
        p.update({k: v for k, v in self.params.items()})
        return p

    def to_dict(self):
        return dict(figure=self.figure, n_list=list(self.n_list), ensembles=self.ensembles,
                    seed=self.seed, params=dict(sorted(self.params.items())))

    @classmethod
    def from_dict(cls, d):
        allowed = {"figure", "n_list", "ensembles", "seed", "params", "workers"}
        extra = set(d) - allowed
        if extra:
            raise InvalidConfigError(f"unknown spec keys {sorted(extra)}")
        return cls(**d)


@dataclass
class Row:
    figure: str
    key: str
    N: int | None
    seed: int
    metric: str
    value: float
    std: float
    stderr: float
    count: int
    error: str = ""


@dataclass
class ScanResult:
    rows: list
    metadata: dict

    @property
    def failures(self):
        return [r for r in self.rows if r.error]

    def to_json(self):
        rows = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                 for k, v in asdict(r).items()} for r in self.rows]
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        rows = []
        for r in data["rows"]:
            r = dict(r)
            for k in ("value", "std", "stderr"):
                r[k] = float("nan") if r[k] is None else float(r[k])
            rows.append(Row(**r))
        return cls(rows, data["metadata"])


# ---------------------------------------------------------------- drivers


def _coupling(p, n=None):
    return Constant(p["g"]) if p["coupling"] == "constant" else SqrtScaled(p["G"])


def _horizon(p):
    return HorizonPolicy(max_time=p["max_time"], residual_cutoff=p["residual_cutoff"])


def _opt_options(p, seed):
    from .pulse_opt import OptimizationOptions

    return OptimizationOptions(max_iters=p["max_iters"], method=p["method"],
                               learning_rate=p["learning_rate"], horizon=_horizon(p),
                               tol=p["tol"], seed=seed)


def _initial_pulse(p, rng):
    vals = rng.normal(0.0, p["init_scale"], p["segments"]) if p["init_scale"] > 0 \
        else np.zeros(p["segments"])
    return Pulse(p["T"], vals)


def _disorder(p, seed):
    if p.get("bins"):
        return DisorderSpec(bins_with_std(p["bins"], p["width"] / math.sqrt(12)), seed)
    return DisorderSpec(Uniform(p["width"] / 2), seed)


def _cell_es(p, n, freqs, rng):
    from .metrics import eigenstate_superradiance_static

    cfg = SystemConfig(freqs, _coupling(p), p["kappa"], p["gamma"])
    es = eigenstate_superradiance_static(cfg).value
    return {"es": es, "es_over_n": es / n, "es_over_half_n": es / (n / 2)}


def _cell_fig2(p, n, freqs, rng):
    from .metrics import eigenstate_superradiance_modulated, eigenstate_superradiance_static
    from .pulse_opt import optimize_pulse

    cfg = SystemConfig(freqs, _coupling(p), p["kappa"], p["gamma"])
    init = _initial_pulse(p, rng)
    rec = optimize_pulse(cfg, init, _opt_options(p, int(rng.integers(2 ** 31))))
    return {
        "fidelity_zero": rec.baseline_fidelity,
        "fidelity_opt": rec.final_fidelity,
        "fidelity_ratio": rec.improvement_ratio,
        "es_zero": eigenstate_superradiance_static(cfg).value,
        "es_opt": eigenstate_superradiance_modulated(cfg, rec.final, p["tol"]).value,
    }


def _cell_fig4(p, n, freqs, rng):
    from .metrics import photon_fidelity
    from .multiphoton import BinnedEnsemble, binned_fidelity, exact_full_fidelity, normalized_fidelity
    from .pulse_opt import optimize_pulse

    cfg = SystemConfig(freqs, _coupling(p), p["kappa"], p["gamma"])
    pol = _horizon(p)
    init = _initial_pulse(p, rng)
    rec = optimize_pulse(cfg, init, _opt_options(p, int(rng.integers(2 ** 31))))
    homog = cfg.replace(emitter_freqs=np.zeros(n))
    single_ref = photon_fidelity(homog, Pulse.zeros(p["segments"], p["T"]), pol, p["tol"]).value

    ens = BinnedEnsemble.from_frequencies(freqs) if len(set(freqs.tolist())) <= 4 else None

    def full(pulse):
        if ens is not None:
            return binned_fidelity(ens, cfg.coupling, cfg.kappa, cfg.gamma, pulse,
                                   horizon_policy=pol).value
        return exact_full_fidelity(cfg, pulse, horizon_policy=pol).value

    zero = Pulse.zeros(p["segments"], p["T"])
    f0, f1 = full(zero), full(rec.final)
    n0 = normalized_fidelity(f0, cfg, horizon_policy=pol)
    n1 = normalized_fidelity(f1, cfg, horizon_policy=pol)
    return {
        "single_norm_zero": rec.baseline_fidelity / single_ref,
        "single_norm_opt": rec.final_fidelity / single_ref,
        "single_ratio": rec.improvement_ratio,
        "full_norm_zero": n0,
        "full_norm_opt": n1,
        "full_ratio": n1 / n0,
    }


_CELLS = {"fig1b": _cell_es, "fig1c": _cell_es, "fig2": _cell_fig2,
          "fig4a": _cell_fig4, "fig4b": _cell_fig4, "fig4c": _cell_fig4}


def _run_cell(task):
    """One (N, ensemble) or (G, delta0) cell; failures are returned, not raised."""
    figure, p, n, index, seed, extra = task
    try:
        if figure == "fig3c":
            from .large_n import LargeNParams
            from .pulse_opt import optimize_pulse

            G, d0 = extra
            rng = ensemble_rng(seed, 0)
            init = _initial_pulse(p, rng)
            rec = optimize_pulse(LargeNParams(G, d0, p["kappa"]), init, _opt_options(p, seed))
            return {"baseline": rec.baseline_fidelity, "optimized": rec.final_fidelity,
                    "ratio": rec.improvement_ratio}, ""
        rng = ensemble_rng(seed, index)
        freqs = sample_frequencies(_disorder(p, seed), n, rng=rng)
        return _CELLS[figure](p, n, freqs, rng), ""
    except Exception as exc:  # recorded per cell, the scan continues
        log.warning("cell %s N=%s #%s failed: %s", figure, n, index, exc)
        return {}, f"{type(exc).__name__}: {exc}"


def _aggregate(figure, key, n, seed, results):
    metrics = []
    for values, _ in results:
        for m in values:
            if m not in metrics:
                metrics.append(m)
    errors = sorted({e for _, e in results if e})
    err = "; ".join(errors)
    if not metrics:
        return [Row(figure, key, n, seed, "failed", float("nan"), float("nan"),
                    float("nan"), 0, err or "no results")]
    rows = []
    for m in metrics:
        vals = np.array([v[m] for v, _ in results if m in v], float)
        k = vals.size
        std = float(np.std(vals, ddof=1)) if k > 1 else 0.0
        rows.append(Row(figure, key, n, seed, m, float(np.mean(vals)), std,
                        std / math.sqrt(k), k, err))
    return rows


def run_experiment(spec, timing=False):
    """Run every cell of ``spec`` and average over ensembles."""
    from . import __version__

    t0 = time.perf_counter()
    p = spec.resolved_params()
    if spec.figure == "fig3c":
        cells = [(f"G={G!r};delta0={d!r}", None, [(spec.figure, p, 0, 0, spec.seed, (G, d))])
                 for G in p["G_list"] for d in p["delta_list"]]
    else:
        cells = [(f"N={n}", n, [(spec.figure, p, n, i, spec.seed, None)
                                for i in range(spec.ensembles)])
                 for n in spec.n_list]
    tasks = [t for _, _, ts in cells for t in ts]
    if spec.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]
    rows, pos = [], 0
    for key, n, ts in cells:
        rows.extend(_aggregate(spec.figure, key, n, spec.seed, results[pos:pos + len(ts)]))
        pos += len(ts)
    meta = {
        "tool": "tcsr",
        "version": __version__,
        "spec": spec.to_dict(),
        "resolved_params": p,
        "config_hash": config_hash(spec),
        "seeds": {"master": spec.seed, "streams": "Philox(SeedSequence([seed, ensemble_index]))"},
    }
    if timing:
        meta["wall_time_s"] = time.perf_counter() - t0
    return ScanResult(rows, meta)


def config_hash(spec):
    text = json.dumps(spec.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- single-system commands

SYSTEM_DEFAULTS = dict(
    n=10, emitter_freqs=None, disorder={"kind": "uniform", "half_width": 5.0},
    coupling="sqrt", G=1.0, g=1.0, kappa=1.0, gamma=0.5,
    T=10.0, segments=100, pulse=None, init_scale=0.0,
    max_iters=200, method="adam", learning_rate=0.5,
    max_time=200.0, residual_cutoff=1e-8, tol=1e-9, n_max=None,
)


def disorder_from_dict(d, seed):
    kind = d.get("kind")
    args = {k: v for k, v in d.items() if k != "kind"}
    try:
        dist = {"uniform": Uniform, "lorentzian": Lorentzian, "bins": DiscreteBins}[kind](**args)
    except KeyError:
        raise InvalidConfigError(f"unknown disorder kind {kind!r}") from None
    except TypeError as exc:
        raise InvalidConfigError(f"bad disorder parameters: {exc}") from None
    return DisorderSpec(dist, seed)


def _system_cell(task):
    command, p, index, seed = task
    try:
        from .metrics import (eigenstate_superradiance_modulated,
                              eigenstate_superradiance_static, photon_fidelity)

        rng = ensemble_rng(seed, index)
        if p["emitter_freqs"] is not None:
            freqs = np.asarray(p["emitter_freqs"], float)
        else:
            freqs = sample_frequencies(disorder_from_dict(p["disorder"], seed), p["n"], rng=rng)
        cfg = SystemConfig(freqs, _coupling(p), p["kappa"], p["gamma"])
        pol = _horizon(p)
        pulse = (Pulse(p["T"], p["pulse"]) if p["pulse"] is not None
                 else _initial_pulse(p, rng))
        if command == "simulate":
            fr = photon_fidelity(cfg, pulse, pol, p["tol"])
            return {"fidelity": fr.value, "emitter_loss": fr.emitter_loss,
                    "residual": fr.residual, "horizon": fr.horizon,
                    "es_static": eigenstate_superradiance_static(cfg).value,
                    "es_modulated": eigenstate_superradiance_modulated(cfg, pulse, p["tol"]).value}, ""
        if command == "optimize":
            from .pulse_opt import optimize_pulse

            rec = optimize_pulse(cfg, pulse, _opt_options(p, int(rng.integers(2 ** 31))))
            out = {"fidelity_zero": rec.baseline_fidelity, "fidelity_opt": rec.final_fidelity,
                   "ratio": rec.improvement_ratio, "gradient_norm": rec.gradient_norm,
                   "iterations": float(rec.iterations)}
            out.update({f"theta_{k:03d}": float(v) for k, v in enumerate(rec.final.values)})
            return out, ""
        if command == "multiphoton":
            from .multiphoton import (BinnedEnsemble, FockTruncation, binned_fidelity,
                                      exact_full_fidelity, normalized_fidelity)

            trunc = FockTruncation(p["n_max"])
            if len(set(freqs.tolist())) <= 4:
                r = binned_fidelity(BinnedEnsemble.from_frequencies(freqs), cfg.coupling,
                                    cfg.kappa, cfg.gamma, pulse, trunc, pol)
            else:
                r = exact_full_fidelity(cfg, pulse, trunc, pol)
            return {"fidelity": r.value, "normalized": normalized_fidelity(r.value, cfg, trunc=trunc,
                                                                         horizon_policy=pol),
                    "emitted": r.emitted, "emitter_loss": r.emitter_loss,
                    "residual": r.residual, "leakage": r.leakage}, ""
        raise InvalidConfigError(f"unknown command {command!r}")
    except Exception as exc:
        log.warning("%s ensemble %d failed: %s", command, index, exc)
        return {}, f"{type(exc).__name__}: {exc}"


def run_system_command(command, conf=None, seed=0, ensembles=1, timing=False):
    """``simulate``/``optimize``/``multiphoton`` over ``ensembles`` disorder draws."""
    from . import __version__

    t0 = time.perf_counter()
    conf = dict(conf or {})
    unknown = set(conf) - set(SYSTEM_DEFAULTS)
    if unknown:
        raise InvalidConfigError(f"unknown parameters {sorted(unknown)}")
    if ensembles < 1 or seed < 0:
        raise InvalidConfigError("ensembles must be positive and seed non-negative")
    p = dict(SYSTEM_DEFAULTS)
    p.update(conf)
    n = len(p["emitter_freqs"]) if p["emitter_freqs"] is not None else int(p["n"])
    results = [_system_cell((command, p, i, seed)) for i in range(ensembles)]
    rows = _aggregate(command, f"N={n}", n, seed, results)
    meta = {"tool": "tcsr", "version": __version__, "command": command,
            "config": dict(sorted(conf.items())), "resolved_params": p,
            "seeds": {"master": seed, "ensembles": ensembles},
            "config_hash": hashlib.sha256(json.dumps([command, conf, seed, ensembles],
                                                     sort_keys=True).encode()).hexdigest()[:16]}
    if timing:
        meta["wall_time_s"] = time.perf_counter() - t0
    return ScanResult(rows, meta)


# ---------------------------------------------------------------- output


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x).replace("\x00", "")


def to_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def emit(result, out, fmt="csv"):
    """Write ``out`` (CSV or JSON) and, for CSV, a ``.json`` sidecar next to it.

    Returns the list of written paths.
    """
    if fmt not in ("csv", "json"):
        raise InvalidConfigError(f"unknown format {fmt!r}")
    paths = []
    try:
        if fmt == "csv":
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(to_csv(result))
            paths.append(out)
            side = os.path.splitext(out)[0] + ".json"
        else:
            side = out
        with open(side, "w", encoding="utf-8") as fh:
            fh.write(result.to_json())
        paths.append(side)
    except OSError as exc:
        raise OSError(f"cannot write output to {exc.filename or out}: {exc.strerror}") from exc
    return paths


__all__ = ["Uniform", "Lorentzian", "DiscreteBins", "DisorderSpec", "ExperimentSpec",
           "Row", "ScanResult", "sample_frequencies", "ensemble_rng", "bins_with_std",
           "run_experiment", "run_system_command", "disorder_from_dict", "emit", "to_csv", "config_hash", "FIGURES", "CSV_COLUMNS"]
