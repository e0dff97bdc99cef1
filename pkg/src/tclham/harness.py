"""Experiment configuration, ensemble runs, curve comparison and output files."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .correlations import Kernel, golden_rule_rates, with_fourth_order
from .master import (
    CorrelatedState,
    correlated_tcl2,
    correlated_tcl4,
    density_matrix,
    ham_two_band,
    tcl2_standard,
    tcl4_standard,
)
from .model import (
    ConfigurationError,
    ModelParams,
    build_model,
    random_lower_band_state,
    realization_seeds,
)
from .propagator import (
    IntegrationAccuracyError,
    IntegratorOptions,
    evolve,
    product_state,
    recurrence_time,
)

METHODS = ("exact", "tcl2_std", "tcl4_std", "ham", "ctcl2_markov", "ctcl2_memory", "ctcl4")
WORKERS_ENV = "TCLHAM_WORKERS"

PRESETS = {
    "fig2": 5e-4,
    "fig3": 1e-3,
    "fig4": 3e-3,
    "fig5": 1e-2,
}


class RealizationFailure(RuntimeError):
    """Every exact realization failed its accuracy check."""

    def __init__(self, failures):
        super().__init__(f"all {len(failures)} realizations failed; first: {failures[0]['error']}")
        self.failures = failures


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    methods: tuple = METHODS
    t_max: float | None = None
    sample_count: int = 400
    realizations: int = 10
    master_seed: int = 0
    kernel: str = "sinc2"
    rho11_0: float = 1.0
    rho01_0: complex = 0.0
    dt: float | None = None
    backend: str = "auto"
    output_csv: str | None = None
    output_json: str | None = None

    def __post_init__(self):
        methods = tuple(self.methods)
        if not methods:
            raise ConfigurationError("select at least one method")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ConfigurationError(f"unknown methods {unknown}; choose from {METHODS}")
        # canonical order keeps the CSV column layout stable
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in methods))
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigurationError("t_max must be > 0")
        if int(self.sample_count) < 2:
            raise ConfigurationError("sample_count must be >= 2")
        if "exact" in methods and int(self.realizations) < 1:
            raise ConfigurationError("realizations must be >= 1 when exact is selected")
        if not 0.0 <= self.rho11_0 <= 1.0:
            raise ConfigurationError("rho11_0 must lie in [0, 1]")
        if abs(self.rho01_0) ** 2 > self.rho11_0 * (1 - self.rho11_0) + 1e-12:
            raise ConfigurationError("initial system state is not positive semidefinite")
        Kernel(self.kernel, self.params.band_width)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.resolved_t_max(), int(self.sample_count))

    def resolved_t_max(self) -> float:
        if self.t_max is not None:
            return float(self.t_max)
        rates = golden_rule_rates(self.params)
        t = 5.0 / rates.total if rates.total > 0 else 100.0 / self.params.band_width
        return min(t, 0.5 * recurrence_time(self.params))

    def rho0(self) -> np.ndarray:
        return density_matrix(self.rho11_0, self.rho01_0)


def preset(figure_id: str, **overrides) -> ExperimentConfig:
    """Configuration matching one of the reference figures (N1 = N2 = 500, band width 0.5)."""
    if figure_id not in PRESETS:
        raise ConfigurationError(f"unknown figure {figure_id!r}; choose from {sorted(PRESETS)}")
    params = ModelParams(N1=500, N2=500, band_width=0.5, coupling_strength=PRESETS[figure_id])
    if figure_id == "fig2":
        methods = ("exact", "tcl2_std", "tcl4_std", "ham")
    else:
        methods = ("exact", "ham", "ctcl2_memory", "ctcl2_markov", "ctcl4")
    cfg = ExperimentConfig(params=params, methods=methods, rho11_0=1.0)
    return replace(cfg, **overrides) if overrides else cfg


# --- running ------------------------------------------------------------------

@dataclass
class Curve:
    times: np.ndarray
    rho11: np.ndarray
    rho01: np.ndarray
    rho11_std: np.ndarray | None = None
    norm_drift: np.ndarray | None = None


@dataclass
class ResultSet:
    config: ExperimentConfig
    times: np.ndarray
    curves: dict
    metrics: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    version: str = __version__

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def _system_components(rho0: np.ndarray):
    """Eigen-decomposition of the initial system state into weighted pure states."""
    w, v = np.linalg.eigh(rho0)
    return [(float(p), v[:, k]) for k, p in enumerate(w) if p > 1e-14]


def _run_realization(params: ModelParams, master_seed: int, k: int, rho0, grid, opts):
    coupling_seed, state_seed = realization_seeds(master_seed, k)
    model = build_model(params, coupling_seed)
    chi = random_lower_band_state(model, state_seed)
    rho = np.zeros((len(grid), 2, 2), dtype=complex)
    drift = np.zeros(len(grid))
    try:
        for p, s in _system_components(rho0):
            traj = evolve(model, product_state(s, chi), grid, opts)
            rho += p * traj.rho
            drift = np.maximum(drift, traj.norm_drift)
    except IntegrationAccuracyError as exc:
        return {"k": k, "seeds": (coupling_seed, state_seed), "error": str(exc)}
    return {"k": k, "seeds": (coupling_seed, state_seed), "rho": rho, "norm_drift": drift}


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return 1


def run_exact(config: ExperimentConfig, grid: np.ndarray, workers: int | None = None):
    opts = IntegratorOptions(dt=config.dt, backend=config.backend)
    rho0 = config.rho0()
    jobs = range(int(config.realizations))
    n = _workers(workers)
    args = [(config.params, config.master_seed, k, rho0, grid, opts) for k in jobs]
    if n == 1:
        results = [_run_realization(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run_realization, *zip(*args)))
    results.sort(key=lambda r: r["k"])
    return results


def analytic_curve(method: str, config: ExperimentConfig, grid: np.ndarray) -> Curve:
    params = config.params
    rates = golden_rule_rates(params)
    rho0 = config.rho0()
    kernel = Kernel(config.kernel, params.band_width)
    if method == "tcl2_std":
        rho = tcl2_standard(rates, rho0, grid)
    elif method == "tcl4_std":
        rho = tcl4_standard(rates, rho0, grid)
    elif method == "ham":
        rho = ham_two_band(rates, rho0, grid)
    elif method in ("ctcl2_markov", "ctcl2_memory"):
        mode = method.split("_")[1]
        rho = correlated_tcl2(kernel, rates, CorrelatedState.lower_band(rho0), grid, mode).rho
    elif method == "ctcl4":
        rho = correlated_tcl4(with_fourth_order(rates), CorrelatedState.lower_band(rho0), grid).rho
    else:
        raise ConfigurationError(f"{method!r} is not an analytic method")
    return Curve(grid, rho[:, 1, 1].real, rho[:, 0, 1])


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ResultSet:
    """Evaluate every selected method on one shared time grid.

    Exact runs use per-realization seeds from ``realization_seeds(master_seed, k)``
    and are averaged; realizations that fail the norm check are listed in
    ``failures`` and excluded from the mean.
    """
    grid = config.grid()
    curves = {}
    seeds = []
    failures = []
    for method in config.methods:
        if method != "exact":
            curves[method] = analytic_curve(method, config, grid)
            continue
        results = run_exact(config, grid, workers)
        ok = [r for r in results if "error" not in r]
        failures = [{"realization": r["k"], "seeds": list(r["seeds"]), "error": r["error"]}
                    for r in results if "error" in r]
        seeds = [{"realization": r["k"], "coupling_seed": r["seeds"][0],
                  "state_seed": r["seeds"][1]} for r in results]
        if not ok:
            raise RealizationFailure(failures)
        rho = np.stack([r["rho"] for r in ok])
        rho11 = rho[:, :, 1, 1].real
        curves["exact"] = Curve(
            grid,
            rho11.mean(axis=0),
            rho[:, :, 0, 1].mean(axis=0),
            rho11_std=rho11.std(axis=0, ddof=1) if len(ok) > 1 else np.zeros(len(grid)),
            norm_drift=np.max([r["norm_drift"] for r in ok], axis=0),
        )
    result = ResultSet(config=config, times=grid, curves=curves, seeds=seeds, failures=failures)
    reference = "exact" if "exact" in curves else ("ham" if "ham" in curves else None)
    if reference:
        for m, c in curves.items():
            if m != reference:
                result.metrics[f"{m}_vs_{reference}"] = compare_curves(c, curves[reference])
    return result


def compare_curves(a, b) -> dict:
    """Deviation metrics of curve ``a`` from curve ``b`` on a shared grid."""
    ta, tb = np.asarray(a.times), np.asarray(b.times)
    if ta.shape != tb.shape or not np.array_equal(ta, tb):
        raise ConfigurationError("curves must share one time grid")
    d11 = np.asarray(a.rho11) - np.asarray(b.rho11)
    dcoh = np.abs(np.asarray(a.rho01)) - np.abs(np.asarray(b.rho01))
    return {
        "max_abs_rho11": float(np.max(np.abs(d11))),
        "rms_rho11": float(np.sqrt(np.mean(d11 ** 2))),
        "max_abs_coherence": float(np.max(np.abs(dcoh))),
        "rms_coherence": float(np.sqrt(np.mean(dcoh ** 2))),
        "final_rho11_difference": float(d11[-1]),
    }


# --- serialization --------------------------------------------------------------

def csv_columns(methods) -> list[str]:
    cols = ["t"]
    for m in METHODS:
        if m not in methods:
            continue
        cols += [f"{m}_rho11", f"{m}_rho01_re", f"{m}_rho01_im"]
        if m == "exact":
            cols += ["exact_rho11_std", "exact_norm_drift"]
    return cols


def _columns(results: ResultSet) -> dict:
    data = {"t": results.times}
    for m in METHODS:
        c = results.curves.get(m)
        if c is None:
            continue
        data[f"{m}_rho11"] = c.rho11
        data[f"{m}_rho01_re"] = np.real(c.rho01)
        data[f"{m}_rho01_im"] = np.imag(c.rho01)
        if m == "exact":
            data["exact_rho11_std"] = c.rho11_std
            data["exact_norm_drift"] = c.norm_drift
    return data


def config_to_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["methods"] = list(config.methods)
    d["rho01_0"] = [float(np.real(config.rho01_0)), float(np.imag(config.rho01_0))]
    d["t_max_resolved"] = config.resolved_t_max()
    return d


def emit(results: ResultSet, fmt: str, path: str | os.PathLike) -> Path:
    """Write results as CSV (plot-ready columns) or JSON (with full config echo)."""
    path = Path(path)
    data = _columns(results)
    cols = csv_columns(results.config.methods)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                for row in zip(*(data[c] for c in cols)):
                    w.writerow([repr(float(x)) for x in row])
        elif fmt == "json":
            payload = {
                "version": results.version,
                "config": config_to_dict(results.config),
                "seeds": results.seeds,
                "failures": results.failures,
                "partial": results.partial,
                "metrics": results.metrics,
                "columns": {c: [float(x) for x in data[c]] for c in cols},
            }
            path.write_text(json.dumps(payload, indent=1, sort_keys=True))
        else:
            raise ConfigurationError(f"unknown output format {fmt!r}")
    except OSError as exc:
        raise OSError(f"could not write {path}: {exc}") from exc
    return path


def read_csv(path: str | os.PathLike) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    cols = np.array([[float(x) for x in r] for r in body]).T if body else np.empty((len(header), 0))
    return dict(zip(header, cols))


def curves_from_table(table: dict) -> dict:
    """Curves keyed by method from a column table (as returned by :func:`read_csv`)."""
    out = {}
    for m in METHODS:
        if f"{m}_rho11" in table:
            out[m] = Curve(table["t"], table[f"{m}_rho11"],
                           table[f"{m}_rho01_re"] + 1j * table[f"{m}_rho01_im"],
                           table.get(f"{m}_rho11_std"), table.get(f"{m}_norm_drift"))
    return out


# --- flat key = value config files ------------------------------------------------

_PARAM_KEYS = {"N1": int, "N2": int, "band_width": float, "coupling_strength": float}
_ALIASES = {"lambda": "coupling_strength", "delta_epsilon": "band_width"}
_CONFIG_KEYS = {
    "methods": lambda s: tuple(m.strip() for m in s.split(",") if m.strip()),
    "t_max": float,
    "sample_count": int,
    "realizations": int,
    "master_seed": int,
    "kernel": str,
    "rho11_0": float,
    "rho01_0": lambda s: complex(s.replace(" ", "")),
    "dt": float,
    "backend": str,
    "output_csv": str,
    "output_json": str,
}


def parse_config_text(text: str) -> dict:
    """``key = value`` per line, ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[_ALIASES.get(key, key)] = value
    return values


def config_from_values(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {_ALIASES.get(k, k): v for k, v in values.items()}
    unknown = set(values) - set(_PARAM_KEYS) - set(_CONFIG_KEYS) - {"preset"}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "preset" in values:
        base = preset(str(values["preset"]).strip())
    try:
        p = {k: conv(values[k]) for k, conv in _PARAM_KEYS.items() if k in values}
        c = {k: conv(values[k]) for k, conv in _CONFIG_KEYS.items() if k in values}
    except ValueError as exc:
        raise ConfigurationError(f"bad config value: {exc}") from None
    if base is None:
        missing = set(_PARAM_KEYS) - set(p)
        if missing:
            raise ConfigurationError(f"missing model parameters: {sorted(missing)}")
        return ExperimentConfig(params=ModelParams(**p), **c)
    params = replace(base.params, **p) if p else base.params
    return replace(base, params=params, **c)


def load_config(path: str | os.PathLike, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file; ``overrides`` (e.g. from command-line flags) win."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"could not read config {path}: {exc}") from exc
    values = parse_config_text(text)
    values.update(overrides or {})
    return config_from_values(values)


def rates_report(params: ModelParams) -> dict:
    rates = with_fourth_order(golden_rule_rates(params))
    fo = rates.fourth_order
    return {
        "gamma1": rates.gamma1,
        "gamma2": rates.gamma2,
        "gamma2_over_band_width": rates.gamma2 / params.band_width,
        "Gamma1": fo.Gamma1,
        "Gamma2": fo.Gamma2,
        "Gamma3": fo.Gamma3,
        "GammaTilde1": fo.GammaTilde1,
        "GammaTilde2": fo.GammaTilde2,
        "GammaTilde3": fo.GammaTilde3,
        "relaxation_rate_fourth_order": fo.Gamma1 + fo.GammaTilde2,
        "recurrence_time": recurrence_time(params),
        "default_t_max": min(5.0 / rates.total, 0.5 * recurrence_time(params))
        if rates.total > 0 else math.inf,
    }
