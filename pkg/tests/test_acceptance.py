"""Acceptance suite: nine criteria at their stated tolerances.

Each test records one pass/fail line (see ``conftest.record``); the lines are
repeated in the terminal summary. Criteria 1, 2 and part of 9 share one
ten-realization fig2 ensemble, which takes a few minutes on one core. Set
``TCLHAM_WORKERS`` to spread it over several processes.
"""
import math
import sys

import numpy as np
import pytest
from conftest import record
from scipy.optimize import minimize_scalar

from tclham.correlations import (
    Kernel,
    RateSet,
    empirical_four_point,
    empirical_two_point,
    golden_rule_rates,
    kernel_h,
    memory_integral_Gamma,
    transition_integral,
    with_fourth_order,
)
from tclham.harness import preset, run_experiment
from tclham.master import (
    CorrelatedState,
    MultibandRates,
    correlated_tcl2,
    correlated_tcl2_population,
    correlated_tcl4,
    density_matrix,
    ham_multiband,
    ham_two_band,
    tcl2_standard,
    tcl4_standard,
)
from tclham.model import ModelParams, build_model
from tclham.projections import (
    BandPartition,
    dense_interaction,
    liouvillian,
    partial_trace_env,
    project_correlated,
    project_standard,
)
from tclham.propagator import (
    IntegratorOptions,
    PureState,
    conditional_densities,
    evolve,
    reduced_density,
)

pytestmark = pytest.mark.filterwarnings("ignore::tclham.propagator.RecurrenceWarning")

FIG2_PARAMS = ModelParams(500, 500, 0.5, 5e-4)
FIG5_PARAMS = ModelParams(500, 500, 0.5, 1e-2)


def _fmt(x):
    return f"{x:.3g}"


@pytest.fixture(scope="module")
def fig2_run():
    cfg = preset("fig2", realizations=10, methods=("exact", "tcl2_std", "tcl4_std", "ham"))
    return run_experiment(cfg)


def test_criterion_1_fig2_exact_vs_ham(fig2_run):
    ex, ham = fig2_run.curves["exact"], fig2_run.curves["ham"]
    dev = float(np.max(np.abs(ex.rho11 - ham.rho11)))
    t_end = float(fig2_run.times[-1])
    total = golden_rule_rates(FIG2_PARAMS).total
    ok = record(1, "fig2 exact vs HAM", {
        "max |exact - HAM|": (dev <= 0.03, f"{_fmt(dev)} <= 0.03"),
        "t_max": (abs(t_end - 5 / total) < 1e-9, f"{t_end:.1f}"),
        "realizations": (len(fig2_run.seeds) == 10 and not fig2_run.partial, str(len(fig2_run.seeds))),
    })
    assert ok


def test_criterion_2_tcl2_stationary_failure(fig2_run):
    exact_final = float(fig2_run.curves["exact"].rho11[-1])
    tcl2_final = float(fig2_run.curves["tcl2_std"].rho11[-1])
    ok = record(2, "standard TCL2 misses the stationary state", {
        "|exact final - 0.5|": (abs(exact_final - 0.5) <= 0.05, f"{_fmt(abs(exact_final - 0.5))} <= 0.05"),
        "tcl2 final": (tcl2_final <= 0.01, f"{_fmt(tcl2_final)} <= 0.01"),
    })
    assert ok


def test_criterion_3_tcl4_divergence():
    checks = {}
    for label, rates in (("fig2", golden_rule_rates(FIG2_PARAMS)), ("asym", RateSet(0.007, 0.003, 0.5))):
        up = density_matrix(1.0)
        g1, g2 = rates.gamma1, rates.gamma2
        late = tcl4_standard(rates, up, 4 / g1)[1, 1].real
        res = minimize_scalar(lambda t: tcl4_standard(rates, up, t)[1, 1].real,
                              bounds=(0.0, 3 / g1), method="bounded", options={"xatol": 1e-10 / g1})
        closed = math.exp(-g2 / (2 * g1))
        checks[f"{label} rho11(4/g1)"] = (late > 1.0, f"{_fmt(late)} > 1")
        checks[f"{label} min - closed form"] = (abs(res.fun - closed) <= 1e-12, _fmt(abs(res.fun - closed)))
    assert record(3, "standard TCL4 diverges", checks)


def test_criterion_4_ctcl2_markov_equals_ham(fig2_run):
    rng = np.random.default_rng(4)
    checks = {}
    cases = [("fig2 grid", golden_rule_rates(FIG2_PARAMS), fig2_run.times, density_matrix(1.0))]
    rates = RateSet(0.009, 0.002, 0.5)
    irregular = np.concatenate([[0.0], np.sort(rng.uniform(0, 8 / rates.total, 60))])
    cases.append(("random grid", rates, irregular, density_matrix(0.7, 0.2 + 0.3j)))
    for label, r, grid, rho0 in cases:
        a = correlated_tcl2(None, r, CorrelatedState.lower_band(rho0), grid, "markov").rho
        b = ham_two_band(r, rho0, grid)
        d = float(np.abs(a - b).max())
        checks[label] = (d <= 1e-10, f"{_fmt(d)} <= 1e-10")
    assert record(4, "correlated TCL2 (Markov) equals HAM", checks)


def test_criterion_5_memory_kernel():
    checks = {}
    for p in (FIG2_PARAMS, FIG5_PARAMS):
        rates = golden_rule_rates(p)
        k = Kernel("sinc2", p.band_width)
        grid = np.linspace(0, 5 / rates.total, 200)
        traj = correlated_tcl2(k, rates, CorrelatedState.lower_band(density_matrix(1.0)), grid, "memory")
        d = float(np.abs(traj.rho11 - correlated_tcl2_population(k, rates, 1.0, grid)).max())
        checks[f"ODE vs closed form, lambda={p.coupling_strength}"] = (d <= 1e-6, f"{_fmt(d)} <= 1e-6")
    rates = golden_rule_rates(FIG2_PARAMS)
    de = FIG2_PARAMS.band_width
    t = np.geomspace(1e-2, 1600, 60)
    analytic = rates.total * (t - (1 - np.exp(-de * t)) / de)
    rel = float(np.max(np.abs(memory_integral_Gamma(Kernel("exponential", de), rates, t) / analytic - 1)))
    checks["exponential Gamma relative error"] = (rel <= 1e-8, f"{_fmt(rel)} <= 1e-8")
    assert record(5, "memory-kernel closed form", checks)


def test_criterion_6_fourth_order():
    checks = {}
    worst = 0.0
    for g1, g2, de in ((1.5707963267948966e-3,) * 2 + (0.5,), (0.004, 0.0113, 0.25), (0.6283, 0.6283, 0.5)):
        fo = with_fourth_order(RateSet(g1, g2, de)).fourth_order
        lhs, rhs = fo.Gamma1 + fo.GammaTilde2, (g1 + g2) * (1 + (g1 + g2) / (2 * de))
        worst = max(worst, abs(lhs - rhs) / rhs)
    checks["Gamma1 + GammaTilde2 identity (rel)"] = (worst <= 1e-15, _fmt(worst))
    rates = golden_rule_rates(FIG5_PARAMS)
    r4 = with_fourth_order(rates)
    up = CorrelatedState.lower_band(density_matrix(1.0))
    fo = r4.fourth_order
    s4 = correlated_tcl4(r4, up, 60 / (fo.Gamma1 + fo.GammaTilde2)).rho[1, 1].real
    s2 = correlated_tcl2(None, rates, up, [0.0, 60 / rates.total]).rho11[-1]
    checks["stationary ctcl4 - ctcl2"] = (abs(s4 - s2) <= 1e-12, f"{_fmt(abs(s4 - s2))} <= 1e-12")
    grid = np.linspace(0, 5 / rates.total, 201)
    stat = rates.gamma1 / rates.total
    d4 = np.abs(correlated_tcl4(r4, up, grid).rho11[1:] - stat)
    d2 = np.abs(correlated_tcl2(None, rates, up, grid).rho11[1:] - stat)
    checks["ctcl4 strictly faster (fig5)"] = (bool(np.all(d4 < d2)), f"{int(np.sum(d4 < d2))}/{d4.size} times")
    assert record(6, "fourth-order corrections", checks)


def _dense_reference(model, psi0, grid, dt):
    psi = np.array(psi0, complex)
    out = [psi.copy()]
    f = lambda s, y: -1j * dense_interaction(model, s) @ y  # noqa: E731
    for t0, t1 in zip(grid[:-1], grid[1:]):
        n = math.ceil((t1 - t0) / dt)
        h = (t1 - t0) / n
        for k in range(n):
            t = t0 + k * h
            k1 = f(t, psi)
            k2 = f(t + h / 2, psi + h / 2 * k1)
            k3 = f(t + h / 2, psi + h / 2 * k2)
            k4 = f(t + h, psi + h * k3)
            psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(psi.copy())
    return out


def _random_density(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    r = a @ a.conj().T
    return r / np.trace(r).real


def test_criterion_7_small_scale_oracles():
    rng = np.random.default_rng(7)
    model = build_model(ModelParams(4, 4, 0.5, 0.02), 17)
    d = model.env_dim
    psi0 = rng.standard_normal(2 * d) + 1j * rng.standard_normal(2 * d)
    psi0 /= np.linalg.norm(psi0)
    grid = np.linspace(0, 60, 7)
    dt = 0.1
    traj = evolve(model, PureState(psi0), grid, IntegratorOptions(dt=dt))
    ref = _dense_reference(model, psi0, grid, dt / 10)
    err = 0.0
    for k, s in enumerate(ref):
        r1, r2 = conditional_densities(model, s)
        err = max(err, np.abs(traj.rho[k] - reduced_density(model, s)).max(),
                  np.abs(traj.rho1[k] - r1).max(), np.abs(traj.rho2[k] - r2).max())
    checks = {"propagation vs dense oracle": (err <= 1e-8, f"{_fmt(err)} <= 1e-8")}

    part = BandPartition.from_model(model)
    w = rng.random(d)
    ref_state = np.diag(w / w.sum())
    projections = {"standard": lambda r: project_standard(r, ref_state),
                   "correlated": lambda r: project_correlated(r, part)}
    worst = {"idempotence": 0.0, "consistency": 0.0, "positivity": 0.0, "odd moment": 0.0}
    for _ in range(100):
        rho = _random_density(rng, 2 * d)
        V = dense_interaction(model, float(rng.uniform(0, 200)))
        for P in projections.values():
            p1 = P(rho)
            worst["idempotence"] = max(worst["idempotence"], np.abs(P(p1) - p1).max())
            worst["consistency"] = max(worst["consistency"],
                                       np.abs(partial_trace_env(p1, d) - partial_trace_env(rho, d)).max())
            worst["odd moment"] = max(worst["odd moment"], np.abs(P(liouvillian(V, p1))).max())
            worst["positivity"] = max(worst["positivity"], -min(0.0, np.linalg.eigvalsh(p1).min()))
    for k, v in worst.items():
        checks[k] = (v <= 1e-12, f"{_fmt(v)} <= 1e-12")
    assert record(7, "small-scale oracle equivalence", checks)


def test_criterion_8_correlators():
    checks = {}
    p = ModelParams(200, 200, 0.5, 1e-3)
    M = 100
    tau = np.linspace(0, 10 / p.band_width, 81)
    f2 = empirical_two_point(p, range(M), tau)
    target = golden_rule_rates(p).gamma2 * kernel_h(Kernel("sinc2", p.band_width), tau)
    sigma = p.coupling_strength ** 2 * math.sqrt(p.N2 / p.N1) / math.sqrt(M)
    dev = float(np.abs(f2 - target).max() / sigma)
    checks["f2 max deviation / sigma"] = (dev <= 3.0, f"{_fmt(dev)} <= 3")

    p4 = ModelParams(48, 24, 0.5, 1e-2)
    peak1 = empirical_four_point(p4, range(200), 60.0, 60.0, 0.0, 0.0)
    peak2 = empirical_four_point(p4, range(200), 60.0, 0.0, 0.0, 60.0)
    ratio = (peak2 / peak1).real
    checks["f4 peak ratio vs N1/N2 = 2"] = (abs(ratio / (p4.N1 / p4.N2) - 1) <= 0.1, _fmt(ratio))

    pt = ModelParams(48, 32, 0.5, 1e-2)
    rates = golden_rule_rates(pt)
    tau = [50 / pt.band_width, 100 / pt.band_width]
    for idx, target in (((1, 0, 1, 2), pt.N2 * rates.gamma1), ((0, 1, 2, 1), pt.N1 * rates.gamma2)):
        f = transition_integral(pt, 0, *idx, tau)
        rel = (f[1] - f[0]) / (tau[1] - tau[0]) / target - 1
        checks[f"transition slope f{idx}"] = (abs(rel) <= 0.1, f"rel {_fmt(rel)}")
    assert record(8, "correlator suite", checks)


def test_criterion_9_conservation(fig2_run):
    checks = {}
    drift = float(fig2_run.curves["exact"].norm_drift.max())
    checks["exact norm drift"] = (drift <= 1e-9, f"{_fmt(drift)} <= 1e-9")

    rates = RateSet(0.006, 0.0025, 0.5)
    r4 = with_fourth_order(rates)
    grid = np.linspace(0, 8 / rates.total, 161)
    rho0 = density_matrix(0.75, 0.25 - 0.3j)
    s0 = CorrelatedState(density_matrix(0.8, 0.1) * 0.6, density_matrix(0.4, 0.2j) * 0.4)
    k = Kernel("sinc2", 0.5)
    corr = {"ctcl2 markov": correlated_tcl2(None, rates, s0, grid, "markov"),
            "ctcl2 memory": correlated_tcl2(k, rates, s0, grid, "memory"),
            "ctcl4": correlated_tcl4(r4, s0, grid)}
    mb = ham_multiband(MultibandRates.two_band(rates, 120, 50), np.stack([rho0.T, 0 * rho0], -1), grid)
    solvers = {"tcl2_std": tcl2_standard(rates, rho0, grid), "tcl4_std": tcl4_standard(rates, rho0, grid),
               "ham": ham_two_band(rates, rho0, grid), "multiband": mb.rho}
    solvers.update({n: t.rho for n, t in corr.items()})
    tr = max(float(np.abs(np.einsum("tii->t", r) - 1).max()) for r in solvers.values())
    checks["trace (all solvers)"] = (tr <= 1e-10, f"{_fmt(tr)} <= 1e-10")
    inv = max(float(np.abs(t.exchange_invariant - t.exchange_invariant[0]).max()) for t in corr.values())
    checks["rho1_11 + rho2_00"] = (inv <= 1e-10, f"{_fmt(inv)} <= 1e-10")

    rng = np.random.default_rng(9)
    sizes = np.array([30, 70, 45])
    S = rng.random((2, 2, 3, 3))
    S = S + np.transpose(S, (1, 0, 3, 2))
    g = 1e-3 * S * sizes[None, None, :, None] / sizes.mean()
    B0 = np.zeros((2, 2, 3), complex)
    for a, wgt in enumerate((0.5, 0.3, 0.2)):
        B0[:, :, a] = wgt * density_matrix(rng.random(), 0.1).T
    traj = ham_multiband(MultibandRates(g, tuple(sizes)), B0, np.linspace(0, 4000, 41))
    checks["multiband sum B_iia"] = (traj.probability_drift <= 1e-10, f"{_fmt(traj.probability_drift)} <= 1e-10")
    assert record(9, "conservation properties", checks)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
