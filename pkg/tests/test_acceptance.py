"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one ``PASS``/``FAIL`` line; the lines are repeated in
the "acceptance criteria" section at the end of the pytest run.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from thermostring import ProblemConfig, Profile, make_grid
from thermostring import galerkin, solver_fd
from thermostring.diagnostics import cfhs_check
from thermostring.harness import stability_pair, state_gaps
from thermostring.scenario import Scenario

from . import oracles


def fixed_seed(n=256, t_end=50.0, **kw):
    return ProblemConfig(
        grid=make_grid(0.0, 1.0, n),
        mu=0.5,
        u0=Profile.make("sine", amplitude=0.1),
        v0=0.0,
        theta0=Profile.make("cosine", offset=1.0, amplitude=0.5),
        t_end=t_end,
        **kw,
    )


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


def order(coarse, fine):
    return math.log2(coarse / fine)


@pytest.fixture(scope="module")
def seed_runs():
    """Fixed seed scenario at n=256 (with snapshots) and n=512, every step sampled."""
    r256, t256 = timed(solver_fd.run, fixed_seed(256))
    r512 = solver_fd.run(fixed_seed(512), keep_snapshots=False)
    return r256, t256, r512


@pytest.fixture(scope="module")
def long_run():
    return solver_fd.run(fixed_seed(256, t_end=200.0, sample_every=20))


# -- 1. manufactured decoupled solutions ------------------------------------


def test_c1_wave_manufactured(verdict):
    def wave(n):
        cfg = ProblemConfig(
            grid=make_grid(0, 1, n), mu=0.0, u0=Profile.make("sine"), v0=0.0, theta0=1.0, t_end=1.0
        )
        r, secs = timed(solver_fd.run, cfg)
        x = cfg.grid.nodes
        final = float(np.abs(r.final.u - np.sin(np.pi * x) * np.cos(np.pi * r.final.t)).max())
        window = max(float(np.abs(s.u - np.sin(np.pi * x) * np.cos(np.pi * s.t)).max()) for s in r.snapshots)
        return final, window, secs

    (f64, w64, _), (f128, w128, _), (f256, w256, secs) = [wave(n) for n in (64, 128, 256)]
    orders = [order(w64, w128), order(w128, w256)]
    ok = f256 <= 5e-3 and w256 <= 5e-3 and all(abs(o - 2.0) <= 0.3 for o in orders) and secs < 10
    verdict(
        "C1a wave manufactured",
        ok,
        f"Linf(T=1)={f256:.3e} Linf(0<=t<=1)={w256:.3e} (<=5e-3) "
        f"orders={orders[0]:.3f},{orders[1]:.3f} (2+-0.3, over [0,T]) "
        f"final-time-only orders={order(f64, f128):.2f},{order(f128, f256):.2f} runtime={secs:.2f}s",
    )


def test_c1_heat_manufactured(verdict):
    cfg = ProblemConfig(
        grid=make_grid(0, 1, 256),
        mu=0.0,
        u0=0.0,
        v0=0.0,
        theta0=Profile.make("cosine", offset=2.0, amplitude=1.0),
        t_end=0.5,
        dt=1e-4,
        sample_every=1000,
    )
    r, secs = timed(solver_fd.run, cfg, keep_snapshots=False)
    x = cfg.grid.nodes
    err = float(np.abs(r.final.theta - 2 - math.exp(-math.pi**2 * 0.5) * np.cos(np.pi * x)).max())
    verdict("C1b heat manufactured", err <= 5e-3 and secs < 10, f"Linf={err:.3e} (<=5e-3) runtime={secs:.2f}s")


# -- 2. energy conservation ----------------------------------------------------


def test_c2_energy_conservation(seed_runs, verdict):
    r256, secs, r512 = seed_runs
    drift = []
    for r in (r256, r512):
        e = r.column("energy")
        drift.append(float(np.abs(e - e[0]).max() / abs(e[0])))
    p = order(*drift)
    ok = drift[0] <= 1e-2 and drift[1] < drift[0] and p >= 1.0 and secs < 60
    verdict(
        "C2 energy conservation",
        ok,
        f"drift n=256 {drift[0]:.3e} (<=1e-2), n=512 {drift[1]:.3e}, order={p:.3f} (>=1) runtime={secs:.2f}s",
    )


# -- 3. second law -------------------------------------------------------------


def _rate_residual(r):
    s, d, t = r.column("entropy"), r.column("entropy_production"), r.column("t")
    return float(np.abs(np.diff(s) / np.diff(t) - d[:-1]).max())


def _accumulated_residual(r):
    s, c = r.column("entropy"), r.column("cumulative_production")
    return float(np.abs(s - s[0] - c).max())


def test_c3_second_law(seed_runs, verdict):
    r256, _, r512 = seed_runs
    s = r256.column("entropy")
    drop = float(np.max(s[:-1] - s[1:] - 1e-8 * (1 + np.abs(s[:-1]))))
    rate = [_rate_residual(r) for r in (r256, r512)]
    acc = [_accumulated_residual(r) for r in (r256, r512)]
    p = order(*rate)
    ok = drop <= 0 and p >= 1.0
    verdict(
        "C3 second law",
        ok,
        f"monotone at all {len(s)} samples (worst excess {drop:.2e}); "
        f"max|dS/dt-D(t_k)| {rate[0]:.3e}->{rate[1]:.3e} order={p:.3f} (>=1); "
        f"accumulated max|S-S0-int D| order={order(*acc):.3f}",
    )


# -- 4. time-uniform bounds ----------------------------------------------------


def test_c4_uniform_bounds(long_run, verdict):
    r = long_run
    theta_tilde = float(r.initial.theta.min())
    inf, sup = r.column("inf_theta"), r.column("sup_theta")
    bound_hi = 10 * r.prediction.initial_energy / r.config.grid.length
    q = len(sup) // 4
    plateau = max(
        abs(series[3 * q :].max() - series[2 * q : 3 * q].max()) / series[2 * q : 3 * q].max()
        for series in (sup, 1 / inf)
    )
    ok = inf.min() >= 0.1 * theta_tilde and sup.max() <= bound_hi and plateau <= 0.05
    verdict(
        "C4 time-uniform bounds",
        ok,
        f"min inf_theta={inf.min():.4f} (>= {0.1 * theta_tilde:.3f}), max sup_theta={sup.max():.4f} "
        f"(<= {bound_hi:.3f}), plateau variation={plateau:.2e} (<=5%)",
    )


# -- 5. main theorem -----------------------------------------------------------


def test_c5_convergence_to_equilibrium(long_run, verdict):
    r = long_run
    h1, ut, err = r.column("u_h1"), r.column("ut_l2"), r.column("theta_l2_err")
    c = r.column("cumulative_production")
    k = int(0.9 * (len(c) - 1))
    decile = (c[-1] - c[k]) / c[-1]
    theta_inf = r.prediction.theta_inf
    ok = h1[-1] <= 0.05 * h1[0] and ut[-1] <= 0.05 * ut.max() and err[-1] <= 0.02 * theta_inf and decile <= 0.01
    verdict(
        "C5 convergence to equilibrium (T=200)",
        ok,
        f"u_h1 ratio={h1[-1] / h1[0]:.2e} ut ratio={ut[-1] / ut.max():.2e} (<=0.05) "
        f"theta_l2_err/theta_inf={err[-1] / theta_inf:.2e} (<=0.02) last-decile production={decile:.2e} (<=1%)",
    )


# -- 6. CFHS inequality ----------------------------------------------------------


def test_c6_cfhs(seed_runs, long_run, verdict):
    r256 = seed_runs[0]
    grid = r256.config.grid
    snaps = [s.theta for s in r256.snapshots] + [s.theta for s in long_run.snapshots]
    failures = sum(not cfhs_check(theta, grid).holds for theta in snaps)

    fine = make_grid(0, 1, 1024)
    families = [oracles.cosine_family(k) for k in (1, 2, 3, 4)] + [oracles.exp_cosine_family(k) for k in (1, 2)]
    worst = 0.0
    analytic_ok = True
    for fam in families:
        lhs_ref, rhs_ref = oracles.cfhs_sides(*fam)
        res = cfhs_check(fam[0](fine.nodes), fine)
        analytic_ok &= res.holds
        worst = max(worst, abs(res.lhs - lhs_ref), abs(res.rhs - rhs_ref))
    ok = failures == 0 and analytic_ok and worst <= 1e-5
    verdict(
        "C6 CFHS inequality",
        ok,
        f"{len(snaps)} trajectory snapshots, {failures} failures; 6 analytic profiles hold={analytic_ok}, "
        f"max oracle mismatch={worst:.2e} (<=1e-5)",
    )


# -- 7. cross-backend agreement ------------------------------------------------


def test_c7_cross_backend(verdict):
    def gaps(n, m):
        base = fixed_seed(n, t_end=5.0, sample_every=10**6, galerkin_modes=m)
        fd = solver_fd.run(base, keep_snapshots=False)
        gal = galerkin.run(replace(base, scheme="galerkin"), keep_snapshots=False)
        return state_gaps(fd.final, gal.final, base.grid)

    coarse, fine = gaps(512, 32), gaps(1024, 64)
    ratios = {k: coarse[k] / fine[k] for k in coarse}
    below = all(v <= 1e-2 for v in coarse.values())
    halving = all(1.5 <= q <= 3.0 for q in ratios.values())
    verdict(
        "C7 cross-backend agreement",
        below and halving,
        "gaps n=512,m=32: "
        + " ".join(f"{k}={v:.2e}" for k, v in coarse.items())
        + " (<=1e-2); reduction under refinement: "
        + " ".join(f"{k}={q:.2f}" for k, q in ratios.items())
        + " (in [1.5, 3])",
    )


# -- 8. stability ----------------------------------------------------------------


def test_c8_stability(verdict):
    scenario = Scenario(
        a=0.0,
        b=1.0,
        mu=0.5,
        u0=Profile.make("sine", amplitude=0.1),
        v0=Profile.make("constant", value=0.0),
        theta0=Profile.make("cosine", offset=1.0, amplitude=0.5),
        t_end=10.0,
        n=256,
        sample_every=20,
    )
    big = stability_pair(scenario, delta0=1e-3)
    small = stability_pair(scenario, delta0=5e-4)
    zero = stability_pair(scenario, delta0=0.0)
    spread = abs(big.final_ratio - small.final_ratio) / small.final_ratio
    exact_zero = bool(np.all(zero.deltas == 0.0))
    verdict(
        "C8 stability",
        spread <= 0.25 and exact_zero,
        f"delta(T)/delta0: {big.final_ratio:.6f} (1e-3) vs {small.final_ratio:.6f} (5e-4), "
        f"spread={spread:.2e} (<=25%); zero perturbation gives delta==0: {exact_zero}",
    )


# -- 9. steady state -------------------------------------------------------------


def test_c9_fixed_point(verdict):
    worst = 0.0
    g = make_grid(0, 1, 64)
    dt = 0.9 * g.dx
    for scheme, backend in (("fd", solver_fd), ("galerkin", galerkin)):
        for mu in (-1.0, 0.0, 0.5, 2.0):
            cfg = ProblemConfig(
                grid=g, mu=mu, u0=0.0, v0=0.0, theta0=1.7, t_end=10_000 * dt, dt=dt,
                scheme=scheme, galerkin_modes=8, sample_every=100,
            )
            r = backend.run(cfg)
            assert r.steps == 10_000
            for s in r.snapshots:
                worst = max(worst, np.abs(s.u).max(), np.abs(s.v).max(), np.abs(s.theta - 1.7).max())
    verdict("C9 steady state", worst <= 1e-12, f"max deviation over 1e4 steps, 2 backends x 4 mu = {worst:.1e} (<=1e-12)")
