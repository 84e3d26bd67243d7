import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermostring import Profile
from thermostring.checks import CHECKS
from thermostring.core import ConfigError, NonpositiveTemperatureError
from thermostring.harness import (
    CSV_HEADER,
    Perturbation,
    compare_backends,
    read_csv,
    refinement_sweep,
    run_many,
    run_scenario,
    stability_pair,
)
from thermostring.scenario import (
    CheckSpec,
    Scenario,
    ScenarioError,
    parse_scenario,
    parse_scenario_with_warnings,
    serialize,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """\
domain: {a: 0.0, b: 1.0}
mu: 0.5
initial:
  u0: {profile: constant, value: 0.0}
  v0: {profile: constant, value: 0.0}
  theta0: {profile: constant, value: 2.0}
grid: {n: 32}
time: {dt: 0.025, t_end: 0.25, sample_every: %d}
checks: [positivity, entropy-monotone, energy-conservation, fixed-point, momentum-residual]
"""


@pytest.mark.parametrize("every", [1, 3, 4, 10])
def test_minimal_scenario_rows_and_verdicts(tmp_path, every):
    scenario = parse_scenario(MINIMAL % every)
    result, report = run_scenario(scenario, out_dir=tmp_path)
    assert report.passed
    rows = read_csv(tmp_path / "diagnostics.csv")
    assert len(rows) == 1 + math.ceil(10 / every)
    assert rows[-1].t == pytest.approx(0.25, abs=1e-14)
    assert [c["name"] for c in json.loads((tmp_path / "report.json").read_text())["checks"]] == [
        c.name for c in scenario.checks
    ]


def test_csv_header_order(tmp_path):
    run_scenario(parse_scenario(MINIMAL % 5), out_dir=tmp_path)
    header = (tmp_path / "diagnostics.csv").read_text().splitlines()[0]
    assert header == (
        "t,energy,entropy,entropy_production,fisher,sup_theta,inf_theta,u_h1,ut_l2,"
        "theta_l2_err,cumulative_production,momentum_residual_l2"
    )
    assert header.split(",") == CSV_HEADER


def test_rejected_scenario_writes_nothing(tmp_path):
    text = (MINIMAL % 1).replace("theta0: {profile: constant, value: 2.0}", "theta0: {profile: cosine, offset: 1.0}")
    out = tmp_path / "out"
    with pytest.raises(NonpositiveTemperatureError):
        run_scenario(parse_scenario(text), out_dir=out)
    assert not out.exists()


def test_run_is_deterministic(tmp_path):
    text = (SCENARIOS / "fixed_seed.scn").read_text().replace("t_end: 50.0", "t_end: 2.0").replace("n: 256", "n: 64")
    for d in ("a", "b"):
        run_scenario(parse_scenario(text), out_dir=tmp_path / d)
    for f in ("diagnostics.csv", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_fixed_seed_short_verdicts():
    text = (SCENARIOS / "fixed_seed.scn").read_text().replace("t_end: 50.0", "t_end: 5.0")
    _, report = run_scenario(parse_scenario(text), write=False)
    verdicts = {c.name: c.status for c in report.checks}
    assert verdicts["entropy-monotone"] == "pass" and verdicts["positivity"] == "pass"
    assert report.passed


def test_report_carries_metadata():
    _, report = run_scenario(parse_scenario(MINIMAL % 2), write=False)
    d = report.to_dict()
    assert d["steps"] == 10 and len(d["config_hash"]) == 16
    assert "wall_time" not in d and report.wall_time >= 0
    for c in d["checks"]:
        assert set(c) == {"name", "status", "measured", "tolerance", "paper_ref"}
        assert c["tolerance"] == CHECKS[c["name"]].default_tolerance


def test_tolerance_override_flips_verdict():
    text = (MINIMAL % 1).replace(
        "checks: [positivity, entropy-monotone, energy-conservation, fixed-point, momentum-residual]",
        "checks: [{name: positivity, tolerance: 5.0}]",
    )
    _, report = run_scenario(parse_scenario(text), write=False)
    assert not report.passed and report.checks[0].measured == 2.0


def test_strict_rejects_unknown_keys_with_line():
    text = (MINIMAL % 1).replace("grid: {n: 32}", "grid: {n: 32, nx: 64}")
    with pytest.raises(ScenarioError, match=r"s\.yaml:7: grid\.nx"):
        parse_scenario(text, "s.yaml")
    scenario, warnings = parse_scenario_with_warnings(text, "s.yaml", strict=False)
    assert scenario.n == 32 and any("grid.nx" in w for w in warnings)


@pytest.mark.parametrize(
    "old,new,match",
    [
        ("mu: 0.5", "mu: fast", "mu"),
        ("mu: 0.5\n", "", "missing required key 'mu'"),
        ("positivity,", "positivty,", "unknown check"),
        ("positivity,", "energy-conservation,", "only once"),
        ("{profile: constant, value: 0.0}", "{profile: spline}", "profile"),
        ("t_end: 0.25", "t_end: -1", "t_end"),
        ("{n: 32}", "{n: 32.5}", "integer"),
    ],
)
def test_scenario_errors(old, new, match):
    with pytest.raises(ScenarioError, match=match):
        parse_scenario((MINIMAL % 1).replace(old, new, 1))


def test_inline_arrays():
    x = np.linspace(0, 1, 9)
    text = (MINIMAL % 1).replace("{n: 32}", "{n: 8}").replace(
        "theta0: {profile: constant, value: 2.0}", f"theta0: {[float(v) for v in 1 + x]}"
    )
    s = parse_scenario(text)
    assert s.theta0 == tuple(1 + x)
    assert parse_scenario(serialize(s)) == s


profiles = st.one_of(
    st.builds(lambda v: Profile.make("constant", value=v), st.floats(0.1, 5)),
    st.builds(
        lambda a, m, o: Profile.make("cosine", amplitude=a, mode=m, offset=o),
        st.floats(-1, 1),
        st.integers(1, 5),
        st.floats(1.5, 3),
    ),
    st.builds(
        lambda a, c, w: Profile.make("gaussian-bump", amplitude=a, center=c, width=w, offset=2.0),
        st.floats(0, 1),
        st.floats(0.1, 0.9),
        st.floats(0.05, 0.5),
    ),
)
zero_end = st.one_of(
    st.builds(lambda a, m: Profile.make("sine", amplitude=a, mode=m), st.floats(-1, 1), st.integers(1, 6)),
    st.builds(lambda a, p: Profile.make("polynomial-bump", amplitude=a, power=p), st.floats(-1, 1), st.integers(1, 4)),
    st.just(Profile.make("constant", value=0.0)),
)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-5, 0),
    length=st.floats(0.5, 5),
    mu=st.floats(-3, 3),
    u0=zero_end,
    v0=zero_end,
    theta0=profiles,
    n=st.integers(16, 512),
    scheme=st.sampled_from(["fd", "galerkin"]),
    dt=st.one_of(st.just("auto"), st.floats(1e-4, 1e-3)),
    every=st.integers(1, 50),
    checks=st.lists(st.sampled_from(sorted(CHECKS)), unique=True, max_size=4),
    tol=st.one_of(st.none(), st.floats(0, 1)),
)
def test_scenario_round_trip(a, length, mu, u0, v0, theta0, n, scheme, dt, every, checks, tol):
    s = Scenario(
        a=a, b=a + length, mu=mu, u0=u0, v0=v0, theta0=theta0, t_end=1.0, n=n, scheme=scheme, modes=2,
        dt=dt, sample_every=every, checks=tuple(CheckSpec(c, tol) for c in checks), output="out/x",
    )
    assert parse_scenario(serialize(s)) == s


def test_overrides_win():
    s = parse_scenario(MINIMAL % 1).with_overrides(mu=2.0, n=None, scheme="galerkin")
    assert s.mu == 2.0 and s.n == 32 and s.scheme == "galerkin"


def test_compare_fixed_point_is_exact():
    gaps = compare_backends(SCENARIOS / "fixed_point.scn")
    assert gaps == {"u": 0.0, "v": 0.0, "theta": 0.0}


def test_compare_coarse_gap_is_visible():
    gaps = compare_backends(SCENARIOS / "coarse_compare.scn")
    assert max(gaps.values()) > 1e-6


def test_stability_zero_perturbation():
    text = (SCENARIOS / "fixed_seed.scn").read_text().replace("t_end: 50.0", "t_end: 2.0").replace("n: 256", "n: 64")
    report = stability_pair(parse_scenario(text), delta0=0.0)
    assert report.delta0 == 0.0 and np.all(report.deltas == 0.0)


def test_stability_half_perturbation_halves_delta():
    text = (SCENARIOS / "fixed_seed.scn").read_text().replace("t_end: 50.0", "t_end: 3.0").replace("n: 256", "n: 64")
    s = parse_scenario(text)
    full = stability_pair(s, delta0=1e-3)
    half = stability_pair(s, delta0=5e-4)
    assert full.delta0 == pytest.approx(1e-3, rel=1e-12)
    assert half.deltas[-1] / full.deltas[-1] == pytest.approx(0.5, rel=0.2)


def test_stability_rejects_perturbation_that_moves_ends():
    s = parse_scenario(MINIMAL % 1)
    with pytest.raises(ConfigError):
        stability_pair(s, Perturbation(du0=Profile.make("constant", value=1.0)), delta0=1e-3)


def test_sweep_fixed_point_exact():
    table = refinement_sweep(SCENARIOS / "fixed_point.scn", 3)
    assert table.orders == {m: ["exact"] for m in ("u", "v", "theta")}
    assert all(e == 0.0 for errs in table.errors.values() for e in errs)


def test_sweep_wave_order():
    table = refinement_sweep(SCENARIOS / "wave_mms.scn", 3)
    for m in ("u", "v"):
        assert 1.8 <= table.orders[m][0] <= 2.2
    assert table.orders["theta"] == ["exact"]


def test_sweep_wave_against_exact_solution():
    def exact(x, t):
        return (
            np.sin(np.pi * x) * np.cos(np.pi * t),
            -np.pi * np.sin(np.pi * x) * np.sin(np.pi * t),
            np.ones_like(x),
        )

    table = refinement_sweep(SCENARIOS / "wave_mms.scn", 3, exact=exact)
    assert table.reference == "exact"
    for m in ("u", "v"):
        assert all(1.8 <= o <= 2.2 for o in table.orders[m])


def test_sweep_heat_order():
    table = refinement_sweep(SCENARIOS / "heat_mms.scn", 3)
    assert table.orders["theta"][0] >= 0.9
    assert table.lines()[0].startswith("n,dt,err_u")


def test_sweep_resource_guard():
    s = parse_scenario((SCENARIOS / "fixed_seed.scn").read_text())
    with pytest.raises(ConfigError, match="guard"):
        refinement_sweep(s, 3)


def test_sweep_needs_three_levels():
    with pytest.raises(ValueError):
        refinement_sweep(SCENARIOS / "fixed_point.scn", 2)


def test_parallel_matches_sequential():
    s = parse_scenario((SCENARIOS / "coarse_compare.scn").read_text())
    configs = [s.to_config(), s.with_overrides(scheme="galerkin").to_config()]
    seq = run_many(configs, workers=1)
    par = run_many(configs, workers=2)
    for a, b in zip(seq, par):
        assert a.rows == b.rows


def test_thread_cap_from_environment(monkeypatch):
    from thermostring.harness import _worker_count

    monkeypatch.setenv("THERMOSTRING_THREADS", "1")
    assert _worker_count(None, 8) == 1
    monkeypatch.setenv("THERMOSTRING_THREADS", "3")
    assert _worker_count(None, 8) == 3
    assert _worker_count(None, 2) == 2
