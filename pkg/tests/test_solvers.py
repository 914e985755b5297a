import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relaxgpe.functionals import (
    KappaRule,
    ProblemSpec,
    compute_M,
    energy_original,
    truncated_relaxed_energy,
)
from relaxgpe.grid import SpectralGrid, WaveField, norms
from relaxgpe.harness import dissipation_audit
from relaxgpe.problems import builtin_problem
from relaxgpe.solvers import (
    IterationTrace,
    SolverConfig,
    SolverError,
    residual,
    run_adaptive,
    run_fixed,
    slp_step,
    solve,
)


def harmonic(*xs):
    return 0.5 * sum(x * x for x in xs)


@pytest.fixture(scope="module")
def lattice():
    # the lattice problem on a coarse grid keeps runs short
    return builtin_problem("ex1d_lattice", h=1 / 8)


def gaussian(grid, width=1.0):
    r2 = sum(x * x for x in grid.coords)
    return WaveField(grid, np.exp(-r2 / (2 * width**2))).normalized()


# -- config -------------------------------------------------------------------


def test_config_modes():
    assert not SolverConfig(tau=0.1).adaptive
    cfg = SolverConfig(tau0=0.1, tauf=1e-6, r=10)
    assert cfg.adaptive
    assert len(cfg.stage_taus()) == 6
    assert cfg.stage_taus()[-1] == pytest.approx(1e-6)
    assert SolverConfig(tau0=0.1, tauf=0.1, r=2).stage_taus() == [0.1]
    assert len(SolverConfig(tau0=1 / 64, tauf=1 / 128, r=2).stage_taus()) == 2
    assert len(SolverConfig(tau0=1.0, tauf=0.3, r=2).stage_taus()) == 2


@pytest.mark.parametrize(
    "kw",
    [
        {},
        {"tau": 0.0},
        {"tau": 0.1, "tau0": 0.1, "tauf": 0.01, "r": 10},
        {"tau0": 0.1, "tauf": 0.2, "r": 10},
        {"tau0": 0.1, "tauf": 0.01, "r": 1.0},
        {"tau0": 0.1, "tauf": 0.01},
        {"tau": 0.1, "tol": 0.0},
        {"tau": 0.1, "n_max": 0},
        {"tau": 0.1, "order": 3},
        {"tau": 0.1, "kappa_rule": "bogus"},
    ],
)
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_config_kappa_rule_is_parsed():
    assert SolverConfig(tau=0.1, kappa_rule="theory").kappa_rule == KappaRule.theory()
    assert SolverConfig(tau=0.1, kappa_rule=7).kappa_rule == KappaRule.fixed(7.0)


# -- residual -----------------------------------------------------------------


def test_residual_examples():
    g = SpectralGrid(((0.0, 1.0),), (16,))
    rng = np.random.default_rng(0)
    f = WaveField(g, rng.standard_normal(16))
    assert residual(f, f, 0.1) == 0.0
    c = 0.3 - 0.4j
    assert residual(f.with_values(f.values + c), f, 0.1) == pytest.approx(abs(c) / 0.1)
    shifted = f.with_values(f.values + 0.01)
    assert residual(shifted, f, 0.05) == pytest.approx(2 * residual(shifted, f, 0.1))
    with pytest.raises(ValueError):
        residual(f, f, 0.0)


# -- single step --------------------------------------------------------------


@pytest.mark.parametrize("order", [1, 2])
def test_slp_step_constant_fixed_point(order):
    g = SpectralGrid.square(-4, 4, 16, dim=2)
    p = ProblemSpec(g, np.zeros(g.shape), 1e-12)
    c = WaveField.constant(g, 1 / np.sqrt(g.volume))
    out = slp_step(c, p, 0.1, kappa=1.0, order=order)
    np.testing.assert_allclose(out.values, c.values, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(0, 2 * np.pi), order=st.sampled_from([1, 2]))
def test_slp_step_phase_equivariant_and_unit(seed, theta, order):
    g = SpectralGrid(((-8.0, 8.0),), (64,))
    p = ProblemSpec.from_function(g, harmonic, 40.0)
    rng = np.random.default_rng(seed)
    f = WaveField(g, rng.standard_normal(64) + 1j * rng.standard_normal(64)).normalized()
    u = np.exp(1j * theta)
    a = slp_step(f, p, 0.1, 50.0, order=order)
    b = slp_step(f * u, p, 0.1, 50.0, order=order)
    np.testing.assert_allclose(b.values, a.values * u, atol=1e-12)
    assert abs(norms(a)[0] - 1) < 1e-12


def test_slp_step_requires_unit_norm(lattice):
    p, f0, _ = lattice
    with pytest.raises(ValueError):
        slp_step(f0 * 1.01, p, 0.1, 10.0)


def test_slp_step_degenerate_direction():
    g = SpectralGrid(((0.0, 1.0),), (8,))
    p = ProblemSpec(g, np.zeros(8), 0.0)
    c = WaveField.constant(g, 1.0)
    # (1/tau + 2 kappa) f vanishes for kappa = -1/(2 tau)
    with pytest.raises(SolverError):
        slp_step(c, p, 0.5, kappa=-1.0)


@pytest.mark.parametrize("order", [1, 2])
def test_slp_step_decreases_truncated_energy_with_theory_kappa(lattice, order):
    p, f, _ = lattice
    m = compute_M(p)
    kappa = float(p.potential.max() + 3 * p.beta * m.m**2)
    for _ in range(20):
        new = slp_step(f, p, 0.1, kappa, m, order)
        before = truncated_relaxed_energy(f, p, 0.1, kappa, m, order)
        after = truncated_relaxed_energy(new, p, 0.1, kappa, m, order)
        assert after <= before + 1e-10
        f = new


# -- runs ---------------------------------------------------------------------


def test_run_fixed_infinite_tol_takes_one_step(lattice):
    p, f0, _ = lattice
    _, trace = run_fixed(f0, p, SolverConfig(tau=0.1, tol=np.inf))
    assert len(trace) == 1
    assert trace.converged


def test_run_fixed_max_iters_status(lattice):
    p, f0, _ = lattice
    f, trace = run_fixed(f0, p, SolverConfig(tau=0.1, tol=1e-14, n_max=5))
    assert len(trace) == 5
    assert trace.status == "max-iters"
    assert abs(norms(f)[0] - 1) < 1e-12


def test_run_fixed_normalizes_nearly_unit_start(lattice):
    p, f0, _ = lattice
    run_fixed(f0 * (1 + 1e-7), p, SolverConfig(tau=0.1, tol=np.inf))
    with pytest.raises(ValueError):
        run_fixed(f0 * 1.001, p, SolverConfig(tau=0.1, tol=np.inf))


def test_run_mode_mismatch(lattice):
    p, f0, _ = lattice
    with pytest.raises(ValueError):
        run_fixed(f0, p, SolverConfig(tau0=0.1, tauf=0.01, r=10))
    with pytest.raises(ValueError):
        run_adaptive(f0, p, SolverConfig(tau=0.1))


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("rule", ["adaptive", "theory"])
def test_runs_dissipate_and_stay_normalized(lattice, order, rule):
    p, f0, _ = lattice
    cfg = SolverConfig(order=order, tau=1 / 8, tol=1e-10, kappa_rule=rule, n_max=3000)
    f, trace = run_fixed(f0, p, cfg)
    report = dissipation_audit(trace)
    assert report.relaxed_violations == []
    assert report.original_violations == []
    assert abs(norms(f)[0] - 1) < 1e-12


def test_iterates_stay_normalized(lattice):
    p, f, _ = lattice
    for _ in range(50):
        f = slp_step(f, p, 0.1, 200.0, order=2)
        assert abs(norms(f)[0] - 1) < 1e-12


def test_adaptive_with_single_stage_equals_fixed(lattice):
    p, f0, _ = lattice
    fa, ta = run_adaptive(f0, p, SolverConfig(tau0=0.1, tauf=0.1, r=10, tol=1e-9))
    ff, tf = run_fixed(f0, p, SolverConfig(tau=0.1, tol=1e-9))
    np.testing.assert_array_equal(fa.values, ff.values)
    assert ta.e_relaxed == tf.e_relaxed
    assert ta.n_stages == 1


def test_adaptive_trace_structure(lattice):
    p, f0, _ = lattice
    cfg = SolverConfig(tau0=0.1, tauf=1e-3, r=10, tol=1e-9)
    _, trace = run_adaptive(f0, p, cfg)
    assert trace.n_stages == 3
    assert sorted(set(trace.stage)) == [0, 1, 2]
    assert all(a < b for a, b in zip(trace.iters, trace.iters[1:]))
    assert all(a >= b for a, b in zip(trace.tau, trace.tau[1:]))
    assert len(trace.stage_status) == 3
    assert [s.tau for s in trace.starts] == pytest.approx(cfg.stage_taus())


def test_runs_are_deterministic(lattice):
    p, f0, _ = lattice
    cfg = SolverConfig(order=2, tau=0.1, tol=1e-9)
    fa, ta = solve(f0, p, cfg)
    fb, tb = solve(f0, p, cfg)
    np.testing.assert_array_equal(fa.values, fb.values)
    for name in ("iter", "tau", "kappa", "E_relaxed", "E_original", "residual", "stage"):
        np.testing.assert_array_equal(ta.column(name), tb.column(name))


def test_runs_are_phase_equivariant(lattice):
    p, f0, _ = lattice
    u = np.exp(0.7j)
    cfg = SolverConfig(tau=0.1, tol=1e-8)
    fa, ta = solve(f0, p, cfg)
    fb, tb = solve(f0 * u, p, cfg)
    np.testing.assert_allclose(fb.values, fa.values * u, atol=1e-12)
    np.testing.assert_allclose(tb.e_relaxed, ta.e_relaxed, rtol=1e-12)
    assert len(ta) == len(tb)


def test_harmonic_ground_state_within_order_tau():
    g = SpectralGrid(((-16.0, 16.0),), (256,))
    p = ProblemSpec.from_function(g, harmonic, 0.0)
    f0 = gaussian(g, width=1.5)
    errors = []
    for tau in (0.1, 0.05):
        f, trace = run_fixed(f0, p, SolverConfig(tau=tau, tol=1e-10))
        assert trace.converged
        errors.append(abs(energy_original(f, p) - 0.5))
    assert errors[0] < 0.1 * 1.0
    assert errors[1] < errors[0]


def test_trace_append_rejects_non_increasing():
    t = IterationTrace()
    t.append(1, 0.1, 1.0, 2.0, 3.0, 0.5, 10, 0)
    with pytest.raises(ValueError):
        t.append(1, 0.1, 1.0, 2.0, 3.0, 0.5, 11, 0)
    assert list(t.rows())[0][0] == 1
    assert t.column("E_original").tolist() == [3.0]
