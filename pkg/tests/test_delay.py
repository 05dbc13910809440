import math

import numpy as np
import pytest

from fcdelay.continuation import ContinuationConfig, basis, \
    build_continuation, reconstruction_error
from fcdelay.delay import (T_MAX, AllFailed, DegenerateFit, ErrorCurve,
                           MEstimate, NoTransition, QuadraticFit,
                           WindowPolicy, analyze, apply_phase_shift,
                           base_grid, critical_time, detect_growth_window,
                           estimate_delay, extended_grid,
                           extrapolate_to_threshold, fit_growth_region,
                           plateau_level, select_for_average, sweep_delay)
from fcdelay.spectrum import RescaledGrid, SampledResponse, \
    rescale_and_symmetrize
from fcdelay.synth import NoiseSpec, sample


def _causal_grid(n=81, M=6, seed=0):
    rng = np.random.default_rng(seed)
    xs = np.linspace(-0.5, 0.5, n)
    alphas = rng.normal(size=M) / np.arange(1, M + 1) ** 2
    return RescaledGrid(xs, basis(xs, M, 2.0) @ alphas, 1.0, True)


def _curve(ts, errs, M=10):
    ts = np.asarray(ts, float)
    errs = np.asarray(errs, float)
    return ErrorCurve(M, ts, errs, errs, 0.5)


def test_phase_shift_identity_and_magnitude():
    g = _causal_grid()
    assert np.array_equal(apply_phase_shift(g, 0.0).values, g.values)
    s = apply_phase_shift(g, 2.7)
    np.testing.assert_allclose(np.abs(s.values), np.abs(g.values), rtol=1e-15)
    np.testing.assert_allclose(s.values[::-1], np.conj(s.values), atol=1e-15)
    with pytest.raises(ValueError):
        apply_phase_shift(g, -1.0)


def test_removing_the_delay_restores_causality():
    tau = 1.7
    g = _causal_grid()
    delayed = g.with_values(g.values * np.exp(-1j * g.xs * tau))
    back = apply_phase_shift(delayed, tau)
    np.testing.assert_allclose(back.values, g.values, atol=1e-14)
    cont, _ = build_continuation(back, ContinuationConfig(10), constants=False)
    assert reconstruction_error(back, cont).err_re_inf < 1e-12


def test_grids():
    g = base_grid(120)
    assert len(g) == 120 and g[0] == 0 and g[-1] == pytest.approx(T_MAX)
    assert np.all(np.diff(g) > 0)
    e = extended_grid(120, 2 * T_MAX)
    assert e[-1] == pytest.approx(2 * T_MAX)
    ratio = np.log(g[2] / g[1])
    assert np.log(e[2] / e[1]) == pytest.approx(ratio, rel=0.02)
    with pytest.raises(ValueError):
        base_grid(2)


def test_sweep_matches_direct_solves():
    g = rescale_and_symmetrize(sample("dawson", 100))
    cfg = ContinuationConfig(60, xi=1e-8)
    ts = [0.0, 1.0, 5.0]
    c = sweep_delay(g, cfg, ts)
    assert len(c) == 3 and c.M == 60
    for t, e in zip(ts, c.errs):
        cont, _ = build_continuation(apply_phase_shift(g, t), cfg,
                                     constants=False)
        ref = reconstruction_error(apply_phase_shift(g, t), cont).err_re_inf
        assert e == pytest.approx(ref, rel=1e-6)
    np.testing.assert_allclose(c.t_seconds, np.array(ts) * g.scale_a)


def test_sweep_rejects_negative_delays():
    with pytest.raises(ValueError):
        sweep_delay(_causal_grid(), ContinuationConfig(4), [0.0, -1.0])


def test_exact_model_recovery():
    a2, a1, a0 = 0.1, -0.5, 1.0
    u = np.linspace(-20, -5, 40)
    ts = np.exp(a2 * u ** 2 + a1 * u + a0)
    order = np.argsort(ts)
    c = _curve(ts[order], np.exp(u)[order])
    fit = fit_growth_region(c, window=(0, 39))
    np.testing.assert_allclose(fit.coeffs, [a2, a1, a0], rtol=1e-9)
    assert fit.n_points == 40 and fit.rms_residual < 1e-9


def _synthetic_growth(t0=3.0, plateau=1e-13, n=120):
    ts = base_grid(n)
    errs = np.where(ts <= t0, plateau,
                    plateau * np.exp(4.0 * np.maximum(ts - t0, 0)))
    return _curve(ts, np.minimum(errs, 1.0))


def test_detect_growth_window():
    c = _synthetic_growth()
    lo, hi, top = detect_growth_window(c.errs, 1e-13)
    assert c.ts[lo] > 3.0
    assert np.all(c.errs[lo:hi + 1] > 1e-12)
    assert np.all(c.errs[lo:hi + 1] <= top)
    assert np.all(np.diff(c.errs[lo:hi + 1]) > 0)
    assert detect_growth_window(np.full(50, 1e-13), 1e-13) is None


def test_no_transition():
    with pytest.raises(NoTransition):
        fit_growth_region(_curve(base_grid(50), np.full(50, 1e-13)))


def test_degenerate_fit():
    flat = QuadraticFit(1.0, 0.0, 0.0, (0, 3), (1, 2), (1e-10, 1e-5), 0.0, 4)
    with pytest.raises(DegenerateFit):
        extrapolate_to_threshold(flat, 1e-13)
    with pytest.raises(DegenerateFit):
        critical_time(flat, _synthetic_growth(), 1e-13)


def test_critical_time_level_choice():
    fit = QuadraticFit(0.0, 0.1, 0.0, (0, 3), (1, 2), (1e-10, 1e-5), 0.0, 4)
    low = _curve([0, 1], [5e-13, 1])
    t, out = critical_time(fit, low, 1e-13)
    assert t == pytest.approx(math.exp(0.1 * math.log(1e-13)))
    assert out
    high = _curve([0, 1], [1e-8, 1])
    t, out = critical_time(fit, high, 1e-13)
    assert t == pytest.approx(math.exp(0.1 * math.log(1e-8)))
    assert not out


def test_vertex_clamp():
    # parabola turning at u = -20, left of the window
    fit = QuadraticFit(0.0, 4.0, 0.1, (0, 3), (1, 2),
                       (math.exp(-15), math.exp(-5)), 0.0, 4)
    vertex = fit.log_time(-20.0)
    assert fit.log_time(math.log(1e-13)) == pytest.approx(vertex)
    assert fit.log_time(-10.0) == pytest.approx(0.1 * 100 - 40)


def test_plateau_level():
    c = _curve(np.arange(100.0), np.r_[np.full(20, 2e-13), np.ones(80)])
    assert plateau_level(c) == pytest.approx(2e-13)


def test_narrowing_policy():
    p = WindowPolicy()
    assert p.narrowing(1e-13, 1e-13) is None
    assert p.narrowing(1e-5, 1e-13) == 0.6
    assert WindowPolicy(narrow=None).narrowing(1e-5, 1e-13) is None
    assert WindowPolicy(narrow=0.5).narrowing(1e-13, 1e-13) == 0.5
    with pytest.raises(ValueError):
        WindowPolicy(narrow=1.5).narrowing(1e-13, 1e-13)


def _est(M, plateau, rms):
    fit = QuadraticFit(0, 1, 0, (0, 3), (1, 2), (1, 2), rms, 4)
    return MEstimate(M, 1.0, 1.0, "extrapolate", fit, plateau)


def test_select_for_average():
    es = [_est(100, 1e-5, 0.0)]
    es += [_est(200 + 100 * k, 1e-13, 0.1 * (k + 1)) for k in range(11)]
    select_for_average(es, 1e-13)
    # the noisy one is skipped, then the worst of eleven by residual
    assert [e.included for e in es] == [False] + [True] * 10 + [False]
    # no plateau at the cutoff: every estimate is eligible
    es = [_est(100, 1e-5, 0.0), _est(200, 1e-5, 0.1)]
    select_for_average(es, 1e-13)
    assert all(e.included for e in es)


def test_analyze_dawson():
    g = rescale_and_symmetrize(sample("dawson", 200))
    e = analyze(g, ContinuationConfig(200))
    assert e.seconds == pytest.approx(0.125, rel=0.05)
    assert e.fit.n_points >= 4
    assert e.plateau < 1e-10
    c = analyze(g, ContinuationConfig(200), strategy="critical")
    assert c.strategy == "critical"
    with pytest.raises(ValueError):
        analyze(g, ContinuationConfig(200), strategy="guess")


def _noise_grid(n=101, seed=1):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v[0] = v[0].real
    xs = np.linspace(-0.5, 0.5, 2 * n - 1)
    return RescaledGrid(xs, np.concatenate([np.conj(v[:0:-1]), v]), 1.0, True)


def test_incoherent_data_has_no_transition():
    with pytest.raises(NoTransition):
        analyze(_noise_grid(), ContinuationConfig(60))


def test_estimate_delay_partial_and_total_failure():
    resp = sample("dawson", 150)
    g = _noise_grid()
    noise = SampledResponse(np.linspace(0, 1, 101), g.values[100:])

    def source(M):
        return noise if M == 60 else resp

    est = estimate_delay(source, [150, 60])
    assert [e.M for e in est.per_m] == [150]
    assert "NoTransition" in est.failures[60]
    assert est.averaged == est.per_m[0].seconds
    with pytest.raises(AllFailed):
        estimate_delay(noise, [50, 60])
    with pytest.raises(ValueError):
        estimate_delay(noise, [])
    with pytest.raises(ValueError):
        estimate_delay(noise, [200])


def test_estimate_delay_with_noise_raises_plateau():
    resp = sample("dawson", 200)
    est = estimate_delay(resp, [200], noise=NoiseSpec(1e-6))
    assert 1e-7 < est.per_m[0].plateau < 1e-5
    assert est.per_m[0].narrowed == 0.6
