import math

import numpy as np
import pytest

from gpcollapse import asymptotics, gp2d, potential
from gpcollapse.asymptotics import SweepOptions, fit_power_law, predicted_laws
from gpcollapse.errors import ConfigError, NoFitError
from gpcollapse.gp2d import Field2D, Frame, MinimizeOptions
from gpcollapse.potential import LambdaReport, TrapSpec, Well, lambda_values


# -- fits ------------------------------------------------------------------------


def test_exact_power_law():
    f = fit_power_law([(1, 3), (4, 6), (9, 9)])
    assert f.exponent == pytest.approx(0.5, abs=1e-12)
    assert f.prefactor == pytest.approx(3.0, rel=1e-12)
    assert f.r_squared == pytest.approx(1.0)


def test_constant_data():
    f = fit_power_law([(1, 2), (2, 2), (5, 2)])
    assert f.exponent == pytest.approx(0.0, abs=1e-12)
    assert 0 <= f.r_squared <= 1


def test_fit_preconditions():
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        fit_power_law([(1, 1), (2, -2), (3, 3)])


def test_noisy_fit_r_squared_in_range():
    rng = np.random.default_rng(0)
    x = np.geomspace(1e-3, 1, 10)
    f = fit_power_law(zip(x, 2 * x**0.7 * np.exp(0.05 * rng.standard_normal(10))))
    assert 0 <= f.r_squared <= 1
    assert f.exponent == pytest.approx(0.7, abs=0.05)


# -- predicted laws ------------------------------------------------------------------


def test_p2_prefactors(harmonic, consts):
    rep = lambda_values(harmonic, consts)
    pr = predicted_laws(rep, consts)
    expect = 2 * rep.lam**2 / consts.a_star
    assert pr.energy_prefactor == pytest.approx(expect, rel=1e-14)
    assert pr.l4_prefactor == pytest.approx(expect, rel=1e-14)
    assert (pr.energy_exponent, pr.l4_exponent) == (0.5, -0.5)


def test_prefactor_lambda_scaling(consts):
    rep = LambdaReport(2.0, (1.5,), (1.0,), (0,))
    rep2 = LambdaReport(2.0, (3.0,), (1.0,), (0,))
    a, b = predicted_laws(rep, consts), predicted_laws(rep2, consts)
    assert b.energy_prefactor == pytest.approx(4 * a.energy_prefactor)
    assert b.l4_prefactor == pytest.approx(4 * a.l4_prefactor)


def test_general_p(consts):
    spec = TrapSpec((Well((0, 0), 4),))
    pr = predicted_laws(lambda_values(spec, consts), consts)
    assert pr.energy_exponent == pytest.approx(4 / 6)
    assert pr.l4_exponent == pytest.approx(-2 / 6)


def test_infinite_lambda_rejected(consts):
    with pytest.raises(ConfigError):
        predicted_laws(LambdaReport(2.0, (math.inf,), (math.inf,), ()), consts)


# -- profile distance ------------------------------------------------------------------


def test_distance_zero_for_reference(profile):
    g = gp2d.Grid(5.0, 128)
    lam = 1.9
    fld = Field2D(asymptotics.limit_profile(g, lam, profile), 5.0, frame=Frame.blowup((0, 0), 0.5))
    assert asymptotics.profile_distance(fld, lam, profile) == 0.0
    assert asymptotics.profile_distance(fld, lam, profile, q=4) == 0.0


def test_distance_frame_and_index_checks(profile, ho_ground):
    with pytest.raises(ValueError):
        asymptotics.profile_distance(ho_ground, 1.9, profile)
    fld = Field2D(np.ones((16, 16)), 1.0, frame=Frame.blowup((0, 0), 0.5))
    with pytest.raises(ValueError):
        asymptotics.profile_distance(fld, 1.9, profile, q=1)
    with pytest.raises(ValueError):
        asymptotics.profile_distance(fld, 1.9, profile, q=math.inf)


# -- concentration -----------------------------------------------------------------


def _bumps(centers, weights=None, L=3.0, n=193, s=0.15):
    weights = weights or [1.0] * len(centers)

    def fn(X, Y):
        return sum(w * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * s * s)) for (cx, cy), w in zip(centers, weights))

    return Field2D.from_function(fn, L, n)


def test_symmetric_bumps_equal_mass(double_well):
    c = asymptotics.concentration_index(_bumps([(-1, 0), (1, 0)]), double_well)
    assert abs(c.masses[0] - c.masses[1]) <= 1e-6
    assert c.masses[0] == pytest.approx(0.5, abs=1e-3)


def test_single_bump(double_well):
    c = asymptotics.concentration_index(_bumps([(1, 0)]), double_well)
    assert c.dominant == 1
    assert c.masses[1] == pytest.approx(1.0, abs=1e-3)
    assert c.masses[0] < 1e-6
    assert c.remainder == pytest.approx(0.0, abs=1e-3)


def test_overlapping_balls_rejected(double_well):
    with pytest.raises(ValueError):
        asymptotics.concentration_index(_bumps([(1, 0)]), double_well, rho=1.0)


def test_default_rho(double_well, harmonic):
    assert asymptotics.default_rho(double_well) == 0.5
    assert asymptotics.default_rho(harmonic) == 1.0


# -- sweep ------------------------------------------------------------------------


def test_sweep_entries(harmonic_sweep, a_star):
    rep = harmonic_sweep
    assert [e.a for e in rep.entries] == sorted(e.a for e in rep.entries)
    for e in rep.entries:
        assert e.eps == pytest.approx((a_star - e.a) ** 0.25, rel=1e-14)
        assert e.frame == "BlowUp" and e.converged
    assert len(rep.fit_entries()) == len(asymptotics.DEFAULT_WINDOW)


def test_sweep_laws(harmonic_sweep):
    rep = harmonic_sweep
    assert rep.energy_fit.exponent == pytest.approx(0.5, abs=0.03)
    assert rep.l4_fit.exponent == pytest.approx(-0.5, abs=0.03)
    assert 0 <= rep.energy_fit.r_squared <= 1


def test_energy_positive_decreasing(harmonic_sweep):
    e = [x.energy for x in harmonic_sweep.entries]
    assert all(v > 0 for v in e)
    assert all(b < a for a, b in zip(e, e[1:]))


def test_energy_ratio_bounded(harmonic_sweep):
    lo, hi = harmonic_sweep.energy_ratio_bounds()
    assert 0 < lo and hi / lo < 1.5


def test_l4_ratio_bounded(harmonic_sweep):
    lo, hi = harmonic_sweep.l4_ratio_bounds()
    assert 0 < lo and hi / lo < 1.5


def test_mu_eps2_negative_bounded(harmonic_sweep):
    v = harmonic_sweep.mu_eps2()
    assert all(-10 < x < 0 for x in v)


def test_distances_shrink(harmonic_sweep):
    d = [e.distance for e in harmonic_sweep.entries]
    assert all(b <= a + 1e-2 for a, b in zip(d, d[1:]))
    at99 = [e.distance for e in harmonic_sweep.entries if abs(e.ratio - 0.99) < 1e-9]
    assert at99[0] <= 0.05


def test_sweep_records_failure(harmonic, a_star, profile):
    small = MinimizeOptions(n=96)
    opts = SweepOptions(blowup=small, lab=small)
    ratios = (0.5, 0.9, 0.95, 0.98, 0.99, 1.05)
    rep = asymptotics.sweep(harmonic, [r * a_star for r in ratios], opts, profile=profile)
    assert len(rep.entries) == 5
    assert len(rep.failures) == 1 and rep.failures[0].error == "ThresholdExceeded"
    assert rep.entries[0].frame == "Lab" and math.isnan(rep.entries[0].distance)
    assert rep.energy_fit is not None


def test_sweep_too_few_points(harmonic, a_star, profile):
    small = MinimizeOptions(n=96)
    with pytest.raises(NoFitError) as exc:
        asymptotics.sweep(harmonic, [0.95 * a_star], SweepOptions(blowup=small), profile=profile)
    assert exc.value.report is not None and len(exc.value.report.entries) == 1
    with pytest.raises(NoFitError):
        asymptotics.sweep(harmonic, [], profile=profile)


def test_relabeling_leaves_fits(a_star, profile):
    small = MinimizeOptions(n=96)
    opts = SweepOptions(blowup=small)
    spec = TrapSpec((Well((-1, 0), 2), Well((1.5, 0.5), 2)), potential.Envelope("const", 1.0))
    a_list = [r * a_star for r in (0.9, 0.95, 0.98, 0.99)]
    r1 = asymptotics.sweep(spec, a_list, opts, profile=profile)
    r2 = asymptotics.sweep(spec.permuted((1, 0)), a_list, opts, profile=profile)
    assert r1.energy_fit.exponent == pytest.approx(r2.energy_fit.exponent, rel=1e-9)
    assert r1.energy_fit.prefactor == pytest.approx(r2.energy_fit.prefactor, rel=1e-9)
    assert r1.l4_fit.exponent == pytest.approx(r2.l4_fit.exponent, rel=1e-9)


def test_symmetry_probe_small_coupling(double_well, a_star, profile):
    opts = MinimizeOptions(L=3.0, n=128, perturbation=0.05, seed=0)
    (probe,) = asymptotics.symmetry_probe(double_well, [0.1], opts, profile=profile)
    assert abs(probe.masses[0] - probe.masses[1]) < 0.05
    assert not probe.broken
