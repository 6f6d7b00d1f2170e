"""Collapse asymptotics: coupling sweeps, power-law fits, profile checks.

As a ↗ a*, with p the trap flatness and λ the smallest well scale,

    e(a)     ≈ (λ²/a*) (p+2)/p · (a* - a)^{p/(2+p)}
    ∫u_a⁴    ≈ (2λ²/a*)         · (a* - a)^{-2/(2+p)}

and ε u_a(x₀ + εx) → λQ(λx)/‖Q‖₂ with ε = (a* - a)^{1/(2+p)}.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gp2d, kwong
from .errors import ConfigError, NoFitError
from .potential import flatness, lambda_values

DEFAULT_WINDOW = (0.9, 0.93, 0.95, 0.97, 0.98, 0.99, 0.993, 0.995)
SYMMETRY_BREAKING_MASS = 0.9


@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor: float
    r_squared: float
    residuals: tuple  # ln y - fitted ln y, per point

    def to_dict(self):
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "residuals": list(self.residuals),
        }


def fit_power_law(pairs):
    """Least-squares line through (ln x, ln y): y ≈ prefactor · x^exponent."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError(f"power-law fit needs at least 3 points, got {len(pairs)}")
    xy = np.array(pairs, dtype=float)
    if np.any(xy <= 0) or not np.all(np.isfinite(xy)):
        raise ValueError("power-law fit needs finite positive x and y")
    lx, ly = np.log(xy[:, 0]), np.log(xy[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    ss_res = float(np.sum(res**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return FitResult(float(slope), float(math.exp(intercept)), r2, tuple(float(r) for r in res))


@dataclass(frozen=True)
class PredictedLaws:
    energy_prefactor: float
    l4_prefactor: float
    energy_exponent: float
    l4_exponent: float

    def to_dict(self):
        return {
            "energy_prefactor": self.energy_prefactor,
            "l4_prefactor": self.l4_prefactor,
            "energy_exponent": self.energy_exponent,
            "l4_exponent": self.l4_exponent,
        }


def predicted_laws(lambda_report, constants):
    lam = lambda_report.lam
    if not math.isfinite(lam):
        raise ConfigError("λ is infinite: no well attains the flatness p", field="trap")
    p = lambda_report.p
    a_star = constants.a_star
    return PredictedLaws(
        energy_prefactor=lam**2 / a_star * (p + 2.0) / p,
        l4_prefactor=2.0 * lam**2 / a_star,
        energy_exponent=p / (2.0 + p),
        l4_exponent=-2.0 / (2.0 + p),
    )


def limit_profile(grid, lam, profile, a_star=None):
    """λQ(λ|x|)/‖Q‖₂ sampled on ``grid``."""
    if a_star is None:
        a_star = kwong.radial_moment(profile, 0)
    X, Y = grid.mesh()
    return lam * profile(lam * np.hypot(X, Y)) / math.sqrt(a_star)


def profile_distance(result, lam, profile, q=2.0):
    """Discrete L^q distance between a blow-up-frame minimizer and λQ(λx)/‖Q‖₂."""
    fld = result.field if isinstance(result, gp2d.MinimizeResult) else result
    if not fld.frame.is_blowup:
        raise ValueError("profile distance needs a blow-up-frame field")
    if not 2 <= q < math.inf:
        raise ValueError(f"norm index q must lie in [2, inf), got {q!r}")
    g = fld.grid
    ref = limit_profile(g, lam, profile)
    return float((np.sum(np.abs(fld.values - ref) ** q) * g.h**2) ** (1.0 / q))


@dataclass(frozen=True)
class Concentration:
    masses: tuple  # ∫_{|x - x_i| < ρ} u² per well
    remainder: float
    dominant: int
    rho: float

    @property
    def dominant_mass(self):
        return self.masses[self.dominant]


def default_rho(spec):
    sep = spec.min_separation()
    return 1.0 if not math.isfinite(sep) else 0.25 * sep


def concentration_index(fld, spec, rho=None):
    """Mass of u² in the lab-frame ball of radius ρ around each well.

    Blow-up-frame fields are mapped back to lab coordinates first.
    """
    if rho is None:
        rho = default_rho(spec)
    if not rho > 0:
        raise ValueError(f"radius must be positive, got {rho!r}")
    if spec.n > 1 and rho >= 0.5 * spec.min_separation():
        raise ValueError(
            f"balls of radius {rho} around the wells overlap (minimal separation {spec.min_separation()})"
        )
    g = fld.grid
    X, Y = g.mesh()
    xl, yl = fld.frame.to_lab(X, Y)
    # ∫u² dx = ∫w² dy under x = x₀ + εy, so the frame's own measure is used
    dens = fld.values**2 * g.h**2
    masses = []
    for w in spec.wells:
        inside = np.hypot(xl - w.x[0], yl - w.x[1]) < rho
        masses.append(float(dens[inside].sum()))
    total = float(dens.sum())
    return Concentration(tuple(masses), total - sum(masses), int(np.argmax(masses)), rho)


# ----------------------------------------------------------------------------
# sweep


@dataclass
class SweepOptions:
    window: tuple = (0.9, 0.995)  # a/a* range that uses the blow-up frame and enters the fits
    blowup: gp2d.MinimizeOptions = field(default_factory=gp2d.MinimizeOptions)
    lab: gp2d.MinimizeOptions = field(default_factory=gp2d.MinimizeOptions)
    wells: tuple | None = None  # None: every well in 𝒵
    rho: float | None = None
    workers: int = 1
    require_fit: bool = True


@dataclass(frozen=True)
class SweepEntry:
    a: float
    ratio: float
    eps: float
    energy: float
    l4: float
    mu: float
    masses: tuple
    frame: str
    well: int
    distance: float  # L² distance to the limit profile (blow-up entries only)
    converged: bool
    iterations: int
    residual: float


@dataclass(frozen=True)
class SweepFailure:
    a: float
    ratio: float
    error: str
    message: str


@dataclass
class SweepReport:
    a_star: float
    p: float
    lam: float
    entries: list
    failures: list
    predictions: PredictedLaws
    energy_fit: FitResult | None = None
    l4_fit: FitResult | None = None
    window: tuple = (0.9, 0.995)
    wells: tuple = ()

    def fit_entries(self):
        lo, hi = self.window
        return [
            e for e in self.entries
            if e.frame == "BlowUp" and lo - 1e-12 <= e.ratio <= hi + 1e-12
        ]

    def energy_ratio_bounds(self):
        """(min, max) of e(a)/(a* - a)^{p/(p+2)} over the fit window."""
        k = self.p / (self.p + 2.0)
        r = [e.energy / (self.a_star - e.a) ** k for e in self.fit_entries()]
        return (min(r), max(r)) if r else (math.nan, math.nan)

    def l4_ratio_bounds(self):
        """(min, max) of ‖u‖₄⁴ (a* - a)^{2/(p+2)} over the fit window."""
        k = 2.0 / (self.p + 2.0)
        r = [e.l4 * (self.a_star - e.a) ** k for e in self.fit_entries()]
        return (min(r), max(r)) if r else (math.nan, math.nan)

    def mu_eps2(self):
        return [e.mu * e.eps**2 for e in self.fit_entries()]

    def fits_dict(self):
        return {
            "a_star": self.a_star,
            "p": self.p,
            "lambda": self.lam,
            "window": list(self.window),
            "energy_fit": self.energy_fit.to_dict() if self.energy_fit else None,
            "l4_fit": self.l4_fit.to_dict() if self.l4_fit else None,
            "predictions": self.predictions.to_dict(),
            "energy_ratio_bounds": list(self.energy_ratio_bounds()),
            "l4_ratio_bounds": list(self.l4_ratio_bounds()),
            "failures": [
                {"a": f.a, "ratio": f.ratio, "error": f.error, "message": f.message} for f in self.failures
            ],
        }


def _run_entry(spec, a, a_star, p, lam_report, wells, opts, profile):
    ratio = a / a_star
    lo, hi = opts.window
    rho = opts.rho if opts.rho is not None else default_rho(spec)
    if ratio >= lo - 1e-12:
        best = None
        for i in wells:
            res = gp2d.minimize_rescaled(spec, a, i, opts.blowup, a_star=a_star, profile=profile)
            if best is None or res.energy < best[0].energy:
                best = (res, i)
        res, well = best
        lam_i = lam_report.lambda_per_well[well]
        dist = profile_distance(res, lam_i, profile) if math.isfinite(lam_i) else math.nan
    else:
        lab = replace(opts.lab)
        if isinstance(lab.init, str) and lab.init == "auto":
            lab.well = wells[0]
        res = gp2d.minimize(spec, a, lab, a_star=a_star, profile=profile)
        well = int(concentration_index(res.field, spec, rho).dominant)
        dist = math.nan
    conc = concentration_index(res.field, spec, rho)
    return SweepEntry(
        a=a,
        ratio=ratio,
        eps=gp2d.blowup_scale(a, a_star, p),
        energy=res.energy,
        l4=res.l4,
        mu=res.mu,
        masses=conc.masses,
        frame=res.frame.kind,
        well=well,
        distance=dist,
        converged=res.converged,
        iterations=res.iterations,
        residual=res.residual,
    )


def _safe_entry(args):
    a, a_star = args[1], args[2]
    try:
        return _run_entry(*args)
    except Exception as exc:  # recorded per entry; the sweep continues
        return SweepFailure(a, a / a_star, type(exc).__name__, str(exc))


def sweep(spec, a_list, opts=None, profile=None):
    """Minimize at each coupling, collect entries, fit both collapse laws.

    Entries with a/a* inside ``opts.window`` are solved in the blow-up frame
    (every well in 𝒵, lowest energy kept) and are the only ones used in
    the fits; smaller couplings are solved in the lab frame.  A failing
    coupling (e.g. a >= a*) is recorded in ``failures``.

    Raises
    ------
    NoFitError
        With the partial report attached, if fewer than 4 window entries
        succeed and ``opts.require_fit`` is set.
    """
    opts = opts or SweepOptions()
    if profile is None:
        profile = kwong.default_profile()
    p = flatness(spec)
    consts = kwong.kwong_constants(profile, powers=(0.0, p))
    a_star = consts.a_star
    lam_report = lambda_values(spec, consts)
    preds = predicted_laws(lam_report, consts)
    wells = tuple(opts.wells) if opts.wells is not None else lam_report.flattest_set

    tasks = [(spec, float(a), a_star, p, lam_report, wells, opts, profile) for a in sorted(a_list)]
    if opts.workers > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=opts.workers) as ex:
            outcomes = list(ex.map(_safe_entry, tasks))
    else:
        outcomes = [_safe_entry(t) for t in tasks]

    entries = [o for o in outcomes if isinstance(o, SweepEntry)]
    failures = [o for o in outcomes if isinstance(o, SweepFailure)]
    report = SweepReport(
        a_star=a_star,
        p=p,
        lam=lam_report.lam,
        entries=entries,
        failures=failures,
        predictions=preds,
        window=tuple(opts.window),
        wells=wells,
    )
    fit_set = report.fit_entries()
    if len(fit_set) < 4:
        if opts.require_fit:
            raise NoFitError(
                f"only {len(fit_set)} successful entries inside the window {opts.window}; need 4",
                report=report,
            )
        return report
    report.energy_fit = fit_power_law([(a_star - e.a, e.energy) for e in fit_set])
    report.l4_fit = fit_power_law([(a_star - e.a, e.l4) for e in fit_set])
    return report


def window_couplings(a_star, ratios=DEFAULT_WINDOW):
    return [r * a_star for r in ratios]


def symmetry_breaking(entry_or_conc, threshold=SYMMETRY_BREAKING_MASS):
    masses = entry_or_conc.masses
    return max(masses) > threshold


@dataclass(frozen=True)
class SymmetryProbe:
    a: float
    ratio: float
    masses: tuple
    dominant: int
    broken: bool
    energy: float


def symmetry_probe(spec, ratios, opts=None, rho=None, threshold=SYMMETRY_BREAKING_MASS, profile=None):
    """Lab-frame minimizations from a symmetric superposition over 𝒵.

    ``opts`` should carry a nonzero ``perturbation``; with an exactly
    symmetric start the descent cannot leave the symmetric subspace.
    """
    opts = replace(opts) if opts is not None else gp2d.MinimizeOptions(perturbation=0.05)
    opts.init = "symmetric"
    if profile is None:
        profile = kwong.default_profile()
    a_star = kwong.radial_moment(profile, 0)
    out = []
    for r in ratios:
        res = gp2d.minimize(spec, r * a_star, opts, a_star=a_star, profile=profile)
        c = concentration_index(res.field, spec, rho)
        out.append(SymmetryProbe(r * a_star, r, c.masses, c.dominant, c.dominant_mass > threshold, res.energy))
    return out
