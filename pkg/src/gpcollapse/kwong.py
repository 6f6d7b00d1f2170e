"""Radial ground state Q of  Δu - u + u³ = 0  in two dimensions.

Q is found by shooting on the central value b = u(0): the radial ODE

    u'' + u'/r - u + u³ = 0,   u'(0) = 0,   u(0) = b

undershoots (turns back up) for b < b* and overshoots (crosses zero) for
b > b*.  Bisection on that classification pins b*.  Everything downstream
(the critical coupling a* = ‖Q‖₂², moments ∫|x|^k Q², the soliton
identities) is computed from the resulting :class:`RadialProfile`.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConfigError, DivergedNumerically

DEFAULT_R_MAX = 25.0
DEFAULT_DR = 1e-3
DEFAULT_TOL = 1e-12
DEFAULT_BRACKET = (1.5, 3.0)

# radius where the integrated profile is handed over to the asymptotic tail
CUT_LEVEL = 1e-8
# relative split between the bracketing trajectories beyond which the
# midpoint trajectory is no longer trusted
SPLIT_RTOL = 1e-4
IDENTITY_TOL = 1e-4


class Shot(enum.Enum):
    DECAYS = "Decays"
    TURNS_UP = "TurnsUp"
    CROSSES_ZERO = "CrossesZero"


@dataclass(frozen=True)
class ShotResult:
    classification: Shot
    radius: float  # radius of the classifying event (r_max for Decays)
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray


def _series_start(b, r):
    # u = b + c1 r² + c2 r⁴ solves the ODE to O(r⁴) near the origin
    c1 = (b - b**3) / 4.0
    c2 = (1.0 - 3.0 * b * b) * c1 / 16.0
    return b + c1 * r * r + c2 * r**4, 2.0 * c1 * r + 4.0 * c2 * r**3


def shoot_radial(b, r_max=DEFAULT_R_MAX, dr=DEFAULT_DR):
    """Integrate the radial equation from u(0) = b and classify the outcome.

    Fixed-step RK4 on the grid r_k = k·dr, started from the regular series
    expansion at r = dr.  Integration stops at the first classifying event:

    * ``CrossesZero``: u < 0;
    * ``TurnsUp``: u' > 0 while u > 0.  A trajectory that reaches r_max
      positive without decaying (e.g. the constant solution u ≡ 1) is also
      an undershoot and is classified ``TurnsUp``;
    * ``Decays``: neither, and u(r_max) < 1e-8.

    Raises
    ------
    ValueError
        If b is outside [0, 10], dr <= 0 or r_max < 20.
    DivergedNumerically
        If the state becomes non-finite.
    """
    if not 0.0 <= b <= 10.0:
        raise ValueError(f"central value b={b!r} outside the bracket [0, 10]")
    if not dr > 0:
        raise ValueError(f"dr must be positive, got {dr!r}")
    if not r_max >= 20:
        raise ValueError(f"r_max must be >= 20, got {r_max!r}")

    n_steps = int(round(r_max / dr))
    rs = [0.0]
    us = [float(b)]
    vs = [0.0]
    u, v = _series_start(float(b), dr)
    h = dr
    h2 = 0.5 * dr
    outcome = None
    k = 1
    while True:
        r = k * dr
        rs.append(r)
        us.append(u)
        vs.append(v)
        if not (math.isfinite(u) and math.isfinite(v)):
            raise DivergedNumerically(r)
        if u < 0.0:
            outcome = Shot.CROSSES_ZERO
            break
        if v > 0.0:
            outcome = Shot.TURNS_UP
            break
        if k >= n_steps:
            break
        # classical RK4 for (u, v)' = (v, u - u³ - v/r)
        rm = r + h2
        r1 = r + h
        k1u = v
        k1v = u - u * u * u - v / r
        uu = u + h2 * k1u
        vv = v + h2 * k1v
        k2u = vv
        k2v = uu - uu * uu * uu - vv / rm
        uu = u + h2 * k2u
        vv = v + h2 * k2v
        k3u = vv
        k3v = uu - uu * uu * uu - vv / rm
        uu = u + h * k3u
        vv = v + h * k3v
        k4u = vv
        k4v = uu - uu * uu * uu - vv / r1
        u += h * (k1u + 2.0 * k2u + 2.0 * k3u + k4u) / 6.0
        v += h * (k1v + 2.0 * k2v + 2.0 * k3v + k4v) / 6.0
        k += 1

    if outcome is None:
        outcome = Shot.DECAYS if us[-1] < 1e-8 else Shot.TURNS_UP
    return ShotResult(outcome, rs[-1], np.array(rs), np.array(us), np.array(vs))


def radial_hamiltonian(u, du):
    """H = ½u'² - ½u² + ¼u⁴, non-increasing along radial trajectories."""
    u = np.asarray(u)
    du = np.asarray(du)
    return 0.5 * du**2 - 0.5 * u**2 + 0.25 * u**4


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Sampled radial function u(r) on a uniform grid.

    Beyond ``r_cut`` the samples come from the asymptotic form
    ``tail_coeff · r^{-1/2} e^{-r}``; integrals use that form in closed
    form past ``r_cut``.  ``tail_coeff = 0`` means the samples are exact
    out to the end of the grid.
    """

    r_grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    dr: float
    r_cut: float
    tail_coeff: float = 0.0
    b_bracket: tuple = (math.nan, math.nan)

    @property
    def central_value(self):
        return float(self.values[0])

    @property
    def r_max(self):
        return float(self.r_grid[-1])

    @property
    def n_cut(self):
        return int(round(self.r_cut / self.dr))

    def __call__(self, r):
        """Evaluate the profile at arbitrary radii (linear interpolation, tail beyond the grid)."""
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.r_grid, self.values)
        beyond = r > self.r_max
        if np.any(beyond):
            rb = r[beyond]
            out[beyond] = self.tail_coeff * np.exp(-rb) / np.sqrt(rb)
        return out

    @classmethod
    def from_function(cls, func, dfunc, r_max=DEFAULT_R_MAX, dr=DEFAULT_DR):
        """Tabulate an analytic radial function with no asymptotic tail."""
        n = int(round(r_max / dr))
        r = np.arange(n + 1) * dr
        return cls(r, np.asarray(func(r), float), np.asarray(dfunc(r), float), dr, r[-1], 0.0)


def _bisect(lo, hi, tol, r_max, dr):
    c_lo = shoot_radial(lo, r_max, dr).classification
    c_hi = shoot_radial(hi, r_max, dr).classification
    if c_lo == c_hi:
        raise ConfigError(
            f"bracket [{lo}, {hi}] does not straddle the ground state "
            f"(both endpoints classify as {c_lo.value})",
            field="bracket",
        )
    if Shot.DECAYS in (c_lo, c_hi):
        b = lo if c_lo == Shot.DECAYS else hi
        return b, b
    if c_lo == Shot.CROSSES_ZERO:
        lo, hi = hi, lo
    # lo undershoots, hi overshoots (either may be the larger number)
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        c = shoot_radial(mid, r_max, dr).classification
        if c == Shot.DECAYS:
            return mid, mid
        if c == Shot.TURNS_UP:
            lo = mid
        else:
            hi = mid
    return lo, hi


def solve_kwong(tol=DEFAULT_TOL, r_max=DEFAULT_R_MAX, dr=DEFAULT_DR, bracket=DEFAULT_BRACKET):
    """Compute the positive radial solution Q by bisection shooting.

    The returned profile is the midpoint trajectory of the final bracket,
    cut where it drops below 1e-8 (or earlier, where the two bracketing
    trajectories start to separate) and continued by ``c r^{-1/2} e^{-r}``
    matched at the cut.

    Raises
    ------
    ConfigError
        If both bracket endpoints classify the same way.
    """
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol!r}", field="tol")
    if not dr > 0:
        raise ConfigError(f"dr must be positive, got {dr!r}", field="dr")
    if not r_max >= 20:
        raise ConfigError(f"r_max must be >= 20, got {r_max!r}", field="r_max")
    lo, hi = _bisect(float(bracket[0]), float(bracket[1]), tol, r_max, dr)
    b = 0.5 * (lo + hi)
    mid = shoot_radial(b, r_max, dr)
    u, du = mid.u, mid.du
    n_valid = len(u) - 1
    if mid.classification != Shot.DECAYS:
        n_valid -= 1  # drop the sample at which the event fired
    below = np.nonzero(u[: n_valid + 1] < CUT_LEVEL)[0]
    n_cut = int(below[0]) if below.size else n_valid
    if lo != hi:
        u_lo = shoot_radial(lo, r_max, dr).u
        u_hi = shoot_radial(hi, r_max, dr).u
        m = min(len(u_lo), len(u_hi), n_cut + 1)
        split = np.abs(u_lo[:m] - u_hi[:m]) > SPLIT_RTOL * np.abs(u[:m])
        idx = np.nonzero(split)[0]
        if idx.size:
            n_cut = min(n_cut, max(int(idx[0]) - 1, 1))

    n_total = int(round(r_max / dr))
    r = np.arange(n_total + 1) * dr
    r_cut = r[n_cut]
    c = float(u[n_cut] * math.sqrt(r_cut) * math.exp(r_cut))
    values = np.empty_like(r)
    deriv = np.empty_like(r)
    values[: n_cut + 1] = u[: n_cut + 1]
    deriv[: n_cut + 1] = du[: n_cut + 1]
    rt = r[n_cut + 1 :]
    values[n_cut + 1 :] = c * np.exp(-rt) / np.sqrt(rt)
    deriv[n_cut + 1 :] = -c * np.exp(-rt) * (rt**-0.5 + 0.5 * rt**-1.5)
    return RadialProfile(r, values, deriv, dr, float(r_cut), c, (lo, hi))


@functools.lru_cache(maxsize=8)
def default_profile(tol=DEFAULT_TOL, r_max=DEFAULT_R_MAX, dr=DEFAULT_DR):
    """Cached :func:`solve_kwong` result for the given settings."""
    return solve_kwong(tol=tol, r_max=r_max, dr=dr)


def _grid_integral(profile, integrand):
    n = profile.n_cut
    return float(integrate.simpson(integrand[: n + 1], x=profile.r_grid[: n + 1]))


def radial_moment(profile, k):
    """2π ∫ r^{k+1} u(r)² dr, i.e. ∫_{R²} |x|^k u(|x|)² dx.

    Composite Simpson over the integrated part plus the closed-form
    integral of the fitted tail: c² ∫_R^∞ r^k e^{-2r} dr = c² Γ(k+1, 2R) / 2^{k+1}.
    """
    if k < 0:
        raise ValueError(f"moment power must be >= 0, got {k!r}")
    r = profile.r_grid
    body = _grid_integral(profile, r ** (k + 1) * profile.values**2)
    tail = 0.0
    if profile.tail_coeff:
        R = profile.r_cut
        tail = profile.tail_coeff**2 * special.gammaincc(k + 1, 2 * R) * special.gamma(k + 1) / 2 ** (k + 1)
    return 2 * math.pi * (body + tail)


def l4_norm(profile):
    """‖u‖₄⁴ over R²."""
    r = profile.r_grid
    body = _grid_integral(profile, r * profile.values**4)
    tail = 0.0
    if profile.tail_coeff:
        tail = profile.tail_coeff**4 * special.exp1(4 * profile.r_cut)
    return 2 * math.pi * (body + tail)


def grad_norm(profile):
    """‖∇u‖₂² over R²."""
    r = profile.r_grid
    body = _grid_integral(profile, r * profile.derivative**2)
    tail = 0.0
    if profile.tail_coeff:
        # u'² r = c² e^{-2r} (1 + 1/r + 1/(4r²))
        R = profile.r_cut
        e = math.exp(-2 * R)
        E1 = special.exp1(2 * R)
        tail = profile.tail_coeff**2 * (0.5 * e + E1 + 0.25 * (e / R - 2 * E1))
    return 2 * math.pi * (body + tail)


@dataclass(frozen=True)
class IdentityResiduals:
    """Relative residuals of ‖∇Q‖₂² = ½‖Q‖₄⁴ and ‖Q‖₄⁴ = 2‖Q‖₂²."""

    grad_norm: float
    l4_norm: float
    mass: float
    virial: float  # |grad - ½ l4| / l4
    pohozaev: float  # |l4 - 2 mass| / mass
    status: str  # "Soliton", "NonSoliton" or "NotApplicable"

    @property
    def virial_abs(self):
        return abs(self.grad_norm - 0.5 * self.l4_norm)

    @property
    def pohozaev_abs(self):
        return abs(self.l4_norm - 2 * self.mass)


def kwong_identities(profile):
    g = grad_norm(profile)
    q = l4_norm(profile)
    m = radial_moment(profile, 0)
    if q == 0.0 or m == 0.0:
        return IdentityResiduals(g, q, m, math.nan, math.nan, "NotApplicable")
    virial = abs(g - 0.5 * q) / q
    pohozaev = abs(q - 2 * m) / m
    ok = virial <= IDENTITY_TOL and pohozaev <= IDENTITY_TOL
    return IdentityResiduals(g, q, m, virial, pohozaev, "Soliton" if ok else "NonSoliton")


@dataclass(frozen=True)
class KwongConstants:
    a_star: float
    b_star: float
    moments: dict = field(default_factory=dict)
    l4_norm: float = math.nan
    grad_norm: float = math.nan

    def moment(self, k):
        for key, val in self.moments.items():
            if math.isclose(float(key), float(k), rel_tol=1e-12, abs_tol=0.0):
                return val
        raise ConfigError(
            f"moment M_{k:g} = ∫|x|^{k:g} Q² is not available; compute it with "
            f"kwong.kwong_constants(profile, powers=[..., {k:g}])",
            field="moments",
        )

    def to_dict(self):
        return {
            "a_star": self.a_star,
            "b_star": self.b_star,
            "moments": {f"{float(k):g}": v for k, v in sorted(self.moments.items())},
        }


def kwong_constants(profile, powers=(0, 2)):
    moments = {float(k): radial_moment(profile, k) for k in powers}
    a_star = moments.get(0.0, None)
    if a_star is None:
        a_star = radial_moment(profile, 0)
    return KwongConstants(
        a_star=a_star,
        b_star=profile.central_value,
        moments=moments,
        l4_norm=l4_norm(profile),
        grad_norm=grad_norm(profile),
    )


@functools.lru_cache(maxsize=1)
def critical_coupling():
    """a* = ‖Q‖₂² from the cached default profile."""
    return radial_moment(default_profile(), 0)


def gaussian_family_bound(gamma):
    """2·I(u_γ) = π γ 2^{2/γ} for the trial functions u_γ = exp(-|x|^γ / 2).

    Every value is an upper bound on a* = ‖Q‖₂².
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    return math.pi * gamma * 2.0 ** (2.0 / gamma)


def gaussian_family_minimum(numeric=False):
    """Best bound of the trial family.

    Returns ``(γ*, value)``: analytically (ln 4, 2πe ln 2), or, with
    ``numeric=True``, from a bounded scalar minimization of the closed form.
    """
    if not numeric:
        return math.log(4.0), 2 * math.pi * math.e * math.log(2.0)
    res = optimize.minimize_scalar(
        gaussian_family_bound, bounds=(0.1, 10.0), method="bounded", options={"xatol": 1e-10}
    )
    return float(res.x), float(res.fun)


def gamma_scan(gammas):
    return [(float(g), gaussian_family_bound(g)) for g in gammas]


def write_profile(path, profile, extra_header=None):
    """Two-column (r, u) text export with a ``# kwong b*=... dr=...`` header."""
    with open(path, "w") as fh:
        fh.write(f"# kwong b*={profile.central_value:.17g} dr={profile.dr:.17g}\n")
        if extra_header:
            fh.write(f"# {extra_header}\n")
        for r, u in zip(profile.r_grid, profile.values):
            fh.write(f"{r:.17g} {u:.17g}\n")


def read_profile(path):
    """Read a two-column export back (tail data beyond the grid is not recoverable)."""
    data = np.loadtxt(path, comments="#")
    r, u = data[:, 0], data[:, 1]
    dr = float(r[1] - r[0])
    du = np.gradient(u, dr, edge_order=2)
    return RadialProfile(r, u, du, dr, float(r[-1]), 0.0)
