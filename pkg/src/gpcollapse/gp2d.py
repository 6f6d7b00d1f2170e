"""Discretized GP functional on a square box and its constrained minimizers.

    E_a(u) = ∫|∇u|² + ∫V u² - (a/2) ∫u⁴,    ∫u² = 1,   u >= 0

The box [-L, L]² carries n points per side including the boundary, where
u = 0 (Dirichlet).  The Laplacian is the 5-point stencil (``order=2``) or
its fourth-order 9-point-per-axis cousin (``order=4``); the kinetic term is
the quadratic form -⟨u, Δu⟩ of the same stencil, so the discrete energy is
exactly the one whose gradient drives the descent.

Two frames are supported.  The lab frame solves for u itself.  The blow-up
frame around a well x₀ solves for w(x) = ε u(x₀ + εx), ε = (a* - a)^{1/(2+p)},
which minimizes

    ∫|∇w|² + ε² ∫V(x₀ + εx) w² - (a/2) ∫w⁴,

and e(a) is recovered as ε⁻² times that value.  Near a* the lab-frame
minimizer shrinks to width ~ε, while w stays order one.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft

from . import kwong
from .errors import ConfigError, DescentError, NotApplicable, ThresholdExceeded
from .potential import flatness, lambda_values

_ROUNDING = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class Grid:
    L: float
    n: int

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigError(f"box half-width L must be positive, got {self.L!r}", field="L")
        if int(self.n) != self.n or self.n < 8:
            raise ConfigError(f"grid size n must be an integer >= 8, got {self.n!r}", field="n")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self):
        return 2.0 * self.L / (self.n - 1)

    @property
    def x(self):
        return np.linspace(-self.L, self.L, self.n)

    def mesh(self):
        return np.meshgrid(self.x, self.x, indexing="ij")


@dataclass(frozen=True)
class Frame:
    """Coordinates of a field: ``Lab`` or ``BlowUp`` around x0 with scale eps."""

    kind: str = "Lab"
    x0: tuple = (0.0, 0.0)
    eps: float = 1.0

    @classmethod
    def lab(cls):
        return cls()

    @classmethod
    def blowup(cls, x0, eps):
        return cls("BlowUp", (float(x0[0]), float(x0[1])), float(eps))

    @property
    def is_blowup(self):
        return self.kind == "BlowUp"

    def to_lab(self, X, Y):
        return self.x0[0] + self.eps * X, self.x0[1] + self.eps * Y

    def from_lab(self, x, y):
        return (x - self.x0[0]) / self.eps, (y - self.x0[1]) / self.eps

    def to_dict(self):
        if not self.is_blowup:
            return {"kind": "Lab"}
        return {"kind": "BlowUp", "x0": list(self.x0), "eps": self.eps}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") == "BlowUp":
            return cls.blowup(d["x0"], d["eps"])
        return cls.lab()


@dataclass(frozen=True, eq=False)
class Field2D:
    """Nonnegative samples on the box, row-major from (-L, -L)."""

    values: np.ndarray
    L: float
    normalization: float = math.nan  # discrete ∫u², recorded at construction
    frame: Frame = field(default_factory=Frame)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"field must be a square 2D array, got shape {v.shape}")
        object.__setattr__(self, "values", v)
        if math.isnan(self.normalization):
            object.__setattr__(self, "normalization", float(np.sum(v**2) * self.grid.h**2))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def grid(self):
        return Grid(self.L, self.values.shape[0])

    @classmethod
    def from_function(cls, func, L, n, frame=None, normalize=True):
        g = Grid(L, n)
        X, Y = g.mesh()
        v = np.asarray(func(X, Y), dtype=float)
        v = _apply_dirichlet(np.broadcast_to(v, X.shape).copy())
        if normalize:
            v = _normalize(v, g.h)
        return cls(v, L, frame=frame or Frame())


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    interaction: float
    total: float
    a: float

    def scaled(self, c):
        return EnergyBreakdown(
            self.kinetic * c, self.potential * c, self.interaction * c, self.total * c, self.a
        )

    def to_dict(self):
        return {
            "kinetic": self.kinetic,
            "potential": self.potential,
            "interaction": self.interaction,
            "total": self.total,
        }


@dataclass
class MinimizeOptions:
    L: float | None = None  # None: 8 in the lab frame, 12/λ in the blow-up frame
    n: int = 256
    dt: float | None = None
    max_iter: int = 100_000
    tol: float = 1e-13
    init: object = "auto"  # "gaussian" | "kwong" | "symmetric" | ndarray
    well: int = 0
    order: int | None = None  # None: 2 in the lab frame, 4 in the blow-up frame
    preconditioner: str = "kinetic"  # or "none"
    perturbation: float = 0.0
    seed: int = 0
    width: float | None = None
    record_history: bool = True

    def validate(self):
        if self.L is not None and not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L!r}", field="L")
        if int(self.n) != self.n or self.n < 8:
            raise ConfigError(f"n must be an integer >= 8, got {self.n!r}", field="n")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}", field="dt")
        if not self.max_iter >= 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter!r}", field="max_iter")
        if not self.tol >= 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol!r}", field="tol")
        if self.order not in (None, 2, 4):
            raise ConfigError(f"order must be 2 or 4, got {self.order!r}", field="order")
        if self.preconditioner not in ("kinetic", "none"):
            raise ConfigError(
                f"preconditioner must be 'kinetic' or 'none', got {self.preconditioner!r}",
                field="preconditioner",
            )
        if not self.perturbation >= 0:
            raise ConfigError("perturbation must be >= 0", field="perturbation")


@dataclass(eq=False)
class MinimizeResult:
    field: Field2D
    energy: float  # e(a) in lab units
    mu: float  # lab-frame chemical potential
    breakdown: EnergyBreakdown  # lab units
    iterations: int
    residual: float  # Euler-Lagrange sup-norm in the field's own frame
    frame: Frame
    a: float
    converged: bool = True
    energy_history: np.ndarray = None  # frame units, one entry per accepted step
    norm_history: np.ndarray = None  # |∫u² - 1| after each accepted step
    options: MinimizeOptions = None

    @property
    def l4(self):
        """∫u⁴ in lab units."""
        return self.breakdown.interaction

    def summary(self):
        return {
            "a": self.a,
            "energy": self.energy,
            "mu": self.mu,
            "l4": self.l4,
            "breakdown": self.breakdown.to_dict(),
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual,
            "frame": self.frame.to_dict(),
            "L": self.field.L,
            "n": self.field.n,
        }


# ----------------------------------------------------------------------------
# discrete operators


def _apply_dirichlet(u):
    u[0, :] = 0.0
    u[-1, :] = 0.0
    u[:, 0] = 0.0
    u[:, -1] = 0.0
    return u


def _normalize(u, h):
    s = math.sqrt(float(np.sum(u * u)) * h * h)
    if s == 0.0:
        raise NotApplicable("cannot normalize the zero field")
    return u / s


def laplacian(u, h, order=2):
    """Finite-difference Laplacian with u = 0 outside the array."""
    if order == 2:
        p = np.pad(u, 1)
        return (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * u) / (h * h)
    if order == 4:
        p = np.pad(u, 2)
        c = p[2:-2, 2:-2]
        s = (
            16.0 * (p[3:-1, 2:-2] + p[1:-3, 2:-2] + p[2:-2, 3:-1] + p[2:-2, 1:-3])
            - (p[4:, 2:-2] + p[:-4, 2:-2] + p[2:-2, 4:] + p[2:-2, :-4])
            - 60.0 * c
        )
        return s / (12.0 * h * h)
    raise ValueError(f"unsupported stencil order {order!r}")


def _stencil_symbol(theta, h, order):
    """Eigenvalues of -Δ (1D) on sine modes with phase theta."""
    if order == 2:
        return (2.0 - 2.0 * np.cos(theta)) / (h * h)
    return (30.0 - 32.0 * np.cos(theta) + 2.0 * np.cos(2.0 * theta)) / (12.0 * h * h)


def stencil_max_eigenvalue(h, order):
    """Upper bound of the 2D -Δ_h spectrum."""
    return 2.0 * float(_stencil_symbol(np.pi, h, order))


def _frame_parts(u, lap, veff, a, h):
    """(kinetic, potential, interaction, total) for a field in its own frame."""
    w = h * h
    kin = -float(np.sum(u * lap)) * w
    u2 = u * u
    pot = float(np.sum(veff * u2)) * w
    inter = float(np.sum(u2 * u2)) * w
    return kin, pot, inter, kin + pot - 0.5 * a * inter


def frame_potential(spec, grid, frame):
    """ε² V(x₀ + εx) on the grid (V itself in the lab frame; zero if spec is None)."""
    if spec is None:
        return np.zeros((grid.n, grid.n))
    X, Y = grid.mesh()
    xl, yl = frame.to_lab(X, Y)
    return frame.eps**2 * spec(xl, yl)


# ----------------------------------------------------------------------------
# functionals


def energy(field, spec, a, order=2):
    """Energy breakdown of a field, in lab-frame units.

    ``spec=None`` means V ≡ 0.  Fields in the blow-up frame are evaluated
    there and rescaled by ε⁻², which gives E_a of the corresponding u.
    """
    if a < 0:
        raise ValueError(f"repulsive coupling a={a!r} < 0 is out of scope")
    g = field.grid
    u = field.values
    veff = frame_potential(spec, g, field.frame)
    kin, pot, inter, tot = _frame_parts(u, laplacian(u, g.h, order), veff, a, g.h)
    e2 = field.frame.eps**2
    return EnergyBreakdown(kin / e2, pot / e2, inter / e2, tot / e2, a)


def forward_difference_kinetic(field):
    """h² Σ |D⁺u|², which equals the 5-point quadratic form for Dirichlet data."""
    u = np.pad(field.values, 1)
    dx = np.diff(u, axis=0)
    dy = np.diff(u, axis=1)
    return float(np.sum(dx * dx) + np.sum(dy * dy))


def gn_check(field, a_star=None, order=2):
    """(∫u⁴)·a* / (2 ∫|∇u|² ∫u²); at most 1 up to discretization error."""
    if a_star is None:
        a_star = kwong.critical_coupling()
    g = field.grid
    u = field.values
    w = g.h * g.h
    mass = float(np.sum(u * u)) * w
    if mass == 0.0:
        raise NotApplicable("Gagliardo-Nirenberg ratio undefined for the zero field")
    kin = -float(np.sum(u * laplacian(u, g.h, order))) * w
    quart = float(np.sum(u**4)) * w
    return quart * a_star / (2.0 * kin * mass)


def residual_el(field, spec, a, mu, order=2):
    """Sup-norm of -Δu + Vu - μu - au³ where u > 1e-6 max u (interior points).

    Evaluated in the field's own frame; for blow-up fields the equation is
    -Δw + ε²V(x₀+εx)w - ε²μ w - a w³ with the lab-frame μ supplied.
    """
    g = field.grid
    u = field.values
    veff = frame_potential(spec, g, field.frame)
    mu_f = mu * field.frame.eps**2
    r = -laplacian(u, g.h, order) + veff * u - mu_f * u - a * u**3
    mask = u > 1e-6 * u.max()
    mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
    if not mask.any():
        return 0.0
    return float(np.abs(r[mask]).max())


# ----------------------------------------------------------------------------
# descent


class _Preconditioner:
    """S (σ - Δ_h)⁻¹ S with S = (1 + V/σ)^{-1/2}, the inverse via DST-I."""

    def __init__(self, grid, veff, sigma, order):
        m = grid.n - 2
        theta = np.pi * np.arange(1, m + 1) / (m + 1)
        lam = _stencil_symbol(theta, grid.h, order)
        self.inv = 1.0 / (sigma + lam[:, None] + lam[None, :])
        self.scale = 1.0 / np.sqrt(1.0 + np.maximum(veff[1:-1, 1:-1], 0.0) / sigma)

    def __call__(self, *arrays):
        stack = np.stack([a[1:-1, 1:-1] for a in arrays]) * self.scale
        t = fft.dstn(stack, type=1, axes=(1, 2), norm="ortho")
        t *= self.inv
        t = fft.idstn(t, type=1, axes=(1, 2), norm="ortho") * self.scale
        out = []
        for k in range(len(arrays)):
            o = np.zeros_like(arrays[k])
            o[1:-1, 1:-1] = t[k]
            out.append(o)
        return out


@dataclass
class DescentOutcome:
    u: np.ndarray
    parts: tuple  # frame units: kinetic, potential, interaction, total
    iterations: int
    converged: bool
    energies: np.ndarray
    norm_errors: np.ndarray
    dt: float


def descend(grid, veff, a, init, opts):
    """Projected gradient descent on the unit L² sphere with u >= 0.

    Each step is ``u ← normalize(max(u - dt·d, 0))`` where d is the energy
    gradient -Δu + V u - a u³ (``preconditioner="none"``) or its
    preconditioned tangential projection.  A step that raises the energy is
    rejected and dt halved; accepted steps therefore never increase E.  The
    iteration stops when the energy decrease per unit nominal step falls
    below ``tol`` relative to the energy scale, or at ``max_iter``.

    No threshold check is done here; :func:`minimize` guards a < a*.
    """
    h = grid.h
    w = h * h
    u = _apply_dirichlet(np.maximum(np.array(init, dtype=float), 0.0))
    u = _normalize(u, h)
    lap = laplacian(u, h, opts.order)
    parts = _frame_parts(u, lap, veff, a, h)

    if opts.preconditioner == "none":
        dt0 = 0.25 * h * h * 8.0 / (stencil_max_eigenvalue(h, opts.order) * h * h)
        dt0 = opts.dt if opts.dt is not None else dt0
        grow = 1.0
        precond = None
    else:
        dt0 = opts.dt if opts.dt is not None else 1.0
        grow = 1.5
        sigma = max(1.0, parts[0])
        precond = _Preconditioner(grid, veff, sigma, opts.order)
    dt = dt0
    dt_min = dt0 * 1e-14

    energies = [parts[3]] if opts.record_history else []
    norm_errors = [abs(float(np.sum(u * u)) * w - 1.0)] if opts.record_history else []
    converged = False
    it = 0
    while it < opts.max_iter:
        grad = -lap + veff * u - a * u**3
        if precond is None:
            d = grad
        else:
            pg, pu = precond(grad, u)
            d = pg - (float(np.sum(u * pg)) / float(np.sum(u * pu))) * pu
        E = parts[3]
        scale = parts[0] + abs(parts[1]) + 0.5 * a * parts[2]
        while True:
            v = _apply_dirichlet(np.maximum(u - dt * d, 0.0))
            s = math.sqrt(float(np.sum(v * v)) * w)
            if s == 0.0 or not math.isfinite(s):
                new = None
            else:
                v /= s
                lap_v = laplacian(v, h, opts.order)
                new = _frame_parts(v, lap_v, veff, a, h)
            if new is not None and new[3] <= E:
                break
            if new is not None and new[3] - E <= _ROUNDING * scale:
                converged = True
                break
            dt *= 0.5
            if dt < dt_min:
                raise DescentError(f"step size underflow after {it} iterations (dt={dt:.3g})")
        if converged:
            break
        it += 1
        decrease = E - new[3]
        u, lap, parts = v, lap_v, new
        if opts.record_history:
            energies.append(parts[3])
            norm_errors.append(abs(float(np.sum(u * u)) * w - 1.0))
        if decrease * (dt0 / dt) <= opts.tol * scale:
            converged = True
            break
        dt = min(dt * grow, dt0)
    return DescentOutcome(
        u, parts, it, converged, np.array(energies), np.array(norm_errors), dt
    )


# ----------------------------------------------------------------------------
# initial states


def _smooth_noise(grid, rng, modes=3):
    X, Y = grid.mesh()
    X, Y = X / grid.L, Y / grid.L
    out = np.zeros_like(X)
    for k in range(1, modes + 1):
        c = rng.standard_normal(4)
        out += (c[0] * np.cos(np.pi * k * X) + c[1] * np.sin(np.pi * k * X)) / k
        out += (c[2] * np.cos(np.pi * k * Y) + c[3] * np.sin(np.pi * k * Y)) / k
    return out / np.abs(out).max()


def _default_width(spec):
    sep = spec.min_separation()
    return 1.0 if not math.isfinite(sep) else min(1.0, sep / 4.0)


def build_init(kind, spec, grid, frame, opts, lam=None, profile=None, centers=None):
    """Initial state on ``grid`` in ``frame``.

    ``gaussian``: bump at well ``opts.well``; ``kwong``: Q(lam·|x - x_w|)
    centred at that well, ``lam`` being the scale in frame coordinates; ``symmetric``: equal-weight sum
    of bumps at ``centers`` (default: all wells).  A smooth seeded
    perturbation of relative size ``opts.perturbation`` is applied last.
    """
    X, Y = grid.mesh()
    wells = spec.positions if spec is not None else np.zeros((1, 2))
    if kind == "gaussian":
        cx, cy = frame.from_lab(*wells[opts.well])
        s = (opts.width or _default_width(spec)) / frame.eps
        u = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * s * s))
    elif kind == "kwong":
        if profile is None or lam is None:
            raise ConfigError("kwong init needs a radial profile and λ", field="init")
        cx, cy = frame.from_lab(*wells[opts.well])
        u = profile(np.hypot(X - cx, Y - cy) * lam)
    elif kind == "symmetric":
        idx = centers if centers is not None else range(len(wells))
        s = (opts.width or _default_width(spec)) / frame.eps
        u = np.zeros_like(X)
        for i in idx:
            cx, cy = frame.from_lab(*wells[i])
            u += np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * s * s))
    else:
        raise ConfigError(f"unknown init {kind!r}", field="init")
    if opts.perturbation:
        rng = np.random.default_rng(opts.seed)
        u = u * (1.0 + opts.perturbation * _smooth_noise(grid, rng))
    return u


# ----------------------------------------------------------------------------
# drivers


def _resolve_kwong(a_star, profile):
    if profile is None:
        profile = kwong.default_profile()
    if a_star is None:
        a_star = kwong.radial_moment(profile, 0)
    return a_star, profile


def _check_coupling(a, a_star):
    if a < 0:
        raise ValueError(f"repulsive coupling a={a!r} < 0 is out of scope")
    if a >= a_star:
        raise ThresholdExceeded(a, a_star)


def _lambda_report(spec, profile):
    p = flatness(spec)
    consts = kwong.kwong_constants(profile, powers=(0.0, p))
    return lambda_values(spec, consts)


def _finish(spec, a, grid, frame, out, opts):
    if out.parts[0] * grid.h**2 > 0.1:
        warnings.warn(
            f"minimizer is under-resolved (kinetic·h² = {out.parts[0] * grid.h**2:.3g}); "
            "the state has collapsed to the grid scale. Refine the grid, shrink L, "
            "use order=4 or the blow-up frame.",
            RuntimeWarning,
            stacklevel=3,
        )
    e2 = frame.eps**2
    kin, pot, inter, tot = (x / e2 for x in out.parts)
    bd = EnergyBreakdown(kin, pot, inter, tot, a)
    mu = tot - 0.5 * a * inter
    fld = Field2D(out.u, grid.L, frame=frame)
    res = residual_el(fld, spec, a, mu, opts.order)
    return MinimizeResult(
        field=fld,
        energy=tot,
        mu=mu,
        breakdown=bd,
        iterations=out.iterations,
        residual=res,
        frame=frame,
        a=a,
        converged=out.converged,
        energy_history=out.energies,
        norm_history=out.norm_errors,
        options=opts,
    )


def minimize(spec, a, opts=None, a_star=None, profile=None):
    """Lab-frame minimizer of E_a under ∫u² = 1, u >= 0.

    Raises
    ------
    ThresholdExceeded
        If a >= a*: no minimizer exists there.
    """
    opts = replace(opts) if opts is not None else MinimizeOptions()
    opts.validate()
    if opts.order is None:
        opts.order = 2
    a_star, profile = _resolve_kwong(a_star, profile)
    _check_coupling(a, a_star)
    grid = Grid(opts.L if opts.L is not None else 8.0, opts.n)
    frame = Frame.lab()
    veff = frame_potential(spec, grid, frame)
    init = opts.init
    if isinstance(init, str):
        kind = "gaussian" if init == "auto" else init
        lam = None
        centers = None
        if kind in ("kwong", "symmetric"):
            rep = _lambda_report(spec, profile)
            lam = rep.lambda_per_well[opts.well]
            if not math.isfinite(lam):
                lam = rep.lam
            lam /= blowup_scale(a, a_star, rep.p)
            centers = rep.flattest_set
        init = build_init(kind, spec, grid, frame, opts, lam=lam, profile=profile, centers=centers)
    out = descend(grid, veff, a, init, opts)
    return _finish(spec, a, grid, frame, out, opts)


def blowup_scale(a, a_star, p):
    """ε = (a* - a)^{1/(2+p)}."""
    return (a_star - a) ** (1.0 / (2.0 + p))


def minimize_rescaled(spec, a, well_index=0, opts=None, a_star=None, profile=None):
    """Minimizer in the blow-up frame around well ``well_index``.

    Solves for w(x) = ε u(x₀ + εx) on a fixed box and reports the lab-frame
    energy e(a) = ε⁻² · (blow-up energy).  The default initial state is the
    limit profile λQ(λx)/‖Q‖₂ with the well's own λ_i.
    """
    opts = replace(opts) if opts is not None else MinimizeOptions()
    opts.validate()
    if opts.order is None:
        opts.order = 4
    a_star, profile = _resolve_kwong(a_star, profile)
    _check_coupling(a, a_star)
    if not 0 <= well_index < spec.n:
        raise ConfigError(f"well index {well_index} out of range for {spec.n} wells", field="well")
    opts.well = well_index
    rep = _lambda_report(spec, profile)
    lam = rep.lambda_per_well[well_index]
    if not math.isfinite(lam):
        lam = rep.lam
    eps = blowup_scale(a, a_star, rep.p)
    frame = Frame.blowup(spec.wells[well_index].x, eps)
    L = opts.L if opts.L is not None else float(np.clip(12.0 / lam, 4.0, 16.0))
    grid = Grid(L, opts.n)
    veff = frame_potential(spec, grid, frame)
    init = opts.init
    if isinstance(init, str):
        kind = "kwong" if init == "auto" else init
        init = build_init(kind, spec, grid, frame, opts, lam=lam, profile=profile, centers=rep.flattest_set)
    out = descend(grid, veff, a, init, opts)
    return _finish(spec, a, grid, frame, out, opts)


# ----------------------------------------------------------------------------
# export


def write_field(stem, result, extra=None):
    """``<stem>.f64`` (little-endian float64, row-major from (-L, -L)) plus ``<stem>.json``."""
    from .io import dumps_json

    fld = result.field
    fld.values.astype("<f8").tofile(f"{stem}.f64")
    meta = {"L": fld.L, "n": fld.n, "a": result.a, "frame": result.frame.to_dict()}
    if extra:
        meta.update(extra)
    with open(f"{stem}.json", "w") as fh:
        fh.write(dumps_json(meta))
    return f"{stem}.f64", f"{stem}.json"


def read_field(stem):
    with open(f"{stem}.json") as fh:
        meta = json.load(fh)
    n = int(meta["n"])
    values = np.fromfile(f"{stem}.f64", dtype="<f8").reshape(n, n)
    return Field2D(values, float(meta["L"]), frame=Frame.from_dict(meta["frame"])), meta
