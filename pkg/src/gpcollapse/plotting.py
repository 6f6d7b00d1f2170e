"""Figures written next to the CLI's delimited outputs."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import asymptotics  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "legend.fontsize": 9,
    "lines.linewidth": 1.5,
    "savefig.dpi": 120,
}


def _figure(ncols=1, width=5.0, height=3.6):
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, height), squeeze=False)
    return fig, axes[0]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_profile(profile, path):
    fig, (ax, axl) = _figure(2)
    r = profile.r_grid
    ax.plot(r, profile.values, color="k")
    ax.set_xlim(0, 8)
    ax.set_xlabel("r")
    ax.set_ylabel("Q(r)")
    ax.set_title(f"Q(0) = {profile.central_value:.10f}")
    axl.semilogy(r, np.maximum(profile.values, 1e-300), color="k", label="Q")
    axl.axvline(profile.r_cut, color="0.6", ls="--", label="tail start")
    axl.set_ylim(1e-12, 10)
    axl.set_xlabel("r")
    axl.legend()
    return _save(fig, path)


def plot_gamma_scan(rows, a_star, path):
    g, v = np.array(rows).T
    fig, (ax,) = _figure()
    ax.plot(g, v / (2 * math.pi), color="k", label=r"$\pi\gamma 2^{2/\gamma} / 2\pi$")
    ax.axhline(a_star / (2 * math.pi), color="C3", ls="--", label=r"$a^*/2\pi$")
    ax.axvline(math.log(4), color="0.6", ls=":", label=r"$\gamma=\ln 4$")
    ax.set_xscale("log")
    ax.set_ylim(1.8, 2.6)
    ax.set_xlabel(r"$\gamma$")
    ax.legend()
    return _save(fig, path)


def plot_density(result, path):
    fld = result.field
    g = fld.grid
    fig, (ax,) = _figure(height=4.2, width=4.6)
    ext = [-g.L, g.L, -g.L, g.L]
    im = ax.imshow(fld.values.T ** 2, origin="lower", extent=ext, cmap="magma")
    fig.colorbar(im, ax=ax, shrink=0.85)
    if fld.frame.is_blowup:
        ax.set_title(f"|w|², blow-up frame, eps = {fld.frame.eps:.4g}")
    else:
        ax.set_title(f"|u|², a = {result.a:.6g}")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return _save(fig, path)


def plot_sweep(report, path):
    fig, (ax_e, ax_q, ax_d) = _figure(3, width=4.2)
    pts = report.fit_entries()
    x = np.array([report.a_star - e.a for e in pts])
    e = np.array([e.energy for e in pts])
    q = np.array([e.l4 for e in pts])
    pred = report.predictions
    xs = np.geomspace(x.min(), x.max(), 50) if len(x) else np.array([])
    ax_e.loglog(x, e, "o", color="k", label="computed")
    ax_q.loglog(x, q, "o", color="k", label="computed")
    if report.energy_fit is not None:
        f = report.energy_fit
        ax_e.loglog(xs, f.prefactor * xs**f.exponent, color="C0", label=f"fit, exponent {f.exponent:.3f}")
        f = report.l4_fit
        ax_q.loglog(xs, f.prefactor * xs**f.exponent, color="C0", label=f"fit, exponent {f.exponent:.3f}")
    ax_e.loglog(xs, pred.energy_prefactor * xs**pred.energy_exponent, "--", color="C3", label="limit law")
    ax_q.loglog(xs, pred.l4_prefactor * xs**pred.l4_exponent, "--", color="C3", label="limit law")
    ax_e.set_xlabel(r"$a^* - a$")
    ax_e.set_ylabel("e(a)")
    ax_q.set_xlabel(r"$a^* - a$")
    ax_q.set_ylabel(r"$\int u^4$")
    d = [(en.ratio, en.distance) for en in pts if math.isfinite(en.distance)]
    if d:
        r, dist = np.array(d).T
        ax_d.plot(r, dist, "o-", color="k")
    ax_d.set_xlabel(r"$a/a^*$")
    ax_d.set_ylabel("L² distance to limit profile")
    ax_e.legend()
    ax_q.legend()
    return _save(fig, path)


def plot_profile_comparison(result, lam, profile, path):
    """Cut through the blow-up minimizer against λQ(λx)/‖Q‖₂."""
    fld = result.field
    g = fld.grid
    mid = g.n // 2
    ref = asymptotics.limit_profile(g, lam, profile)
    fig, (ax,) = _figure()
    ax.plot(g.x, fld.values[:, mid], color="k", label="minimizer")
    ax.plot(g.x, ref[:, mid], "--", color="C3", label="limit profile")
    ax.set_xlabel("x (blow-up units)")
    ax.legend()
    return _save(fig, path)
