"""Command-line front-end: ``gpcollapse {kwong,minimize,sweep,lambda}``.

Each run reads one JSON document (``--config``); scalar flags override its
fields.  Outputs go to ``out`` (default: the current directory) and every
CSV/JSON file carries the tool version and a hash of the effective
configuration.  Exit status: 0 ok, 2 configuration error, 3 coupling at or
above a*, 4 power-law fit impossible, 1 any other solver failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np

from . import __version__, asymptotics, gp2d, kwong
from .errors import ConfigError, NoFitError, ThresholdExceeded
from .io import dumps_json, provenance, provenance_line
from .potential import TrapSpec, lambda_values

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_THRESHOLD = 3
EXIT_NOFIT = 4

# keys that only steer where/how results are written, left out of the hash
_UNHASHED = {"out", "plots", "workers"}

_GRID_KEYS = {f.name for f in dc_fields(gp2d.MinimizeOptions)} - {"record_history"}

_KEYS = {
    "kwong": {"out", "plots", "dr", "r_max", "tol", "bracket", "powers", "gamma_scan"},
    "minimize": {"out", "plots", "trap", "a", "a_ratio", "frame", "well", "grid"},
    "sweep": {
        "out", "plots", "trap", "a_list", "a_ratios", "window", "blowup", "lab",
        "wells", "rho", "workers", "require_fit", "symmetry",
    },
    "lambda": {"trap", "powers"},
}

_SYMMETRY_KEYS = {"ratios", "perturbation", "seed", "L", "n", "order", "threshold", "rho"}

_GAMMA_SCAN_DEFAULT = {"min": 0.25, "max": 8.0, "n": 321}


# ----------------------------------------------------------------------------
# configuration


def _load_config(path):
    if path is None:
        return {}, os.getcwd()
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", field="config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}", field="config") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", field="config")
    return cfg, os.path.dirname(os.path.abspath(path))


def _check_keys(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}", field=sorted(extra)[0])


def _number(cfg, key, kind=float, positive=False, allow_none=False):
    v = cfg.get(key)
    if v is None and allow_none:
        return None
    try:
        if isinstance(v, bool):
            raise TypeError
        x = kind(v)
        if kind is int and x != v:
            raise TypeError
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number, got {v!r}", field=key) from exc
    if isinstance(x, float) and not math.isfinite(x):
        raise ConfigError(f"{key} must be finite, got {v!r}", field=key)
    if positive and not x > 0:
        raise ConfigError(f"{key} must be positive, got {v!r}", field=key)
    return x


def _resolve_trap(cfg, base):
    """Replace ``trap`` (inline object or path) by its parsed TrapSpec."""
    ref = cfg.get("trap")
    if ref is None:
        raise ConfigError("config needs a 'trap' (inline object or path to a JSON file)", field="trap")
    if isinstance(ref, str):
        path = ref if os.path.isabs(ref) else os.path.join(base, ref)
        try:
            with open(path) as fh:
                ref = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load trap file {path}: {exc}", field="trap") from exc
    if not isinstance(ref, dict):
        raise ConfigError("trap must be an object or a path", field="trap")
    return TrapSpec.from_dict(ref)


def _grid_options(d, where, defaults=None):
    d = dict(d or {})
    _check_keys(d, _GRID_KEYS, where)
    opts = defaults or gp2d.MinimizeOptions()
    kw = {}
    for key, val in d.items():
        if key in ("n", "max_iter", "seed", "well"):
            kw[key] = _number(d, key, int)
        elif key == "order":
            kw[key] = None if val is None else _number(d, key, int)
        elif key in ("init", "preconditioner"):
            if not isinstance(val, str):
                raise ConfigError(f"{where}.{key} must be a string", field=key)
            kw[key] = val
        else:
            kw[key] = _number(d, key, float, allow_none=True)
    try:
        opts = gp2d.MinimizeOptions(**{**opts.__dict__, **kw, "record_history": False})
    except TypeError as exc:
        raise ConfigError(str(exc), field=where) from exc
    if isinstance(opts.init, str) and opts.init not in ("auto", "gaussian", "kwong", "symmetric"):
        raise ConfigError(f"unknown init {opts.init!r}", field="init")
    opts.validate()
    return opts


def _hashable(cfg, spec=None):
    h = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    if spec is not None:
        h["trap"] = spec.to_dict()
    return h


class _Run:
    """Effective configuration of one command plus its output location."""

    def __init__(self, cfg, base, command, spec=None):
        self.cfg = cfg
        self.command = command
        self.spec = spec
        out = cfg.get("out", ".")
        self.out = out if os.path.isabs(out) else os.path.normpath(os.path.join(base, out))
        self.plots = bool(cfg.get("plots", True))
        self.hashed = dict(_hashable(cfg, spec), command=command)
        self.prov = provenance(self.hashed)
        self.prov_line = provenance_line(self.hashed)

    def path(self, name):
        return os.path.join(self.out, name)

    def prepare(self):
        os.makedirs(self.out, exist_ok=True)

    def write_json(self, name, obj):
        obj = dict(obj)
        obj["provenance"] = self.prov
        with open(self.path(name), "w") as fh:
            fh.write(dumps_json(obj))
        return self.path(name)

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w") as fh:
            fh.write(f"# {self.prov_line}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
        return self.path(name)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _plot(run, func, *args):
    """Figures are optional extras: a plotting failure never fails the run."""
    if not run.plots:
        return None
    try:
        from . import plotting
    except ImportError:  # pragma: no cover
        return None
    try:
        return getattr(plotting, func)(*args)
    except Exception as exc:  # pragma: no cover
        print(f"warning: figure {args[-1]} not written: {exc}", file=sys.stderr)
        return None


# ----------------------------------------------------------------------------
# commands


def cmd_kwong(cfg, base):
    cfg = dict(cfg)
    _check_keys(cfg, _KEYS["kwong"], "kwong")
    dr = _number({"dr": cfg.get("dr", kwong.DEFAULT_DR)}, "dr", positive=True)
    r_max = _number({"r_max": cfg.get("r_max", kwong.DEFAULT_R_MAX)}, "r_max", positive=True)
    tol = _number({"tol": cfg.get("tol", kwong.DEFAULT_TOL)}, "tol", positive=True)
    bracket = cfg.get("bracket", list(kwong.DEFAULT_BRACKET))
    if not (isinstance(bracket, (list, tuple)) and len(bracket) == 2):
        raise ConfigError("bracket must be a pair [lo, hi]", field="bracket")
    powers = cfg.get("powers", [0, 2])
    if not isinstance(powers, list) or not all(isinstance(k, (int, float)) and k >= 0 for k in powers):
        raise ConfigError("powers must be a list of numbers >= 0", field="powers")
    scan = cfg.get("gamma_scan", False)
    if scan is True:
        scan = dict(_GAMMA_SCAN_DEFAULT)
    elif isinstance(scan, dict):
        _check_keys(scan, {"min", "max", "n"}, "gamma_scan")
        scan = {**_GAMMA_SCAN_DEFAULT, **scan}
        if not 0 < scan["min"] < scan["max"] or int(scan["n"]) < 2:
            raise ConfigError("gamma_scan needs 0 < min < max and n >= 2", field="gamma_scan")
    elif scan is not False:
        raise ConfigError("gamma_scan must be true, false or {min, max, n}", field="gamma_scan")
    cfg.update(dr=dr, r_max=r_max, tol=tol, bracket=list(bracket), powers=powers, gamma_scan=scan)

    run = _Run(cfg, base, "kwong")
    profile = kwong.solve_kwong(tol=tol, r_max=r_max, dr=dr, bracket=tuple(float(b) for b in bracket))
    consts = kwong.kwong_constants(profile, powers=tuple(float(k) for k in powers))
    ident = kwong.kwong_identities(profile)
    run.prepare()

    kwong.write_profile(run.path("kwong_profile.txt"), profile, extra_header=run.prov_line)
    d = consts.to_dict()
    d.update(
        a_star_over_2pi=consts.a_star / (2 * math.pi),
        l4_norm=consts.l4_norm,
        grad_norm=consts.grad_norm,
        identities={
            "virial": ident.virial,
            "pohozaev": ident.pohozaev,
            "status": ident.status,
        },
    )
    run.write_json("kwong_constants.json", d)

    lower = 2 * math.pi
    upper = kwong.gaussian_family_minimum()[1]
    ok = lower <= consts.a_star <= upper
    line = (
        f"bounds {'OK' if ok else 'VIOLATED'}: 2pi = {lower:.17g} <= a* = {consts.a_star:.17g} "
        f"<= 2pi e ln2 = {upper:.17g}"
    )
    with open(run.path("kwong_bounds.txt"), "w") as fh:
        fh.write(f"# {run.prov_line}\n{line}\n")
    print(f"a* = {consts.a_star:.17g}  (a*/2pi = {consts.a_star / (2 * math.pi):.17g})")
    print(f"b* = Q(0) = {consts.b_star:.17g}")
    print(line)

    if scan:
        gammas = np.geomspace(scan["min"], scan["max"], int(scan["n"]))
        rows = kwong.gamma_scan(gammas)
        run.write_csv(
            "gamma_scan.csv", ["gamma", "bound", "bound_over_2pi"], [(g, v, v / (2 * math.pi)) for g, v in rows]
        )
        g_num, v_num = kwong.gaussian_family_minimum(numeric=True)
        print(f"gamma scan minimum: gamma = {g_num:.17g} (ln 4 = {math.log(4):.17g}), bound = {v_num:.17g}")
        _plot(run, "plot_gamma_scan", rows, consts.a_star, run.path("gamma_scan.png"))
    _plot(run, "plot_profile", profile, run.path("kwong_profile.png"))
    return EXIT_OK if ok else EXIT_FAILURE


def _coupling(cfg, a_star):
    if ("a" in cfg) == ("a_ratio" in cfg):
        raise ConfigError("give exactly one of 'a' and 'a_ratio'", field="a")
    if "a" in cfg:
        return _number(cfg, "a")
    return _number(cfg, "a_ratio") * a_star


def cmd_minimize(cfg, base):
    cfg = dict(cfg)
    _check_keys(cfg, _KEYS["minimize"], "minimize")
    spec = _resolve_trap(cfg, base)
    frame = cfg.get("frame", "lab")
    if frame not in ("lab", "blowup"):
        raise ConfigError(f"frame must be 'lab' or 'blowup', got {frame!r}", field="frame")
    well = _number({"well": cfg.get("well", 0)}, "well", int)
    opts = _grid_options(cfg.get("grid"), "grid")
    profile = kwong.default_profile()
    a_star = kwong.critical_coupling()
    a = _coupling(cfg, a_star)
    run = _Run(cfg, base, "minimize", spec)

    if frame == "lab":
        opts.well = well
        res = gp2d.minimize(spec, a, opts, a_star=a_star, profile=profile)
    else:
        res = gp2d.minimize_rescaled(spec, a, well, opts, a_star=a_star, profile=profile)
    run.prepare()
    conc = asymptotics.concentration_index(res.field, spec)
    summary = res.summary()
    summary.update(a_star=a_star, ratio=a / a_star, masses=list(conc.masses), dominant_well=conc.dominant)
    if res.frame.is_blowup:
        rep = lambda_values(spec, kwong.kwong_constants(profile, powers=(0.0, spec.powers.max())))
        lam = rep.lambda_per_well[well]
        if math.isfinite(lam):
            summary["profile_distance"] = asymptotics.profile_distance(res, lam, profile)
    gp2d.write_field(run.path("field"), res, extra=run.prov)
    run.write_json("minimize_summary.json", summary)
    print(f"a = {a:.17g} (a/a* = {a / a_star:.6f}), frame {res.frame.kind}")
    print(f"e(a) = {res.energy:.17g}  mu = {res.mu:.17g}  int u^4 = {res.l4:.17g}")
    print(f"iterations {res.iterations}, converged {res.converged}, residual {res.residual:.3g}")
    _plot(run, "plot_density", res, run.path("density.png"))
    return EXIT_OK


def _ratios(cfg, key):
    v = cfg[key]
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{key} must be a list of numbers", field=key)
    return [float(x) for x in v]


def _write_sweep(run, report, spec):
    n = spec.n
    header = ["a", "eps", "energy", "l4", "mu"] + [f"mass_{i + 1}" for i in range(n)]
    rows = [(e.a, e.eps, e.energy, e.l4, e.mu, *e.masses) for e in report.entries]
    run.write_csv("sweep.csv", header, rows)
    run.write_csv(
        "distances.csv",
        ["a", "ratio", "frame", "well", "distance", "converged", "iterations", "residual"],
        [(e.a, e.ratio, e.frame, e.well, e.distance, e.converged, e.iterations, e.residual) for e in report.entries],
    )


def _symmetry_block(cfg, spec, profile):
    sym = cfg.get("symmetry")
    if sym is None:
        return None
    if not isinstance(sym, dict):
        raise ConfigError("symmetry must be an object", field="symmetry")
    _check_keys(sym, _SYMMETRY_KEYS, "symmetry")
    ratios = _ratios({"ratios": sym.get("ratios", [0.1, 0.98])}, "ratios")
    grid = {k: sym[k] for k in ("L", "n", "order", "seed", "perturbation") if k in sym}
    grid.setdefault("perturbation", 0.05)
    grid.setdefault("L", 3.0)
    opts = _grid_options(grid, "symmetry")
    threshold = _number({"threshold": sym.get("threshold", asymptotics.SYMMETRY_BREAKING_MASS)}, "threshold")
    rho = _number(sym, "rho", allow_none=True)
    return asymptotics.symmetry_probe(spec, ratios, opts, rho=rho, threshold=threshold, profile=profile), threshold


def cmd_sweep(cfg, base):
    cfg = dict(cfg)
    _check_keys(cfg, _KEYS["sweep"], "sweep")
    spec = _resolve_trap(cfg, base)
    profile = kwong.default_profile()
    a_star = kwong.critical_coupling()
    if ("a_list" in cfg) == ("a_ratios" in cfg):
        raise ConfigError("give exactly one of 'a_list' and 'a_ratios'", field="a_list")
    a_list = _ratios(cfg, "a_list") if "a_list" in cfg else [r * a_star for r in _ratios(cfg, "a_ratios")]
    window = cfg.get("window", [0.9, 0.995])
    if not (isinstance(window, list) and len(window) == 2 and 0 < window[0] <= window[1]):
        raise ConfigError("window must be [lo, hi] with 0 < lo <= hi", field="window")
    wells = cfg.get("wells")
    if wells is not None and (
        not isinstance(wells, list) or not wells or not all(isinstance(i, int) and 0 <= i < spec.n for i in wells)
    ):
        raise ConfigError("wells must be a non-empty list of well indices", field="wells")
    opts = asymptotics.SweepOptions(
        window=tuple(float(w) for w in window),
        blowup=_grid_options(cfg.get("blowup"), "blowup"),
        lab=_grid_options(cfg.get("lab"), "lab"),
        wells=tuple(wells) if wells is not None else None,
        rho=_number(cfg, "rho", allow_none=True),
        workers=_number({"workers": cfg.get("workers", 1)}, "workers", int, positive=True),
        require_fit=bool(cfg.get("require_fit", True)),
    )
    run = _Run(cfg, base, "sweep", spec)
    if not a_list:
        print("error: empty coupling list, nothing to fit", file=sys.stderr)
        return EXIT_NOFIT

    status = EXIT_OK
    try:
        report = asymptotics.sweep(spec, a_list, opts, profile=profile)
    except NoFitError as exc:
        report = exc.report
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_NOFIT
    run.prepare()
    if report is not None:
        _write_sweep(run, report, spec)
    fits = report.fits_dict() if report is not None else {}
    fits["mu_eps2"] = report.mu_eps2() if report is not None else []

    probe = _symmetry_block(cfg, spec, profile)
    if probe is not None:
        rows, threshold = probe
        run.write_csv(
            "symmetry.csv",
            ["a", "ratio", "energy", "dominant_well", "dominant_mass", "broken"]
            + [f"mass_{i + 1}" for i in range(spec.n)],
            [(s.a, s.ratio, s.energy, s.dominant, s.masses[s.dominant], s.broken, *s.masses) for s in rows],
        )
        top = max(rows, key=lambda s: s.ratio)
        fits["symmetry"] = {
            "threshold": threshold,
            "ratio": top.ratio,
            "dominant_well": top.dominant,
            "dominant_mass": top.masses[top.dominant],
            "symmetry_breaking": top.broken,
        }
    run.write_json("fits.json", fits)

    if report is not None:
        for e in report.entries:
            print(f"a/a* = {e.ratio:.4f}  e = {e.energy:.10g}  int u^4 = {e.l4:.10g}  [{e.frame}]")
        for f in report.failures:
            print(f"a/a* = {f.ratio:.4f}  failed: {f.error}: {f.message}")
        if report.energy_fit is not None:
            pr = report.predictions
            print(
                f"energy fit: exponent {report.energy_fit.exponent:.6f} (limit {pr.energy_exponent:.6f}), "
                f"prefactor {report.energy_fit.prefactor:.6f} (limit {pr.energy_prefactor:.6f})"
            )
            print(
                f"L4 fit: exponent {report.l4_fit.exponent:.6f} (limit {pr.l4_exponent:.6f}), "
                f"prefactor {report.l4_fit.prefactor:.6f} (limit {pr.l4_prefactor:.6f})"
            )
            _plot(run, "plot_sweep", report, run.path("sweep.png"))
    if probe is not None:
        s = fits["symmetry"]
        print(
            f"symmetry probe at a/a* = {s['ratio']}: well {s['dominant_well']} holds "
            f"{s['dominant_mass']:.4f}, symmetry breaking {s['symmetry_breaking']}"
        )
    return status


def cmd_lambda(cfg, base):
    cfg = dict(cfg)
    _check_keys(cfg, _KEYS["lambda"], "lambda")
    spec = _resolve_trap(cfg, base)
    consts = kwong.kwong_constants(kwong.default_profile(), powers=(0.0, float(spec.powers.max())))
    rep = lambda_values(spec, consts)
    d = rep.to_dict()
    d["provenance"] = provenance(dict(_hashable(cfg, spec), command="lambda"))
    sys.stdout.write(dumps_json(d))
    return EXIT_OK


# ----------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(prog="gpcollapse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gpcollapse {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trap=True):
        p.add_argument("--config", help="JSON run configuration")
        if trap:
            p.add_argument("--trap", help="trap spec JSON file (overrides the config)")

    def outputs(p):
        p.add_argument("--out", help="output directory")
        p.add_argument("--no-plots", dest="plots", action="store_false", default=None, help="skip figures")

    p = sub.add_parser("kwong", help="solve for Q, a* and the moments")
    common(p, trap=False)
    outputs(p)
    p.add_argument("--dr", type=float)
    p.add_argument("--r-max", dest="r_max", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--gamma-scan", dest="gamma_scan", action="store_true", default=None)

    p = sub.add_parser("minimize", help="one ground state")
    common(p)
    outputs(p)
    p.add_argument("--a", type=float)
    p.add_argument("--a-ratio", dest="a_ratio", type=float)
    p.add_argument("--frame", choices=("lab", "blowup"))
    p.add_argument("--well", type=int)
    for name, typ in (("L", float), ("n", int), ("order", int), ("seed", int), ("perturbation", float)):
        p.add_argument(f"--{name}", dest=f"grid.{name}", type=typ)
    p.add_argument("--init", dest="grid.init")

    p = sub.add_parser("sweep", help="a -> a* sweep with power-law fits")
    common(p)
    outputs(p)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("lambda", help="print the flatness report of a trap")
    common(p)
    return parser


def _apply_overrides(cfg, args):
    cfg = copy.deepcopy(cfg)
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        if key == "trap":
            cfg["trap"] = os.path.abspath(val)
        elif "." in key:
            outer, inner = key.split(".")
            cfg.setdefault(outer, {})[inner] = val
        elif key == "out":
            cfg["out"] = os.path.abspath(val)
        else:
            cfg[key] = val
    if "a" in vars(args) and args.a is not None:
        cfg.pop("a_ratio", None)
    if "a_ratio" in vars(args) and args.a_ratio is not None:
        cfg.pop("a", None)
    return cfg


_COMMANDS = {"kwong": cmd_kwong, "minimize": cmd_minimize, "sweep": cmd_sweep, "lambda": cmd_lambda}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg, base = _load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        return _COMMANDS[args.command](cfg, base)
    except ConfigError as exc:
        where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
        print(f"configuration error{where}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ThresholdExceeded as exc:
        print(f"threshold: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except NoFitError as exc:
        print(f"no fit: {exc}", file=sys.stderr)
        return EXIT_NOFIT
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
