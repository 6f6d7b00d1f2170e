"""Trap potentials V(x) = h(x) ∏ |x - x_i|^{p_i} and their flatness data.

The flatness of well i is measured by

    λ_i = ((p/2) · M_p · κ_i)^{1/(2+p)},   κ_i = lim_{x→x_i} V(x) / |x - x_i|^p,

with p the largest well power and M_p = ∫|x|^p Q².  Wells with p_i < p
have κ_i = ∞.  The collapsing condensate picks a well with the smallest λ_i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# names available to envelope expressions besides the coordinates x, y
_EXPR_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "tanh", "cosh", "sinh",
        "arctan", "arctan2", "hypot", "minimum", "maximum", "pi", "e", "where",
    )
}


@dataclass(frozen=True)
class Well:
    x: tuple
    p: float

    def __post_init__(self):
        object.__setattr__(self, "x", (float(self.x[0]), float(self.x[1])))
        object.__setattr__(self, "p", float(self.p))


@dataclass(frozen=True)
class Envelope:
    """Bounded factor h(x).

    ``kind="const"`` uses ``value``; ``kind="expr"`` evaluates ``source`` as a
    numpy expression in ``x`` and ``y`` and must satisfy C <= h <= 1/C.
    """

    kind: str = "const"
    value: float = 1.0
    source: str = ""
    C: float = math.nan

    def __call__(self, x, y):
        if self.kind == "const":
            return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, self.value)
        ns = dict(_EXPR_NAMESPACE, x=np.asarray(x, float), y=np.asarray(y, float))
        out = eval(self._code, {"__builtins__": {}, **ns})
        return np.broadcast_to(np.asarray(out, float), np.broadcast(ns["x"], ns["y"]).shape).copy()

    @property
    def _code(self):
        return compile(self.source, "<envelope>", "eval")

    def scaled(self, c):
        if self.kind == "const":
            return Envelope("const", self.value * c)
        return Envelope("expr", source=f"({c!r})*({self.source})", C=min(self.C * c, self.C / c))

    def to_dict(self):
        if self.kind == "const":
            return {"kind": "const", "value": self.value}
        return {"kind": "expr", "source": self.source, "C": self.C}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", None)
        if kind == "const":
            allowed = {"value"}
        elif kind == "expr":
            allowed = {"source", "C"}
        else:
            raise ConfigError(f"envelope kind must be 'const' or 'expr', got {kind!r}", field="h.kind")
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown envelope keys {sorted(extra)}", field="h")
        if kind == "const":
            return cls("const", float(d.get("value", 1.0)))
        if "source" not in d or "C" not in d:
            raise ConfigError("expression envelope needs 'source' and 'C'", field="h")
        return cls("expr", source=str(d["source"]), C=float(d["C"]))


@dataclass(frozen=True)
class TrapSpec:
    wells: tuple
    envelope: Envelope = field(default_factory=Envelope)

    def __post_init__(self):
        wells = tuple(w if isinstance(w, Well) else Well(*w) for w in self.wells)
        object.__setattr__(self, "wells", wells)
        validate(self)

    @property
    def n(self):
        return len(self.wells)

    @property
    def positions(self):
        return np.array([w.x for w in self.wells])

    @property
    def powers(self):
        return np.array([w.p for w in self.wells])

    @property
    def envelope_limits(self):
        """lim_{x→x_i} h(x); h is required to be continuous at the wells."""
        pos = self.positions
        return {i: float(v) for i, v in enumerate(self.envelope(pos[:, 0], pos[:, 1]))}

    def min_separation(self):
        pos = self.positions
        if len(pos) < 2:
            return math.inf
        d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
        return float(d[np.triu_indices(len(pos), 1)].min())

    def __call__(self, x, y):
        """V on arrays of coordinates."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = self.envelope(x, y)
        for w in self.wells:
            r = np.hypot(x - w.x[0], y - w.x[1])
            out = out * r**w.p
        return out

    def translated(self, shift):
        sx, sy = shift
        wells = tuple(Well((w.x[0] + sx, w.x[1] + sy), w.p) for w in self.wells)
        env = self.envelope
        if env.kind == "expr":
            src = env.source
            env = Envelope("expr", source=f"(lambda x, y: {src})(x - ({sx!r}), y - ({sy!r}))", C=env.C)
        return TrapSpec(wells, env)

    def permuted(self, order):
        return TrapSpec(tuple(self.wells[i] for i in order), self.envelope)

    def to_dict(self):
        return {
            "wells": [{"x": list(w.x), "p": w.p} for w in self.wells],
            "h": self.envelope.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        extra = set(d) - {"wells", "h"}
        if extra:
            raise ConfigError(f"unknown trap keys {sorted(extra)}", field="trap")
        if "wells" not in d:
            raise ConfigError("trap spec needs a 'wells' list", field="trap.wells")
        wells = []
        for i, w in enumerate(d["wells"]):
            if set(w) != {"x", "p"}:
                raise ConfigError(f"well {i} must have exactly the keys 'x' and 'p'", field=f"wells[{i}]")
            if len(w["x"]) != 2:
                raise ConfigError(f"well {i} position must be 2D", field=f"wells[{i}].x")
            wells.append(Well(tuple(w["x"]), w["p"]))
        env = Envelope.from_dict(d.get("h", {"kind": "const", "value": 1.0}))
        try:
            return cls(tuple(wells), env)
        except ValueError as exc:
            raise ConfigError(str(exc), field="trap") from exc

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def harmonic(center=(0.0, 0.0), strength=1.0):
    """V(x) = strength · |x - center|²."""
    return TrapSpec((Well(center, 2.0),), Envelope("const", strength))


def double_well(d=2.0, p=2.0):
    """V(x) = |x - x₁|^p |x - x₂|^p with x₁,₂ = (∓d/2, 0)."""
    return TrapSpec((Well((-d / 2, 0.0), p), Well((d / 2, 0.0), p)))


def validate(spec, sample_half_width=None, samples=101):
    if not spec.wells:
        raise ValueError("trap needs at least one well")
    for i, w in enumerate(spec.wells):
        if not (w.p > 0 and math.isfinite(w.p)):
            raise ValueError(f"well {i}: power must be positive, got {w.p}")
        if not all(math.isfinite(c) for c in w.x):
            raise ValueError(f"well {i}: non-finite position")
    if spec.n > 1 and spec.min_separation() == 0.0:
        raise ValueError("well positions must be pairwise distinct")
    env = spec.envelope
    if env.kind == "const":
        if not (env.value > 0 and math.isfinite(env.value)):
            raise ValueError(f"constant envelope must be positive, got {env.value}")
        return
    if not 0 < env.C <= 1:
        raise ValueError(f"envelope bound C must lie in (0, 1], got {env.C}")
    pos = spec.positions
    if sample_half_width is None:
        sample_half_width = 2.0 * (np.abs(pos).max() + 2.0)
    s = np.linspace(-sample_half_width, sample_half_width, samples)
    X, Y = np.meshgrid(s, s, indexing="ij")
    hv = np.concatenate([env(X, Y).ravel(), env(pos[:, 0], pos[:, 1])])
    if not np.all(np.isfinite(hv)):
        raise ValueError("envelope is not finite on the sample grid")
    if hv.min() < env.C or hv.max() > 1.0 / env.C:
        raise ValueError(
            f"envelope leaves [C, 1/C] = [{env.C}, {1 / env.C}] on the sample grid "
            f"(range [{hv.min()}, {hv.max()}])"
        )


def eval_potential(spec, x):
    """V at a single 2D point; exactly zero at the well centers."""
    return float(spec(np.array([x[0]]), np.array([x[1]]))[0])


def flatness(spec):
    """p = max_i p_i."""
    return float(max(w.p for w in spec.wells))


@dataclass(frozen=True)
class LambdaReport:
    """Per-well concentration scales; ``math.inf`` marks wells with p_i < p."""

    p: float
    lambda_per_well: tuple
    kappa_per_well: tuple
    flattest_set: tuple

    @property
    def lam(self):
        return min(self.lambda_per_well)

    def to_dict(self):
        enc = lambda v: "inf" if math.isinf(v) else v  # noqa: E731
        return {
            "p": self.p,
            "lambda": enc(self.lam),
            "lambda_per_well": [enc(v) for v in self.lambda_per_well],
            "kappa_per_well": [enc(v) for v in self.kappa_per_well],
            "flattest_set": list(self.flattest_set),
        }


def lambda_values(spec, constants):
    """Flatness scales λ_i, their minimum λ and the set 𝒵 of flattest wells.

    ``constants`` must carry the moment M_p for p = :func:`flatness` (spec).
    """
    p = flatness(spec)
    m_p = constants.moment(p)
    limits = spec.envelope_limits
    kappas = []
    lams = []
    for i, wi in enumerate(spec.wells):
        if wi.p < p and not math.isclose(wi.p, p, rel_tol=1e-12):
            kappas.append(math.inf)
            lams.append(math.inf)
            continue
        kappa = limits[i]
        for j, wj in enumerate(spec.wells):
            if j != i:
                kappa *= math.hypot(wi.x[0] - wj.x[0], wi.x[1] - wj.x[1]) ** wj.p
        kappas.append(kappa)
        lams.append((0.5 * p * m_p * kappa) ** (1.0 / (2.0 + p)))
    lam = min(lams)
    flattest = tuple(i for i, v in enumerate(lams) if math.isfinite(v) and math.isclose(v, lam, rel_tol=1e-12))
    return LambdaReport(p, tuple(lams), tuple(kappas), flattest)
