"""Joint valuation-signal laws built from copulas and marginals.

A predictor is the pair (copula, two marginals); the joint CDF is
C(F1(v), F2(s)).  Built-in copula families are independence, comonotonic,
AMH, FGM and arbitrary convex mixtures of those; the gamma-mixture of the
comonotonic and independence copulas (signal exactly right with
probability gamma, pure noise otherwise) is called hallucinatory here and
gets a dedicated constructor because a closed-form belief backend exists
for it.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._backend import kernels
from ._kernels_py import (FAM_AMH, FAM_COMONOTONIC, FAM_FGM,
                          FAM_INDEPENDENCE)
from .numerics import (DEFAULT_SPEC, fixed_gl_pieces,
                       integrate_batched)

_FAMILY_NAMES = {
    FAM_INDEPENDENCE: "independence",
    FAM_COMONOTONIC: "comonotonic",
    FAM_AMH: "amh",
    FAM_FGM: "fgm",
}
_FAMILY_CODES = {v: k for k, v in _FAMILY_NAMES.items()}


class Copula:
    """Flattened convex mixture of the built-in copula families."""

    def __init__(self, fams, alphas, weights, validate=True):
        fams = np.asarray(fams, dtype=np.int64)
        alphas = np.asarray(alphas, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if not (len(fams) == len(alphas) == len(weights)) or len(fams) == 0:
            raise ValueError("component arrays must be non-empty and aligned")
        if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if validate and np.any((alphas < 0.0) | (alphas > 1.0)):
            raise ValueError(
                "copula parameters must lie in [0, 1]; relabel the signal "
                "for negative dependence")
        if np.any((alphas < -1.0) | (alphas > 1.0)):
            raise ValueError("copula parameters outside the feasible [-1, 1]")
        # normalise: alpha=0 AMH/FGM components are plain independence
        fams = fams.copy()
        fams[(alphas == 0.0) & ((fams == FAM_AMH) | (fams == FAM_FGM))] = \
            FAM_INDEPENDENCE
        self.fams = fams
        self.alphas = alphas
        self.weights = weights

    # -- constructors ----------------------------------------------------
    @classmethod
    def independence(cls):
        return cls([FAM_INDEPENDENCE], [0.0], [1.0])

    @classmethod
    def comonotonic(cls):
        return cls([FAM_COMONOTONIC], [0.0], [1.0])

    @classmethod
    def amh(cls, alpha, validate=True):
        return cls([FAM_AMH], [alpha], [1.0], validate=validate)

    @classmethod
    def fgm(cls, alpha, validate=True):
        return cls([FAM_FGM], [alpha], [1.0], validate=validate)

    @classmethod
    def hallucinatory(cls, gamma):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if gamma == 0.0:
            return cls.independence()
        if gamma == 1.0:
            return cls.comonotonic()
        return cls([FAM_COMONOTONIC, FAM_INDEPENDENCE], [0.0, 0.0],
                   [gamma, 1.0 - gamma])

    @classmethod
    def mixture(cls, weights, components):
        if len(weights) != len(components) or not components:
            raise ValueError("weights and components must align")
        fams, alphas, ws = [], [], []
        for w, comp in zip(weights, components):
            fams.extend(comp.fams.tolist())
            alphas.extend(comp.alphas.tolist())
            ws.extend((w * comp.weights).tolist())
        return cls(fams, alphas, ws, validate=False)

    # -- queries ----------------------------------------------------------
    def cab(self, x, y):
        """(C, dC/dx, dC/dy) elementwise; comonotonic kink convention
        C1 = 1{x <= y}, C2 = 1{y < x}."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
            raise ValueError("copula arguments must lie in [0, 1]")
        return kernels.copula_cab(self.fams, self.alphas, self.weights, x, y)

    def cdf(self, x, y):
        return self.cab(x, y)[0]

    @property
    def comonotonic_weight(self):
        return float(self.weights[self.fams == FAM_COMONOTONIC].sum())

    @property
    def is_hallucinatory(self):
        """True when the mixture only involves the comonotonic and
        independence families, i.e. the closed-form backend applies."""
        return bool(np.all((self.fams == FAM_COMONOTONIC)
                           | (self.fams == FAM_INDEPENDENCE)))

    def to_json(self):
        if len(self.fams) == 1:
            fam = _FAMILY_NAMES[int(self.fams[0])]
            out = {"family": fam}
            if fam in ("amh", "fgm"):
                out["alpha"] = float(self.alphas[0])
            return out
        if self.is_hallucinatory:
            return {"family": "hallucinatory",
                    "gamma": self.comonotonic_weight}
        comps = []
        for f, a in zip(self.fams, self.alphas):
            entry = {"family": _FAMILY_NAMES[int(f)]}
            if int(f) in (FAM_AMH, FAM_FGM):
                entry["alpha"] = float(a)
            comps.append(entry)
        return {"family": "mixture",
                "weights": [float(w) for w in self.weights],
                "components": comps}

    def __repr__(self):
        return f"Copula({self.to_json()})"


@dataclass
class Marginal:
    """Distribution on [0, 1] given by cdf/pdf/quantile callables."""

    cdf: callable
    pdf: callable
    quantile: callable
    family: str
    params: dict = field(default_factory=dict)

    def xpdf(self, x):
        """x * pdf(x) with the exact x -> 0 limit (pdf may blow up there)."""
        x = np.asarray(x, dtype=float)
        if self.family == "power":
            c = self.params["c"]
            return c * np.power(x, c)
        with np.errstate(invalid="ignore"):
            return np.where(x > 0.0, x * self.pdf(x), 0.0)

    @classmethod
    def power(cls, c):
        """F(x) = x**c on [0, 1]; c = 1 is the uniform distribution."""
        if c <= 0:
            raise ValueError("power-law exponent must be positive")

        def cdf(x):
            return np.power(np.asarray(x, dtype=float), c)

        def pdf(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore"):
                return c * np.power(x, c - 1.0)

        def quantile(u):
            return np.power(np.asarray(u, dtype=float), 1.0 / c)

        return cls(cdf, pdf, quantile, "power", {"c": float(c)})

    @classmethod
    def uniform(cls):
        return cls.power(1.0)

    @classmethod
    def from_table(cls, grid, cdf_values):
        from .numerics import TabulatedFunction
        tab = TabulatedFunction(np.asarray(grid, dtype=float),
                                np.asarray(cdf_values, dtype=float),
                                monotone=True)
        if abs(tab.values[0]) > 1e-12 or abs(tab.values[-1] - 1.0) > 1e-12:
            raise ValueError("tabulated CDF must run from 0 to 1")
        probe = np.linspace(0.005, 0.995, 199)
        if np.any(tab.derivative(probe) <= 0.0):
            raise ValueError("tabulated CDF implies a non-positive density")
        return cls(tab, tab.derivative, tab.inverse, "table",
                   {"grid": tab.grid, "cdf": tab.values})

    def to_json(self):
        if self.family == "power":
            return {"family": "power", "c": self.params["c"]}
        return {"family": "table",
                "grid": [float(g) for g in self.params["grid"]],
                "cdf": [float(v) for v in self.params["cdf"]]}


@dataclass
class Predictor:
    copula: Copula
    f1: Marginal
    f2: Marginal

    def joint_cdf(self, v, s):
        return self.copula.cdf(self.f1.cdf(v), self.f2.cdf(s))

    def to_json(self):
        return {"copula": self.copula.to_json(),
                "f1": self.f1.to_json(), "f2": self.f2.to_json()}


def null_predictor(f1=None, f2=None):
    return Predictor(Copula.independence(), f1 or Marginal.uniform(),
                     f2 or Marginal.uniform())


def perfect_predictor(f1=None, f2=None):
    return Predictor(Copula.comonotonic(), f1 or Marginal.uniform(),
                     f2 or Marginal.uniform())


def hallucinatory_predictor(gamma, f1=None, f2=None):
    return Predictor(Copula.hallucinatory(gamma), f1 or Marginal.uniform(),
                     f2 or Marginal.uniform())


# -- operations ------------------------------------------------------------

def copula_partials(cop, x, y):
    """C(x, y) together with both partial derivatives."""
    return cop.cab(x, y)


def cond_cdf_value_given_signal(p, v, s):
    """P(V <= v | S = s) = C2(F1(v), F2(s))."""
    return p.copula.cab(p.f1.cdf(v), p.f2.cdf(s))[2]


def cond_cdf_signal_given_value(p, s, v):
    """P(S <= s | V = v) = C1(F1(v), F2(s))."""
    return p.copula.cab(p.f1.cdf(v), p.f2.cdf(s))[1]


def _split_comonotonic(cop):
    """(comonotonic weight, renormalised smooth remainder or None)."""
    smooth = [(f, a, w) for f, a, w in zip(cop.fams, cop.alphas, cop.weights)
              if f != FAM_COMONOTONIC]
    gamma = cop.comonotonic_weight
    if not smooth:
        return gamma, None, 0.0
    ws = np.array([c[2] for c in smooth])
    sub = Copula([c[0] for c in smooth], [c[1] for c in smooth],
                 ws / ws.sum(), validate=False)
    return gamma, sub, float(ws.sum())


def cond_expectation(p, s):
    """E[V | S = s] = integral of 1 - C2(F1(v), F2(s)) over v.

    The comonotonic mixture component contributes F1^{-1}(F2(s)) exactly;
    the remaining components are smooth in v (up to the usual endpoint
    kink of the prior CDF) and integrated adaptively.
    """
    s = np.asarray(s, dtype=float)
    scalar = s.ndim == 0
    y = np.atleast_1d(p.f2.cdf(s))
    gamma, sub, wsum = _split_comonotonic(p.copula)
    out = gamma * np.asarray(p.f1.quantile(y), dtype=float) * np.ones(y.shape)
    if sub is not None:
        for i, yi in enumerate(y.ravel()):
            val = integrate_batched(
                lambda v: 1.0 - sub.cab(p.f1.cdf(v),
                                        np.full_like(v, yi))[2],
                0.0, 1.0, DEFAULT_SPEC)
            out.ravel()[i] += wsum * val
    return float(out[0]) if scalar else out


def _cond_expectation_grid(p, s_grid, panels=64):
    """E[V | S = s] on a grid with a fixed quadrature rule.

    The absolute error of the fixed rule is a smooth function of s, so
    differences across the grid (all the monotonicity check needs) are far
    more accurate than the pointwise values.
    """
    y = np.atleast_1d(p.f2.cdf(np.asarray(s_grid, dtype=float)))
    gamma, sub, wsum = _split_comonotonic(p.copula)
    out = gamma * np.asarray(p.f1.quantile(y), dtype=float) * np.ones(y.shape)
    if sub is not None:
        def rows(vmat):
            c2 = sub.cab(p.f1.cdf(vmat), y[:, None] * np.ones_like(vmat))[2]
            return 1.0 - c2

        edges = np.tile(np.linspace(0.0, 1.0, panels + 1), (len(y), 1))
        out += wsum * fixed_gl_pieces(rows, edges, 10)
    return out


class PqdOrdering(Enum):
    A_DOMINATES = "A_dominates"
    B_DOMINATES = "B_dominates"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def pqd_compare(pa, pb, grid_size=201, slack=1e-12):
    """Pointwise comparison of joint CDFs (the PQD accuracy order)."""
    probe = np.linspace(0.0, 1.0, 101)
    if (np.max(np.abs(pa.f1.cdf(probe) - pb.f1.cdf(probe))) > 1e-9
            or np.max(np.abs(pa.f2.cdf(probe) - pb.f2.cdf(probe))) > 1e-9):
        raise ValueError("pqd_compare requires identical marginals")
    g = np.linspace(0.0, 1.0, grid_size)
    vv, ss = np.meshgrid(g, g, indexing="ij")
    fa = pa.joint_cdf(vv, ss)
    fb = pb.joint_cdf(vv, ss)
    a_ge = np.all(fa >= fb - slack)
    b_ge = np.all(fb >= fa - slack)
    if a_ge and b_ge:
        return PqdOrdering.EQUAL
    if a_ge:
        return PqdOrdering.A_DOMINATES
    if b_ge:
        return PqdOrdering.B_DOMINATES
    return PqdOrdering.INCOMPARABLE


@dataclass
class ValidationReport:
    assumption1: bool
    prd_v_given_s: bool
    prd_s_given_v: bool
    condition13: bool
    worst: dict = field(default_factory=dict)

    @property
    def all_ok(self):
        return (self.assumption1 and self.prd_v_given_s
                and self.prd_s_given_v and self.condition13)


def validate_predictor(p, grid_size=201):
    """Grid checks of the structural assumptions.

    assumption1: E[V | S = s] non-decreasing in s.
    prd_v_given_s: C2(x, y) non-increasing in y (positive regression
    dependence of V on S); prd_s_given_v symmetric; condition13:
    x*C1 + y*C2 - C >= 0, the copula condition guaranteeing that admitting
    everyone is revenue-maximizing in first-price auctions.
    """
    g = np.linspace(0.0, 1.0, grid_size)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    c, c1, c2 = p.copula.cab(xx, yy)

    tol = 1e-9
    s_grid = np.linspace(0.0, 1.0, grid_size)
    ce = _cond_expectation_grid(p, s_grid)
    assumption1 = bool(np.all(np.diff(ce) >= -1e-7))
    prd_v = bool(np.all(np.diff(c2, axis=1) <= tol))
    prd_s = bool(np.all(np.diff(c1, axis=0) <= tol))
    cond13_vals = xx * c1 + yy * c2 - c
    condition13 = bool(np.all(cond13_vals >= -tol))
    worst = {
        "assumption1": float(np.min(np.diff(ce))) if len(ce) > 1 else 0.0,
        "condition13": float(np.min(cond13_vals)),
    }
    return ValidationReport(assumption1, prd_v, prd_s, condition13, worst)


def sample_signal(p, v, u):
    """Inverse-CDF draw of S given V = v from the uniform variate u.

    Mixtures are sampled by component: u selects the component through the
    stick-breaking partition of [0, 1) by the weights and the remainder is
    rescaled into the component's conditional CDF inversion.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    scalar = v.ndim == 0 and u.ndim == 0
    v, u = np.atleast_1d(*np.broadcast_arrays(v, u))
    cop = p.copula
    cuts = np.concatenate([[0.0], np.cumsum(cop.weights)])
    cuts[-1] = 1.0
    comp = np.clip(np.searchsorted(cuts, u, side="right") - 1,
                   0, len(cop.weights) - 1)
    width = cop.weights[comp]
    resc = np.where(width > 0, (u - cuts[comp]) / np.where(width > 0, width, 1.0),
                    0.5)
    resc = np.clip(resc, 1e-12, 1.0 - 1e-12)
    y = kernels.invert_c1(cop.fams, cop.alphas, cop.weights, comp,
                          p.f1.cdf(v), resc)
    s = np.asarray(p.f2.quantile(y), dtype=float)
    return float(s[0]) if scalar else s


def predictor_from_json(spec):
    """Build a predictor from the documented JSON layout."""
    if not isinstance(spec, dict):
        raise ValueError("predictor spec must be an object")
    unknown = set(spec) - {"copula", "f1", "f2"}
    if unknown:
        raise ValueError(f"unknown predictor keys: {sorted(unknown)}")
    for key in ("copula", "f1", "f2"):
        if key not in spec:
            raise ValueError(f"predictor spec missing '{key}'")
    return Predictor(_copula_from_json(spec["copula"]),
                     _marginal_from_json(spec["f1"]),
                     _marginal_from_json(spec["f2"]))


def _copula_from_json(spec):
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValueError("copula spec must be an object with a 'family'")
    fam = spec["family"]
    allowed = {
        "independence": set(), "comonotonic": set(),
        "amh": {"alpha"}, "fgm": {"alpha"},
        "hallucinatory": {"gamma"},
        "mixture": {"weights", "components"},
    }
    if fam not in allowed:
        raise ValueError(f"unknown copula family '{fam}'")
    unknown = set(spec) - {"family"} - allowed[fam]
    if unknown:
        raise ValueError(f"unknown copula keys: {sorted(unknown)}")
    if fam == "independence":
        return Copula.independence()
    if fam == "comonotonic":
        return Copula.comonotonic()
    if fam == "hallucinatory":
        return Copula.hallucinatory(float(spec.get("gamma", 1.0)))
    if fam in ("amh", "fgm"):
        alpha = float(spec.get("alpha", 0.0))
        ctor = Copula.amh if fam == "amh" else Copula.fgm
        # negative alpha is accepted here (feasible but assumption-violating)
        # so that `prescreen check` can report the violation
        return ctor(alpha, validate=0.0 <= alpha <= 1.0)
    weights = spec.get("weights")
    comps = spec.get("components")
    if not weights or not comps:
        raise ValueError("mixture requires 'weights' and 'components'")
    return Copula.mixture([float(w) for w in weights],
                          [_copula_from_json(c) for c in comps])


def _marginal_from_json(spec):
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValueError("marginal spec must be an object with a 'family'")
    fam = spec["family"]
    if fam == "power":
        unknown = set(spec) - {"family", "c"}
        if unknown:
            raise ValueError(f"unknown marginal keys: {sorted(unknown)}")
        return Marginal.power(float(spec.get("c", 1.0)))
    if fam == "table":
        unknown = set(spec) - {"family", "grid", "cdf"}
        if unknown:
            raise ValueError(f"unknown marginal keys: {sorted(unknown)}")
        return Marginal.from_table(spec["grid"], spec["cdf"])
    raise ValueError(f"unknown marginal family '{fam}'")
