"""Posterior beliefs and the equivalent correlated-valuation game.

Admitting the top n of m bidders by signal turns the i.i.d. prior into a
correlated joint law for the admitted valuations.  Every quantity needed
downstream -- the admission probability, its normalising term kappa, the
marginal and order-statistic CDFs, and the win-probability kernel H/h --
reduces to a one-dimensional integral over the signal quantile u with
measure (m-n) u^(m-n-1) du.  Two interchangeable backends evaluate those
reductions:

* ``generic``: adaptive quadrature against the copula partials, valid for
  any built-in copula mixture.  Comonotonic mixture atoms put kinks and
  jumps at known quantiles, so each integral is split there and each piece
  is integrated on its own affine parameterisation.
* ``closed-form``: for mixtures of the comonotonic and independence
  copulas only (the hallucinatory family, including the null and perfect
  predictors).  The integrands are then piecewise polynomials of degree
  < m, integrated exactly by a fixed Gauss rule, with the normalising
  term and marginal CDF expressed through regularised incomplete beta
  functions.

When n = m the admission measure is degenerate and every formula
short-circuits to its i.i.d. form.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import betainc

from ._backend import kernels
from ._kernels_py import (KIND_GK, KIND_GMAR, KIND_H, KIND_KAPPA,
                          KIND_SMALLH)
from .numerics import (DEFAULT_SPEC, TabulatedFunction, fixed_gl_pieces,
                       piecewise_gl_matrix)

DEFAULT_GRID = 1025


def _edges(breaks):
    """Per-row piece edges on [0, 1] from a (P, B) array of breakpoints.

    Rows are sorted; coincident or boundary breakpoints produce zero-width
    pieces, which integrate to zero and are harmless.
    """
    breaks = np.clip(np.sort(np.atleast_2d(breaks), axis=1), 0.0, 1.0)
    P = breaks.shape[0]
    return np.concatenate(
        [np.zeros((P, 1)), breaks, np.ones((P, 1))], axis=1)


class _GenericBackend:
    """Adaptive quadrature against the copula partials."""

    name = "generic"
    _CHUNK = 2048   # caps the transient node matrix if refinement escalates

    def __init__(self, copula, n, m, spec=DEFAULT_SPEC):
        self.cop = copula
        self.n = n
        self.m = m
        self.spec = spec
        self._has_atom = copula.comonotonic_weight > 0.0

    def _quad(self, kind, fx, fv, ipow=0):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        fv = np.atleast_1d(np.asarray(fv, dtype=float))
        fx, fv = np.broadcast_arrays(fx, fv)
        if len(fx) > self._CHUNK:
            return np.concatenate([
                self._quad(kind, fx[i:i + self._CHUNK],
                           fv[i:i + self._CHUNK], ipow)
                for i in range(0, len(fx), self._CHUNK)])
        cop = self.cop

        def fmat(u):
            return kernels.integrand_matrix(
                kind, cop.fams, cop.alphas, cop.weights,
                self.n, self.m, ipow, fx, fv, u)

        if self._has_atom:
            edges = _edges(np.stack([fx, fv], axis=1))
        else:
            edges = _edges(np.empty((len(fx), 0)))
        return piecewise_gl_matrix(fmat, edges, self.spec)

    def kappa_inv(self, fv):
        if self.n == self.m:
            return np.ones_like(np.atleast_1d(np.asarray(fv, dtype=float)))
        return self._quad(KIND_KAPPA, fv, fv)

    def gmar(self, fx):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        if self.n == self.m:
            return fx.copy()
        return math.comb(self.m, self.n) * self._quad(KIND_GMAR, fx, fx)

    def gk_term(self, fx, i):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        if self.n == self.m:
            return fx ** (self.n - i) * (1.0 - fx) ** i
        return self._quad(KIND_GK, fx, fx, ipow=i)

    def h_reduced(self, fx, fv):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        if self.n == self.m:
            return fx ** (self.n - 2)
        return self._quad(KIND_SMALLH, fx, fv)

    def H_reduced(self, fx, fv):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        if self.n == self.m:
            return fx ** (self.n - 1)
        return self._quad(KIND_H, fx, fv)

    def psi_reduced(self, fvmat):
        fvmat = np.atleast_2d(np.asarray(fvmat, dtype=float))
        if self.n == self.m:
            return np.ones(fvmat.shape[0])
        if fvmat.shape[0] > self._CHUNK:
            return np.concatenate([
                self.psi_reduced(fvmat[i:i + self._CHUNK])
                for i in range(0, fvmat.shape[0], self._CHUNK)])
        cop = self.cop

        def fmat(u):
            return kernels.psi_matrix(cop.fams, cop.alphas, cop.weights,
                                      self.n, self.m, fvmat, u)

        if self._has_atom:
            edges = _edges(fvmat)
        else:
            edges = _edges(np.empty((fvmat.shape[0], 0)))
        return piecewise_gl_matrix(fmat, edges, self.spec)


class _ClosedFormBackend:
    """Exact evaluation for comonotonic/independence mixtures.

    With mixing weight gamma on the comonotonic part, on the quantile
    scale A(X, u) = X - gamma min(X, u) - (1 - gamma) X u and
    1 - C1(V, u) = gamma 1{u < V} + (1 - gamma)(1 - u); all reduced
    integrands are piecewise polynomial, so a fixed Gauss rule of order
    ceil((m+1)/2) integrates them exactly.
    """

    name = "closed-form"

    def __init__(self, copula, n, m, spec=DEFAULT_SPEC):
        if not copula.is_hallucinatory:
            raise ValueError(
                "closed-form backend requires a comonotonic/independence "
                "mixture (hallucinatory family)")
        self.cop = copula
        self.gamma = copula.comonotonic_weight
        self.n = n
        self.m = m
        self._order = m // 2 + 2

    def _a(self, X, u):
        g = self.gamma
        return X - g * np.minimum(X, u) - (1.0 - g) * X * u

    def _b(self, V, u):
        g = self.gamma
        return g * (u < V) + (1.0 - g) * (1.0 - u)

    def _w(self, u):
        return (self.m - self.n) * np.power(u, self.m - self.n - 1)

    def kappa_inv(self, fv):
        fv = np.atleast_1d(np.asarray(fv, dtype=float))
        n, m, g = self.n, self.m, self.gamma
        if n == m:
            return np.ones_like(fv)
        ibeta = betainc(m - n, n, fv)
        return (1.0 - g) / math.comb(m, n) + \
            g * ibeta / math.comb(m - 1, n - 1)

    def gmar(self, fx):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        n, m, g = self.n, self.m, self.gamma
        if n == m:
            return fx.copy()
        perfect = (m / n) * (fx * betainc(m - n, n, fx)
                             - (m - n) / m * betainc(m - n + 1, n, fx))
        return (1.0 - g) * fx + g * perfect

    def gk_term(self, fx, i):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        n, m = self.n, self.m
        if n == m:
            return fx ** (n - i) * (1.0 - fx) ** i
        X = fx[:, None]

        def fmat(u):
            a = self._a(X, u)
            return a ** (n - i) * np.maximum(1.0 - u - a, 0.0) ** i \
                * self._w(u)

        return fixed_gl_pieces(fmat, _edges(fx[:, None]), self._order)

    def H_reduced(self, fx, fv):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        fv = np.atleast_1d(np.asarray(fv, dtype=float))
        fx, fv = np.broadcast_arrays(fx, fv)
        n, m = self.n, self.m
        if n == m:
            return fx ** (n - 1)
        X, V = fx[:, None], fv[:, None]

        def fmat(u):
            return self._a(X, u) ** (n - 1) * self._b(V, u) * self._w(u)

        return fixed_gl_pieces(fmat, _edges(np.stack([fx, fv], axis=1)),
                               self._order)

    def h_reduced(self, fx, fv):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        fv = np.atleast_1d(np.asarray(fv, dtype=float))
        fx, fv = np.broadcast_arrays(fx, fv)
        n, m = self.n, self.m
        if n == m:
            return fx ** (n - 2)
        X, V = fx[:, None], fv[:, None]

        def fmat(u):
            return self._a(X, u) ** (n - 2) * self._b(X, u) * self._b(V, u) \
                * self._w(u)

        return fixed_gl_pieces(fmat, _edges(np.stack([fx, fv], axis=1)),
                               self._order)

    def psi_reduced(self, fvmat):
        fvmat = np.atleast_2d(np.asarray(fvmat, dtype=float))
        n, m = self.n, self.m
        if n == m:
            return np.ones(fvmat.shape[0])
        V = fvmat[:, :, None]

        def fmat(u):
            return np.prod(self._b(V, u[:, None, :]), axis=1) * self._w(u)

        return fixed_gl_pieces(fmat, _edges(fvmat), self._order)

    # printed series forms, kept as cross-checks of the exact evaluators
    def kappa_inv_series(self, fv):
        fv = np.atleast_1d(np.asarray(fv, dtype=float))
        n, m, g = self.n, self.m, self.gamma
        if n == m:
            return np.ones_like(fv)
        acc = np.zeros_like(fv)
        for j in range(n):
            acc += (-1.0) ** j * math.comb(n - 1, j) / (m - n + j) \
                * fv ** (m - n + j)
        return (1.0 - g) / math.comb(m, n) + (m - n) * g * acc

    def gmar_series(self, fx):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        n, m, g = self.n, self.m, self.gamma
        if n == m:
            return fx.copy()
        acc = np.zeros_like(fx)
        for i in range(n):
            acc += (-1.0) ** i * math.comb(n - 1, i) \
                / ((m - n + i) * (m - n + i + 1)) * fx ** (m - n + i + 1)
        return (1.0 - g) * fx + (m - n) * math.comb(m, n) * g * acc

    def glar_series(self, fx):
        fx = np.atleast_1d(np.asarray(fx, dtype=float))
        n, m, g = self.n, self.m, self.gamma
        if n == m:
            return fx ** n
        acc = np.zeros_like(fx)
        for i in range(n + 1):
            acc += math.comb(n, i) * (-1.0) ** i / (m - n + i) * (
                (g + (1.0 - g) * fx) ** i - (1.0 - g) ** n * fx ** i)
        return (1.0 - g) ** n * fx ** n \
            + (m - n) * math.comb(m, n) * fx ** m * acc


@dataclass
class OrderStatCdf:
    k: int
    cdf: TabulatedFunction


class GameSetup:
    """One prescreened-auction instance: (m, n, predictor).

    Immutable after construction; belief queries are pure.  kappa, the
    marginal CDF and the diagonal win kernel are tabulated on a uniform
    grid at construction, order-statistic CDFs on first request; direct
    (non-interpolated) evaluation methods back everything where accuracy
    matters.
    """

    def __init__(self, m, n, predictor, backend="auto",
                 grid_size=DEFAULT_GRID, spec=DEFAULT_SPEC):
        if not (isinstance(m, int) and isinstance(n, int)):
            raise TypeError("m and n must be integers")
        if not 2 <= n <= m:
            raise ValueError("need 2 <= n <= m")
        self.m = m
        self.n = n
        self.predictor = predictor
        self.spec = spec
        if backend == "auto":
            backend = ("closed-form" if predictor.copula.is_hallucinatory
                       else "generic")
        if backend == "closed-form":
            self._b = _ClosedFormBackend(predictor.copula, n, m, spec)
        elif backend == "generic":
            self._b = _GenericBackend(predictor.copula, n, m, spec)
        else:
            raise ValueError(f"unknown backend '{backend}'")
        self.backend = self._b.name
        self.grid = np.linspace(0.0, 1.0, grid_size)
        self._order_cdfs = {}

    # -- cached tabulations -------------------------------------------------
    @cached_property
    def _fgrid(self):
        return np.asarray(self.predictor.f1.cdf(self.grid), dtype=float)

    @cached_property
    def kappa_grid(self):
        with np.errstate(divide="ignore"):
            return 1.0 / self._b.kappa_inv(self._fgrid)

    @cached_property
    def gmar_tab(self):
        vals = np.clip(self._b.gmar(self._fgrid), 0.0, 1.0)
        return TabulatedFunction(self.grid, vals, monotone=True)

    @cached_property
    def _diag_reduced(self):
        """(H/kappa, h-integral) on the grid diagonal, kappa-free."""
        H = self._b.H_reduced(self._fgrid, self._fgrid)
        h = self._b.h_reduced(self._fgrid, self._fgrid)
        return H, h

    @cached_property
    def rhr_grid(self):
        """RHR(x) = h(x|x)/H(x|x) on grid[1:]; kappa cancels in the ratio."""
        Hr, hr = self._diag_reduced
        f1 = np.asarray(self.predictor.f1.pdf(self.grid[1:]), dtype=float)
        return (self.n - 1) * f1 * hr[1:] / Hr[1:]

    # -- operations -----------------------------------------------------------
    def a_kernel(self, x, u):
        """F1(x) - C(F1(x), u) for a signal quantile u."""
        fx = np.asarray(self.predictor.f1.cdf(x), dtype=float)
        c = self.predictor.copula.cdf(fx, np.asarray(u, dtype=float))
        return np.maximum(fx - c, 0.0)

    def admission_probability(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of {self.n} valuations")
        fv = np.asarray(self.predictor.f1.cdf(v), dtype=float)
        return float(self._b.psi_reduced(fv[None, :])[0])

    def kappa(self, v):
        v = np.asarray(v, dtype=float)
        scalar = v.ndim == 0
        inv = self._b.kappa_inv(
            np.atleast_1d(np.asarray(self.predictor.f1.cdf(v), dtype=float)))
        with np.errstate(divide="ignore"):
            out = 1.0 / inv
        return float(out[0]) if scalar else out

    def joint_density(self, v):
        psi = self.admission_probability(v)
        f1 = np.asarray(self.predictor.f1.pdf(np.asarray(v, dtype=float)))
        return math.comb(self.m, self.n) * psi * float(np.prod(f1))

    def posterior_density(self, v_i, v_rest):
        v_rest = np.asarray(v_rest, dtype=float)
        if v_rest.shape != (self.n - 1,):
            raise ValueError(f"expected {self.n - 1} opponent valuations")
        v = np.concatenate([[float(v_i)], v_rest])
        psi = self.admission_probability(v)
        f1 = np.asarray(self.predictor.f1.pdf(v_rest))
        return self.kappa(float(v_i)) * psi * float(np.prod(f1))

    def marginal_cdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        fx = np.atleast_1d(np.asarray(self.predictor.f1.cdf(x), dtype=float))
        out = np.clip(self._b.gmar(fx), 0.0, 1.0)
        return float(out[0]) if scalar else out

    def kth_order_cdf_at(self, x, k):
        """Direct (quadrature) evaluation of the k-th largest order CDF."""
        if not 1 <= k <= self.n:
            raise ValueError(f"order-statistic rank must lie in [1, {self.n}]")
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        fx = np.atleast_1d(np.asarray(self.predictor.f1.cdf(x), dtype=float))
        total = np.zeros_like(fx)
        for i in range(k):
            total += math.comb(self.n, i) * self._b.gk_term(fx, i)
        if self.n < self.m:
            total *= math.comb(self.m, self.n)
        out = np.clip(total, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def kth_order_cdf(self, k):
        if not 1 <= k <= self.n:
            raise ValueError(f"order-statistic rank must lie in [1, {self.n}]")
        if k not in self._order_cdfs:
            vals = self.kth_order_cdf_at(self.grid, k)
            vals[0], vals[-1] = 0.0, 1.0
            self._order_cdfs[k] = OrderStatCdf(
                k, TabulatedFunction(self.grid, vals, monotone=True))
        return self._order_cdfs[k]

    def win_cdf_H(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        scalar = x.ndim == 0 and v.ndim == 0
        fx = np.atleast_1d(np.asarray(self.predictor.f1.cdf(x), dtype=float))
        fv = np.atleast_1d(np.asarray(self.predictor.f1.cdf(v), dtype=float))
        fx, fv = np.broadcast_arrays(fx, fv)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._b.H_reduced(fx, fv) / self._b.kappa_inv(fv)
        out = np.clip(np.nan_to_num(out, nan=0.0), 0.0, 1.0)
        return float(out[0]) if scalar else out

    def win_pdf_h(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        scalar = x.ndim == 0 and v.ndim == 0
        f1 = np.atleast_1d(np.asarray(self.predictor.f1.pdf(x), dtype=float))
        out = (self.n - 1) * f1 * self._h_shape(x, v)
        return float(out[0]) if scalar else out

    def win_pdf_h_xweighted(self, x, v):
        """x * h(x | v); uses x*f1(x) directly so density poles at 0 cancel."""
        x = np.asarray(x, dtype=float)
        xf = np.atleast_1d(np.asarray(self.predictor.f1.xpdf(x), dtype=float))
        return (self.n - 1) * xf * self._h_shape(x, v)

    def _h_shape(self, x, v):
        fx = np.atleast_1d(np.asarray(self.predictor.f1.cdf(x), dtype=float))
        fv = np.atleast_1d(np.asarray(self.predictor.f1.cdf(v), dtype=float))
        fx, fv = np.broadcast_arrays(fx, fv)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._b.h_reduced(fx, fv) / self._b.kappa_inv(fv)
        return np.nan_to_num(out, nan=0.0, posinf=np.inf)

    def win_cdf_dv_H2(self, x, v, step=1e-4):
        """dH/dv by central differences, clamped to [0, 1]."""
        if self.n == self.m:
            x = np.asarray(x, dtype=float)
            return np.zeros(np.broadcast(x, np.asarray(v)).shape) \
                if x.ndim else 0.0
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        scalar = x.ndim == 0 and v.ndim == 0
        vp = np.minimum(np.atleast_1d(v) + step, 1.0)
        vm = np.maximum(np.atleast_1d(v) - step, 0.0)
        out = (self.win_cdf_H(x, vp) - self.win_cdf_H(x, vm)) / (vp - vm)
        return float(np.atleast_1d(out)[0]) if scalar else out

    def reverse_hazard_rate(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        xa = np.atleast_1d(x)
        if np.any(xa <= 0.0):
            raise ValueError("reverse hazard rate has a pole at x = 0")
        fx = np.asarray(self.predictor.f1.cdf(xa), dtype=float)
        Hr = self._b.H_reduced(fx, fx)
        hr = self._b.h_reduced(fx, fx)
        f1 = np.asarray(self.predictor.f1.pdf(xa), dtype=float)
        out = (self.n - 1) * f1 * hr / Hr
        return float(out[0]) if scalar else out

    def win_cdf_H_diag_times_x(self, x):
        """x * H(x | x), the all-pay participation value; increasing in x."""
        x = np.asarray(x, dtype=float)
        return np.atleast_1d(x) * self.win_cdf_H(x, x)

    def __repr__(self):
        return (f"GameSetup(m={self.m}, n={self.n}, "
                f"backend={self.backend!r})")
