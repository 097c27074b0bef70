"""Scalar quadrature, root finding and monotone tabulation.

Everything downstream (beliefs, equilibria, revenue) reduces to
one-dimensional integrals on [0, 1], so this module concentrates all the
numerical machinery: an adaptive Simpson integrator for scalar callables,
an adaptive Gauss integrator for vectorised integrands, a fixed-order
piecewise Gauss rule used for integrands that are polynomial on each
piece, and a monotone tabulation type.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator


class IntegrationError(RuntimeError):
    """Raised when adaptive refinement hits its depth limit.

    Carries the best available estimate so callers can decide whether the
    partial result is usable.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_depth: int = 40

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_depth < 10:
            raise ValueError("max_depth must be at least 10")


DEFAULT_SPEC = QuadratureSpec()


def integrate(f, a, b, spec=DEFAULT_SPEC):
    """Adaptive composite Simpson rule for a scalar integrand on [a, b].

    Intervals are bisected until the local Simpson error estimate meets
    max(abs_tol, rel_tol * |integral|); exact 0 is returned for a == b.
    """
    if a > b:
        raise ValueError("integrate requires a <= b")
    if a == b:
        return 0.0

    def simpson(lo, flo, mid, fmid, hi, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    if not (np.isfinite(fa) and np.isfinite(fb) and np.isfinite(fm)):
        raise IntegrationError("non-finite integrand value", np.nan)
    whole = simpson(a, fa, m, fm, b, fb)
    tol = max(spec.abs_tol, spec.rel_tol * abs(whole))

    total = 0.0
    stuck = None
    stack = [(a, fa, m, fm, b, fb, whole, 0, tol)]
    while stack:
        lo, flo, mid, fmid, hi, fhi, est, depth, tol_i = stack.pop()
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flm, frm = f(lmid), f(rmid)
        left = simpson(lo, flo, lmid, flm, mid, fmid)
        right = simpson(mid, fmid, rmid, frm, hi, fhi)
        err = (left + right - est) / 15.0
        if abs(err) <= tol_i or (hi - lo) <= 1e-14 * (b - a):
            total += left + right + err
        elif depth >= spec.max_depth:
            total += left + right + err
            stuck = (lo, hi)
        else:
            half = 0.5 * tol_i
            stack.append((lo, flo, lmid, flm, mid, fmid, left, depth + 1,
                          half))
            stack.append((mid, fmid, rmid, frm, hi, fhi, right, depth + 1,
                          half))
    if stuck is not None:
        raise IntegrationError(
            f"no convergence at depth {spec.max_depth} on "
            f"[{stuck[0]:.6g}, {stuck[1]:.6g}]", total)
    return total


def find_root(f, lo, hi, tol=1e-10):
    """Root of a continuous monotone function, bisection with secant steps.

    Requires a sign change on [lo, hi]; stops once |f(x)| <= tol or the
    bracket narrows to tol.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise RootFindingError(
            f"no sign change on [{lo:.6g}, {hi:.6g}] "
            f"(f={flo:.3g}, {fhi:.3g})")
    for _ in range(400):
        # Secant proposal, guarded so the bracket always shrinks.
        denom = fhi - flo
        if denom != 0.0:
            x = hi - fhi * (hi - lo) / denom
        else:
            x = 0.5 * (lo + hi)
        margin = 0.25 * (hi - lo)
        if not (lo + 1e-3 * margin < x < hi - 1e-3 * margin):
            x = 0.5 * (lo + hi)
        fx = f(x)
        if abs(fx) <= tol or (hi - lo) <= tol:
            return x
        if flo * fx <= 0.0:
            hi, fhi = x, fx
        else:
            lo, flo = x, fx
    return 0.5 * (lo + hi)


@lru_cache(maxsize=64)
def gauss_rule(order):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def integrate_batched(f, a, b, spec=DEFAULT_SPEC, breakpoints=()):
    """Adaptive Gauss integration of a scalar integral.

    ``f`` must accept an ndarray of abscissae and return the integrand
    values elementwise; the worklist evaluates all pending intervals in a
    single call per refinement sweep, which keeps the Python overhead off
    the integrand.  ``breakpoints`` force initial subdivision (used to
    isolate kinks at known locations).
    """
    if a == b:
        return 0.0
    edges = [a] + [p for p in sorted(set(breakpoints)) if a < p < b] + [b]
    nodes, weights = gauss_rule(10)

    def est(lo, hi):
        # one Gauss panel per interval, evaluated in bulk by the caller
        return lo, hi

    intervals = np.array([edges[:-1], edges[1:]], dtype=float).T
    total = 0.0

    def panel_values(iv):
        lo = iv[:, 0][:, None]
        hi = iv[:, 1][:, None]
        pts = lo + (hi - lo) * nodes[None, :]
        vals = f(pts.ravel()).reshape(pts.shape)
        return (hi - lo)[:, 0] * (vals * weights[None, :]).sum(axis=1)

    coarse = panel_values(intervals)
    work = [(intervals[i, 0], intervals[i, 1], coarse[i], 0)
            for i in range(len(intervals))]
    while work:
        lows = np.array([w[0] for w in work])
        highs = np.array([w[1] for w in work])
        mids = 0.5 * (lows + highs)
        halves = np.concatenate(
            [np.stack([lows, mids], axis=1), np.stack([mids, highs], axis=1)])
        vals = panel_values(halves)
        nxt = []
        k = len(work)
        for i, (lo, hi, old, depth) in enumerate(work):
            refined = vals[i] + vals[i + k]
            err = abs(refined - old)
            tol = max(spec.abs_tol, spec.rel_tol * abs(refined)) * \
                max((hi - lo) / (b - a), 1e-3)
            if err <= tol:
                total += refined
            elif depth >= spec.max_depth:
                raise IntegrationError(
                    f"no convergence at depth {spec.max_depth} on "
                    f"[{lo:.6g}, {hi:.6g}]", total + refined)
            else:
                nxt.append((lo, mids[i], vals[i], depth + 1))
                nxt.append((mids[i], hi, vals[i + k], depth + 1))
        work = nxt
    return total


def piecewise_gl_matrix(fmat, edges, spec=DEFAULT_SPEC, order=10,
                        max_doublings=8):
    """Batch of integrals with per-row piecewise-smooth integrands.

    ``edges`` has shape (P, K+1) with non-decreasing rows spanning the
    integration range of each of the P integrals; ``fmat(U)`` evaluates the
    P integrands at the matrix of abscissae ``U`` (shape (P, T), row p
    holding the nodes for integral p).  Each piece is mapped affinely to a
    shared panelisation so that the whole batch is refined together;
    panels are doubled until the batch converges in max-norm.
    """
    edges = np.asarray(edges, dtype=float)
    P, Kp1 = edges.shape
    widths = edges[:, 1:] - edges[:, :-1]          # (P, K)
    nodes, weights = gauss_rule(order)

    def evaluate(panels):
        t0 = (np.arange(panels) / panels)[:, None]
        tn = t0 + nodes[None, :] / panels          # (panels, order)
        tn = tn.ravel()                            # shared t abscissae
        # u[p, k, j] = edges[p, k] + widths[p, k] * tn[j]
        U = edges[:, :-1, None] + widths[:, :, None] * tn[None, None, :]
        vals = fmat(U.reshape(P, -1)).reshape(U.shape)
        wts = np.tile(weights / panels, panels)
        return np.einsum("pkj,j,pk->p", vals, wts, widths)

    panels = 1
    prev = evaluate(panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = evaluate(panels)
        err = np.abs(cur - prev)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(cur))
        if np.all(err <= tol):
            return cur
        prev = cur
    bad = int(np.argmax(err - tol))
    raise IntegrationError(
        f"batch quadrature did not converge (worst row {bad}, "
        f"err={err[bad]:.3g})", prev)


def fixed_gl_pieces(fmat, edges, order):
    """Non-adaptive piecewise Gauss rule; exact when each piece of the
    integrand is a polynomial of degree <= 2*order - 1."""
    edges = np.asarray(edges, dtype=float)
    P = edges.shape[0]
    widths = edges[:, 1:] - edges[:, :-1]
    nodes, weights = gauss_rule(order)
    U = edges[:, :-1, None] + widths[:, :, None] * nodes[None, None, :]
    vals = fmat(U.reshape(P, -1)).reshape(U.shape)
    return np.einsum("pkj,j,pk->p", vals, weights, widths)


class TabulatedFunction:
    """Grid-sampled real function on [0, 1] with piecewise-cubic evaluation.

    With ``monotone=True`` a Fritsch-Carlson (PCHIP) interpolant is used,
    which reproduces grid values exactly and never overshoots them; the
    non-monotone variant is a natural cubic spline.
    """

    def __init__(self, grid, values, monotone=False):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid/values must be matching 1-d arrays")
        if not (grid[0] == 0.0 and grid[-1] == 1.0):
            raise ValueError("grid must span [0, 1]")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ValueError(
                f"non-finite value at abscissa {grid[bad[0]]!r}")
        if monotone and np.any(np.diff(values) < -1e-12):
            raise ValueError("values not non-decreasing but monotone flag set")
        self.grid = grid
        self.values = values
        self.monotone = monotone
        if monotone:
            self._interp = PchipInterpolator(grid, values, extrapolate=False)
        else:
            self._interp = CubicSpline(grid, values)

    def __call__(self, x):
        scalar = np.ndim(x) == 0
        x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), 0.0, 1.0)
        out = np.asarray(self._interp(x), dtype=float)
        # exact grid hits reproduce stored values bit-for-bit
        idx = np.searchsorted(self.grid, x)
        idx = np.minimum(idx, len(self.grid) - 1)
        hit = self.grid[idx] == x
        out[hit] = self.values[idx[hit]]
        return float(out[0]) if scalar else out

    def derivative(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self._interp.derivative()(x)

    def antiderivative(self):
        return self._interp.antiderivative()

    def inverse(self, y):
        """Inverse of a non-decreasing tabulation by per-query root finding."""
        if not self.monotone:
            raise ValueError("inverse requires the monotone flag")
        y = np.asarray(y, dtype=float)
        lo, hi = self.values[0], self.values[-1]
        yc = np.clip(y, lo, hi)
        out = np.empty_like(yc, dtype=float)
        flat = yc.ravel()
        res = out.ravel()
        for i, yi in enumerate(flat):
            res[i] = find_root(lambda t, yi=yi: self(t) - yi, 0.0, 1.0, 1e-12)
        return out if y.ndim else float(res[0])


def tabulate(f, npoints=1025, monotone=False):
    """Sample ``f`` on a uniform grid over [0, 1]."""
    if npoints < 33:
        raise ValueError("npoints must be at least 33")
    grid = np.linspace(0.0, 1.0, npoints)
    values = np.asarray(f(grid), dtype=float)
    if values.shape != grid.shape:
        values = np.array([float(f(x)) for x in grid])
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"non-finite sample at abscissa {grid[bad[0]]!r}")
    return TabulatedFunction(grid, values, monotone=monotone)
