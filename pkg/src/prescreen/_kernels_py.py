"""Pure-numpy implementations of the hot kernels.

A compiled Cython twin (``prescreen._kernels``) provides the same four
entry points; ``prescreen._backend`` picks whichever is available.  Keep
the two in lockstep -- ``tests/test_kernels.py`` checks them against each
other on random batches.

A copula (possibly a mixture) is passed flattened as three parallel
arrays: integer family codes, per-component parameters and mixture
weights.  Family codes: 0 independence, 1 comonotonic, 2 AMH, 3 FGM.
The comonotonic partials use the kink convention C1 = 1{x <= y},
C2 = 1{y < x}.
"""

import numpy as np

FAM_INDEPENDENCE = 0
FAM_COMONOTONIC = 1
FAM_AMH = 2
FAM_FGM = 3

# integrand codes for integrand_matrix
KIND_KAPPA = 0
KIND_GMAR = 1
KIND_H = 2
KIND_SMALLH = 3
KIND_GK = 4

IMPLEMENTATION = "python"


def _component_cab(fam, alpha, x, y):
    if fam == FAM_INDEPENDENCE:
        return x * y, y, x
    if fam == FAM_COMONOTONIC:
        c = np.minimum(x, y)
        return c, (x <= y).astype(float), (y < x).astype(float)
    if fam == FAM_AMH:
        d = 1.0 - alpha * (1.0 - x) * (1.0 - y)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(d > 0.0, x * y / d, 0.0)
            c1 = np.where(d > 0.0, y * (1.0 - alpha * (1.0 - y)) / (d * d), 0.0)
            c2 = np.where(d > 0.0, x * (1.0 - alpha * (1.0 - x)) / (d * d), 0.0)
        return c, c1, c2
    if fam == FAM_FGM:
        c = x * y * (1.0 + alpha * (1.0 - x) * (1.0 - y))
        c1 = y * (1.0 + alpha * (1.0 - 2.0 * x) * (1.0 - y))
        c2 = x * (1.0 + alpha * (1.0 - x) * (1.0 - 2.0 * y))
        return c, c1, c2
    raise ValueError(f"unknown copula family code {fam}")


def copula_cab(fams, alphas, weights, x, y):
    """C(x, y) and both partials for a flattened mixture, elementwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    c = np.zeros(x.shape)
    c1 = np.zeros(x.shape)
    c2 = np.zeros(x.shape)
    for fam, alpha, w in zip(fams, alphas, weights):
        ci, c1i, c2i = _component_cab(int(fam), float(alpha), x, y)
        c += w * ci
        c1 += w * c1i
        c2 += w * c2i
    return c, c1, c2


def _mix_c(fams, alphas, weights, x, u):
    c = np.zeros(np.broadcast(x, u).shape)
    for fam, alpha, w in zip(fams, alphas, weights):
        c += w * _component_cab(int(fam), float(alpha), x, u)[0]
    return c


def _mix_c1(fams, alphas, weights, x, u):
    c1 = np.zeros(np.broadcast(x, u).shape)
    for fam, alpha, w in zip(fams, alphas, weights):
        c1 += w * _component_cab(int(fam), float(alpha), x, u)[1]
    return c1


def integrand_matrix(kind, fams, alphas, weights, n, m, ipow, fx, fv, u):
    """Reduced quantile-scale integrands for the belief layer.

    ``u`` has shape (P, T); ``fx`` and ``fv`` are per-row parameters (the
    prior CDF values of the evaluation point and of the conditioning
    valuation).  The (m - n) dF2^(m-n) measure weight is included.  Never
    called with n == m (the callers short-circuit to i.i.d. forms).
    """
    u = np.asarray(u, dtype=float)
    fx = np.asarray(fx, dtype=float)[:, None]
    fv = np.asarray(fv, dtype=float)[:, None]
    w = (m - n) * np.power(u, m - n - 1)
    if kind == KIND_KAPPA:
        b = 1.0 - _mix_c1(fams, alphas, weights, fv, u)
        return np.maximum(b, 0.0) * np.power(1.0 - u, n - 1) * w
    if kind == KIND_GMAR:
        a = np.maximum(fx - _mix_c(fams, alphas, weights, fx, u), 0.0)
        return a * np.power(1.0 - u, n - 1) * w
    if kind == KIND_H:
        a = np.maximum(fx - _mix_c(fams, alphas, weights, fx, u), 0.0)
        b = np.maximum(1.0 - _mix_c1(fams, alphas, weights, fv, u), 0.0)
        return np.power(a, n - 1) * b * w
    if kind == KIND_SMALLH:
        a = np.maximum(fx - _mix_c(fams, alphas, weights, fx, u), 0.0)
        bx = np.maximum(1.0 - _mix_c1(fams, alphas, weights, fx, u), 0.0)
        bv = np.maximum(1.0 - _mix_c1(fams, alphas, weights, fv, u), 0.0)
        return np.power(a, n - 2) * bx * bv * w
    if kind == KIND_GK:
        a = np.maximum(fx - _mix_c(fams, alphas, weights, fx, u), 0.0)
        rest = np.maximum(1.0 - u - a, 0.0)
        return np.power(a, n - ipow) * np.power(rest, ipow) * w
    raise ValueError(f"unknown integrand kind {kind}")


def psi_matrix(fams, alphas, weights, n, m, fvmat, u):
    """prod_k [1 - C1(fv_k, u)] times the measure weight; fvmat is (P, n)."""
    u = np.asarray(u, dtype=float)
    out = (m - n) * np.power(u, m - n - 1)
    for k in range(n):
        b = 1.0 - _mix_c1(fams, alphas, weights, fvmat[:, k][:, None], u)
        out = out * np.maximum(b, 0.0)
    return out


def invert_c1(fams, alphas, weights, comp, x, u):
    """Solve C1_comp(x, y) = u for y, per element.

    ``comp`` selects the mixture component to invert (component sampling;
    the caller draws it from the mixture weights).  All built-in families
    invert in closed form.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    comp = np.asarray(comp)
    y = np.empty_like(u)
    for idx in range(len(fams)):
        sel = comp == idx
        if not np.any(sel):
            continue
        fam, alpha = int(fams[idx]), float(alphas[idx])
        xs, us = x[sel], u[sel]
        if fam == FAM_INDEPENDENCE:
            y[sel] = us
        elif fam == FAM_COMONOTONIC:
            y[sel] = xs
        elif fam == FAM_FGM:
            a = alpha * (1.0 - 2.0 * xs)
            disc = np.sqrt(np.maximum((1.0 + a) ** 2 - 4.0 * a * us, 0.0))
            y[sel] = np.clip(2.0 * us / (1.0 + a + disc), 0.0, 1.0)
        elif fam == FAM_AMH:
            b = alpha * (1.0 - xs)
            qa = alpha - us * b * b
            qb = 1.0 - alpha - 2.0 * us * b * (1.0 - b)
            qq = us * (1.0 - b) ** 2
            disc = np.sqrt(np.maximum(qb * qb + 4.0 * qa * qq, 0.0))
            denom = qb + disc
            with np.errstate(divide="ignore", invalid="ignore"):
                ys = np.where(denom > 1e-300, 2.0 * qq / denom, 0.0)
            y[sel] = np.clip(ys, 0.0, 1.0)
        else:
            raise ValueError(f"unknown copula family code {fam}")
    return y
