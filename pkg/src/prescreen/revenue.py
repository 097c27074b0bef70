"""Expected revenue, optimal prescreening sweeps and format comparisons.

Revenues integrate the equilibrium strategies against the order-statistic
laws of the equivalent game.  Expectations are evaluated by adaptive
quadrature against direct (non-interpolated) belief queries; the
strategies enter through closed identities (sigma' = (v - sigma) RHR for
first price, sigma' = x h(x|x) for all pay) so no tabulated derivative is
ever differenced.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import equilibria as eq
from .beliefs import GameSetup
from .numerics import QuadratureSpec, find_root, integrate_batched

_REV_SPEC = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-10, max_depth=40)


class ExistenceFailure(RuntimeError):
    """Raised when a revenue is requested for a format whose symmetric
    equilibrium failed its existence check; carries the witness point."""

    def __init__(self, fmt, verdict):
        self.format = fmt
        self.verdict = verdict
        super().__init__(
            f"no verified symmetric equilibrium for {fmt}: "
            f"witness={verdict.witness}")


def _require_verified(profile):
    if not profile.existence.verified:
        raise ExistenceFailure(profile.format, profile.existence)


def expected_kth_value(gs, k):
    """E of the k-th largest admitted valuation, via int (1 - CDF)."""
    return integrate_batched(lambda x: 1.0 - gs.kth_order_cdf_at(x, k),
                             0.0, 1.0, _REV_SPEC)


def revenue_sp(gs, reserve=0.0):
    """Second-price revenue; with a reserve the winner pays
    max(reserve, second-highest bid) whenever the top bid clears it."""
    if not 0.0 <= reserve < 1.0:
        raise ValueError("reserve must lie in [0, 1)")
    if reserve == 0.0:
        return expected_kth_value(gs, 2)
    g1 = float(gs.kth_order_cdf_at(np.array([reserve]), 1)[0])
    g2 = float(gs.kth_order_cdf_at(np.array([reserve]), 2)[0])
    tail = integrate_batched(lambda x: 1.0 - gs.kth_order_cdf_at(x, 2),
                             reserve, 1.0, _REV_SPEC)
    return float(reserve * (g2 - g1) + reserve * (1.0 - g2) + tail)


def revenue_fp(gs, reserve=0.0, profile=None):
    """First-price revenue E[sigma(V_(1))] restricted to the sale region."""
    if profile is None:
        profile = eq.fp_strategy(gs, reserve)
    _require_verified(profile)
    solver = profile.solver
    r = profile.reserve

    def integrand(v):
        return solver.sigma_prime(v) * (1.0 - gs.kth_order_cdf_at(v, 1))

    tail = integrate_batched(integrand, r, 1.0, _REV_SPEC)
    head = 0.0
    if r > 0.0:
        head = r * (1.0 - float(gs.kth_order_cdf_at(np.array([r]), 1)[0]))
    return float(head + tail)


def revenue_ap(gs, reserve=0.0, profile=None):
    """All-pay revenue n E[sigma(V)] under the admitted-bidder marginal."""
    if profile is None:
        profile = eq.ap_strategy(gs, reserve)
    _require_verified(profile)
    tau = profile.cutoff

    def integrand(x):
        return gs.win_pdf_h_xweighted(x, x) * (1.0 - gs.marginal_cdf(x))

    tail = integrate_batched(integrand, tau, 1.0, _REV_SPEC)
    head = 0.0
    if profile.reserve > 0.0:
        head = profile.reserve * (1.0 - gs.marginal_cdf(tau))
    return float(gs.n * (head + tail))


def highest_bid_ap(gs, reserve=0.0, profile=None):
    """Expected winning bid E[sigma(V_(1))] in the all-pay auction."""
    if profile is None:
        profile = eq.ap_strategy(gs, reserve)
    _require_verified(profile)
    tau = profile.cutoff

    def integrand(x):
        return gs.win_pdf_h_xweighted(x, x) \
            * (1.0 - gs.kth_order_cdf_at(x, 1))

    tail = integrate_batched(integrand, tau, 1.0, _REV_SPEC)
    head = 0.0
    if profile.reserve > 0.0:
        head = profile.reserve * (1.0 - float(gs.kth_order_cdf_at(
            np.array([tau]), 1)[0]))
    return float(head + tail)


def uniform_auction_revenue(gs, K):
    """K homogeneous items at the uniform (K+1)-st price."""
    if not 1 <= K <= gs.n - 1:
        raise ValueError(f"item count must lie in [1, {gs.n - 1}]")
    return K * expected_kth_value(gs, K + 1)


REVENUE = "revenue"
HIGHEST_BID = "highest-bid"

_OBJECTIVES = {
    (eq.SECOND_PRICE, REVENUE): lambda gs, r: revenue_sp(gs, r),
    (eq.FIRST_PRICE, REVENUE): lambda gs, r: revenue_fp(gs, r),
    (eq.ALL_PAY, REVENUE): lambda gs, r: revenue_ap(gs, r),
    (eq.ALL_PAY, HIGHEST_BID): lambda gs, r: highest_bid_ap(gs, r),
}


@dataclass
class CurvePoint:
    n: int
    value: Optional[float]
    existence: str
    error: str = ""


@dataclass
class RevenueCurve:
    format: str
    objective: str
    reserve: float
    points: list
    argmax_n: Optional[int] = None

    def value_at(self, n):
        for p in self.points:
            if p.n == n:
                return p.value
        raise KeyError(n)


def _threads():
    raw = os.environ.get("PRESCREEN_THREADS", "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _curve_point(predictor, m, n, fmt, objective, reserve, backend,
                 setup_kwargs):
    gs = GameSetup(m, n, predictor, backend=backend, **setup_kwargs)
    try:
        value = _OBJECTIVES[(fmt, objective)](gs, reserve)
        return CurvePoint(n, value, "verified")
    except ExistenceFailure as exc:
        return CurvePoint(n, None, "condition-failed", str(exc))


def sweep_optimal_n(predictor, m, fmt, objective=REVENUE, reserve=0.0,
                    backend="auto", tie_tol=1e-9, **setup_kwargs):
    """Evaluate every admitted number n in [2, m]; argmax prefers the
    smallest n among values tied within tie_tol.  Extra keyword arguments
    (grid_size, spec) are forwarded to each GameSetup."""
    if (fmt, objective) not in _OBJECTIVES:
        raise ValueError(f"unsupported format/objective ({fmt}, {objective})")
    ns = list(range(2, m + 1))
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(
                lambda n: _curve_point(predictor, m, n, fmt, objective,
                                       reserve, backend, setup_kwargs), ns))
    else:
        points = [_curve_point(predictor, m, n, fmt, objective, reserve,
                               backend, setup_kwargs) for n in ns]
    points.sort(key=lambda p: p.n)
    verified = [p for p in points if p.value is not None]
    if not verified:
        raise ExistenceFailure(fmt, eq.ExistenceVerdict(
            "condition-failed", note="no admitted number admits an SSM "
            "equilibrium"))
    best = max(p.value for p in verified)
    argmax = min(p.n for p in verified if p.value >= best - tie_tol)
    return RevenueCurve(fmt, objective, reserve, points, argmax)


def condition12_check(gs, grid_size=101, slack=1e-6):
    """Reverse-hazard-rate dominance of the n = m auction, all n.

    Checked in the cleared-denominator form (m-1) x f1(x) H(x|x)
    - x F1(x) h(x|x) >= -slack, which is equivalent on (0, 1] and stays
    bounded at the density pole.
    """
    xs = np.linspace(1e-3, 1.0, grid_size)
    worst = (None, np.inf)
    for n in range(2, gs.m + 1):
        sib = gs if n == gs.n else GameSetup(gs.m, n, gs.predictor,
                                             backend=gs.backend)
        fx = np.asarray(sib.predictor.f1.cdf(xs), dtype=float)
        xf = np.asarray(sib.predictor.f1.xpdf(xs), dtype=float)
        Hr = sib._b.H_reduced(fx, fx)
        hr = sib._b.h_reduced(fx, fx)
        delta = (gs.m - 1) * xf * Hr - (sib.n - 1) * fx * xf * hr
        i = int(np.argmin(delta))
        if delta[i] < worst[1]:
            worst = ((float(xs[i]), n, float(delta[i])), float(delta[i]))
    if worst[1] >= -slack:
        return eq.ExistenceVerdict("verified")
    w = worst[0]
    return eq.ExistenceVerdict("condition-failed",
                               witness=(w[0], w[1], w[2]))


@dataclass
class RankingRow:
    n: int
    sp: Optional[float]
    fp: Optional[float]
    ap: Optional[float]
    h2_nonpositive: dict          # v -> bool for H2(v|v) <= 0
    h_over_h2_decreasing: dict    # v -> bool for d/dx (H/H2) <= 0 on (0, v]
    uniform: Optional[float] = None


@dataclass
class RankingReport:
    rows: list
    optimal: dict                 # format -> (n*, value)
    optimal_ranking: dict         # verdicts on the at-optimality ranking

    def row(self, n):
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)


_FLAG_VS = (0.25, 0.5, 0.75, 0.95)


def _pairwise_ranking_flags(gs, tol=1e-6):
    h2_flag, ratio_flag = {}, {}
    for v in _FLAG_VS:
        h2_diag = gs.win_cdf_dv_H2(v, v)
        h2_flag[v] = bool(h2_diag <= tol)
        xs = np.linspace(0.02, v, 25)
        h2 = gs.win_cdf_dv_H2(xs, np.full_like(xs, v))
        H = gs.win_cdf_H(xs, np.full_like(xs, v))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(h2) > 1e-12, H / h2, np.nan)
        d = np.diff(ratio)
        ratio_flag[v] = bool(np.all(np.isnan(d) | (d <= tol)))
    return h2_flag, ratio_flag


def ranking_report(predictor, m, reserve=0.0, backend="auto", items=0,
                   **setup_kwargs):
    """Per-n revenues of the three formats plus the pairwise-comparison
    condition flags and the optimal-prescreening ranking verdicts.  With
    ``items`` = K > 0 a uniform-auction column (K items at the (K+1)-st
    price) is included for the admitted numbers that allow it."""
    rows = []
    for n in range(2, m + 1):
        gs = GameSetup(m, n, predictor, backend=backend, **setup_kwargs)
        try:
            sp = revenue_sp(gs, reserve)
        except Exception:
            sp = None
        try:
            fp = revenue_fp(gs, reserve)
        except ExistenceFailure:
            fp = None
        try:
            ap = revenue_ap(gs, reserve)
        except ExistenceFailure:
            ap = None
        h2_flag, ratio_flag = _pairwise_ranking_flags(gs)
        row = RankingRow(n, sp, fp, ap, h2_flag, ratio_flag)
        if items and 1 <= items <= n - 1:
            row.uniform = uniform_auction_revenue(gs, items)
        rows.append(row)
    optimal = {}
    for fmt, col in ((eq.SECOND_PRICE, "sp"), (eq.FIRST_PRICE, "fp"),
                     (eq.ALL_PAY, "ap")):
        vals = [(getattr(r, col), r.n) for r in rows
                if getattr(r, col) is not None]
        if vals:
            best = max(vals)
            optimal[fmt] = (min(n for v, n in vals if v >= best[0] - 1e-9),
                            best[0])
    ranking = {}
    if all(f in optimal for f in (eq.SECOND_PRICE, eq.FIRST_PRICE,
                                  eq.ALL_PAY)):
        sp_star = optimal[eq.SECOND_PRICE][1]
        fp_star = optimal[eq.FIRST_PRICE][1]
        ap_star = optimal[eq.ALL_PAY][1]
        ranking = {
            "ap_geq_sp": bool(ap_star >= sp_star - 2e-4),
            "ap_geq_fp": bool(ap_star >= fp_star - 2e-4),
            "fp_eq_sp": bool(abs(fp_star - sp_star) < 2e-4),
        }
    return RankingReport(rows, optimal, ranking)


def ap_optimal_vs_extra_bidder(predictor, m, backend="auto"):
    """Optimal all-pay revenue with m bidders vs the optimal second-price
    revenue with one extra bidder.  Reported, never asserted: the
    large-pool dominance carries no concrete threshold."""
    ap = sweep_optimal_n(predictor, m, eq.ALL_PAY, backend=backend)
    sp_extra = revenue_sp(GameSetup(m + 1, m + 1, predictor,
                                    backend=backend))
    return {"ap_star": ap.value_at(ap.argmax_n), "ap_argmax": ap.argmax_n,
            "sp_all_extra": sp_extra}


@dataclass
class MrReport:
    mrcon: eq.ExistenceVerdict
    payment_fn: Optional[callable]
    revenue: Optional[float]


def mr_check_and_revenue(gs, grid_size=15, slack=1e-6, h2_floor=None):
    """Surplus-extracting auction for correlated values.

    Validity needs H2(x|v) < 0 together with d/dv (H/H2) >= -1 on a grid;
    both fail whenever the posterior does not move with the bidder's own
    valuation (n = m, or the null predictor).  When verified, truthful
    reporting is an equilibrium and revenue equals the expected highest
    admitted valuation.

    Strict negativity of H2 cannot carry an absolute threshold: H2
    vanishes like F1(x)^(m-1) toward x = 0 even when it is negative
    everywhere.  The check therefore requires H2 to clear the
    finite-difference noise floor of the active backend, which still
    rejects the identically-zero cases.
    """
    if h2_floor is None:
        h2_floor = 1e-8 if gs.backend == "closed-form" else 2e-5
    g = np.linspace(0.05, 0.95, grid_size)
    x, v = [a.ravel() for a in np.meshgrid(g, g, indexing="ij")]
    h2 = gs.win_cdf_dv_H2(x, v)
    if np.any(h2 > -h2_floor):
        i = int(np.argmax(h2))
        verdict = eq.ExistenceVerdict(
            "condition-failed", witness=(float(x[i]), float(v[i]),
                                         float(h2[i])),
            note="H2 not negative")
        return MrReport(verdict, None, None)
    step = 1e-3
    vp, vm = np.minimum(v + step, 1.0), np.maximum(v - step, 0.0)
    ratio_p = gs.win_cdf_H(x, vp) / gs.win_cdf_dv_H2(x, vp)
    ratio_m = gs.win_cdf_H(x, vm) / gs.win_cdf_dv_H2(x, vm)
    dratio = (ratio_p - ratio_m) / (vp - vm)
    if np.any(dratio < -1.0 - slack):
        i = int(np.argmin(dratio))
        verdict = eq.ExistenceVerdict(
            "condition-failed", witness=(float(x[i]), float(v[i]),
                                         float(dratio[i])),
            note="d/dv (H/H2) < -1")
        return MrReport(verdict, None, None)

    def payment(bid, wins):
        H = gs.win_cdf_H(bid, bid)
        H2 = gs.win_cdf_dv_H2(bid, bid)
        base = bid - (H + bid * H2) * H / H2
        return base + (H + bid * H2) / H2 if wins else base

    return MrReport(eq.ExistenceVerdict("verified"), payment,
                    expected_kth_value(gs, 1))


@dataclass
class JointDesignReport:
    regular: bool
    myerson_reserve: Optional[float]
    myerson_revenue: Optional[float]
    mr_report: Optional[MrReport]
    winner: Optional[str]


def virtual_value(marginal, v):
    v = np.asarray(v, dtype=float)
    F = np.asarray(marginal.cdf(v), dtype=float)
    f = np.asarray(marginal.pdf(v), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = v - np.where(f > 0, (1.0 - F) / f, np.inf)
    return out


def myerson_and_joint_design(predictor, m, backend="auto"):
    """Myerson reserve auction with everyone admitted vs the
    surplus-extracting auction at n = m - 1 (the joint-design comparison)."""
    grid = np.linspace(1e-6, 1.0, 201)
    phi = virtual_value(predictor.f1, grid)
    if np.any(np.diff(phi) < -1e-9):
        raise ValueError("regularity check failed: virtual value is not "
                         "non-decreasing")
    r_star = find_root(lambda v: float(virtual_value(predictor.f1, v)),
                       1e-9, 1.0, 1e-12)
    gs_full = GameSetup(m, m, predictor, backend=backend)
    myerson_rev = revenue_sp(gs_full, r_star)
    mr = None
    winner = "myerson"
    if m >= 3:
        gs_mr = GameSetup(m, m - 1, predictor, backend=backend)
        mr = mr_check_and_revenue(gs_mr)
        if mr.revenue is not None and mr.revenue > myerson_rev:
            winner = "mrauction(m-1)"
    return JointDesignReport(True, float(r_star), float(myerson_rev), mr,
                             winner)
