"""Monte Carlo oracle: plays the full prescreened auction game.

Each trial draws m i.i.d. valuations, draws each signal from the
conditional law of the predictor, admits the top n by signal (ties broken
by an independent uniform draw), collects bids from a StrategyProfile and
settles by format.  Everything is vectorised across trials and driven by
a counter-based Philox stream keyed by the seed, so results are
bit-reproducible and trials are order-independent.

The best-response audit replays the game with a focal bidder forced to a
fixed valuation and compares her realised payoff across deviation bids,
conditioning on admission by rejection.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import equilibria as eq
from .predictors import sample_signal


@dataclass(frozen=True)
class SimConfig:
    trials: int
    seed: int
    format: str
    reserve: float = 0.0
    deviation_grid: Optional[tuple] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if self.format not in (eq.SECOND_PRICE, eq.FIRST_PRICE, eq.ALL_PAY):
            raise ValueError(f"unknown format {self.format!r}")


@dataclass
class SimResult:
    revenue_mean: float
    revenue_stderr: float
    admission_freq: np.ndarray          # per-bidder admission probability
    admitted_values: np.ndarray         # sorted pooled admitted valuations
    max_values: np.ndarray              # sorted per-trial top admitted value
    sale_rate: float
    trials: int
    seed: int
    deviation_gains: list = field(default_factory=list)


def _draw_game(gs, rng, trials, forced_v0=None):
    """Valuations, signals and the admitted index matrix for a batch."""
    m = gs.m
    pred = gs.predictor
    V = np.asarray(pred.f1.quantile(rng.random((trials, m))), dtype=float)
    if forced_v0 is not None:
        V[:, 0] = forced_v0
    U = rng.random((trials, m))
    S = sample_signal(pred, V.ravel(), U.ravel()).reshape(trials, m)
    tie = rng.random((trials, m))
    trial_ids = np.repeat(np.arange(trials), m)
    order = np.lexsort((tie.ravel(), -S.ravel(), trial_ids))
    ranked = (order % m).reshape(trials, m)
    admitted = ranked[:, :gs.n]
    return V, admitted


def _settle(fmt, reserve, values, bids):
    """Per-trial revenue; ``bids`` may contain the NO_BID sentinel."""
    live = np.where(np.isnan(bids), -np.inf, bids)
    top = live.max(axis=1)
    if fmt == eq.ALL_PAY:
        return np.where(np.isnan(bids), 0.0, bids).sum(axis=1)
    sale = top >= reserve
    if fmt == eq.FIRST_PRICE:
        return np.where(sale, top, 0.0)
    part = np.partition(live, -2, axis=1)
    second = part[:, -2]
    price = np.maximum(reserve, np.where(np.isinf(second), 0.0, second))
    return np.where(sale, price, 0.0)


def run_sim(gs, strat, cfg):
    """Simulate the game and aggregate revenue and admission statistics."""
    if strat.format != cfg.format:
        raise ValueError(
            f"strategy is for {strat.format}, config wants {cfg.format}")
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    V, admitted = _draw_game(gs, rng, cfg.trials)
    rows = np.arange(cfg.trials)[:, None]
    adm_values = V[rows, admitted]
    bids = strat.bid(adm_values)
    revenue = _settle(cfg.format, cfg.reserve, adm_values, bids)
    freq = np.bincount(admitted.ravel(), minlength=gs.m) / cfg.trials
    live = np.where(np.isnan(bids), -np.inf, bids)
    sale_rate = float(np.mean(live.max(axis=1) >= cfg.reserve))
    return SimResult(
        revenue_mean=float(revenue.mean()),
        revenue_stderr=float(revenue.std(ddof=1) / np.sqrt(cfg.trials)),
        admission_freq=freq,
        admitted_values=np.sort(adm_values.ravel()),
        max_values=np.sort(adm_values.max(axis=1)),
        sale_rate=sale_rate,
        trials=cfg.trials,
        seed=cfg.seed,
    )


@dataclass
class DeviationRow:
    focal_v: float
    v_tilde: float
    bid: float
    gain: float
    stderr: float
    kept_trials: int


def _payoff(fmt, reserve, v0, bid, opp_max):
    """Focal bidder's payoff against the realised opposing top bid."""
    if np.isnan(bid):
        return np.zeros_like(opp_max)
    wins = (bid > opp_max) & (bid >= reserve)
    if fmt == eq.SECOND_PRICE:
        pay = np.maximum(reserve, np.where(np.isinf(opp_max), 0.0, opp_max))
        return np.where(wins, v0 - pay, 0.0)
    if fmt == eq.FIRST_PRICE:
        return np.where(wins, v0 - bid, 0.0)
    return np.where(wins, v0, 0.0) - bid


def best_response_audit(gs, strat, cfg, focal_values=(0.2, 0.4, 0.6, 0.8),
                        deviation_points=21):
    """Grid-deviation audit of a symmetric strategy.

    For each focal valuation the focal bidder's conditional expected payoff
    (given admission) is estimated for bids sigma(v~) on a valuation grid;
    positive gains beyond a few standard errors flag a profitable
    deviation, i.e. evidence against the equilibrium property.  An
    explicit ``cfg.deviation_grid`` of (focal type, alternative bid) pairs
    replaces the default grid and probes raw bids instead.
    """
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    if cfg.deviation_grid is not None:
        plan = {}
        for v0, bid in cfg.deviation_grid:
            plan.setdefault(float(v0), []).append((None, float(bid)))
    else:
        grid = np.linspace(0.0, 1.0, deviation_points)
        plan = {float(v0): [(float(vt),
                             float(np.atleast_1d(strat.bid(
                                 np.array([vt])))[0]))
                            for vt in grid]
                for v0 in focal_values}
    rows = []
    for v0, deviations in plan.items():
        V, admitted = _draw_game(gs, rng, cfg.trials, forced_v0=v0)
        kept = np.any(admitted == 0, axis=1)
        if not np.any(kept):
            continue
        adm = admitted[kept]
        vals = V[kept][np.arange(adm.shape[0])[:, None], adm]
        opp_vals = np.where(adm == 0, np.nan, vals)
        opp_bids = strat.bid(np.nan_to_num(opp_vals, nan=0.0))
        opp_bids = np.where(np.isnan(opp_vals) | np.isnan(opp_bids),
                            -np.inf, opp_bids)
        opp_max = opp_bids.max(axis=1)
        base_bid = float(np.atleast_1d(strat.bid(np.array([v0])))[0])
        base = _payoff(cfg.format, cfg.reserve, v0, base_bid, opp_max)
        for vt, dev_bid in deviations:
            dev = _payoff(cfg.format, cfg.reserve, v0, dev_bid, opp_max)
            diff = dev - base
            n_kept = diff.shape[0]
            rows.append(DeviationRow(
                focal_v=float(v0),
                v_tilde=np.nan if vt is None else float(vt),
                bid=dev_bid,
                gain=float(diff.mean()),
                stderr=float(diff.std(ddof=1) / np.sqrt(n_kept))
                if n_kept > 1 else np.inf,
                kept_trials=int(n_kept)))
    return rows


def max_gain_sigmas(rows):
    """Largest deviation gain measured in its own standard errors."""
    best = 0.0
    for r in rows:
        if r.gain > 0 and r.stderr > 0:
            best = max(best, r.gain / r.stderr)
    return best
