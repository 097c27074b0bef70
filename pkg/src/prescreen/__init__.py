"""Equilibrium strategies, revenue and optimal prescreening for auctions
whose seller admits the top-n of m bidders ranked by copula-based
valuation predictors, plus an independent Monte Carlo game oracle.

Hot numeric kernels live in a compiled extension when available
(``prescreen._kernels``), with a pure-numpy fallback selected at import;
see ``prescreen._backend``.
"""

from ._backend import kernel_implementation
from .beliefs import GameSetup, OrderStatCdf
from .equilibria import (ALL_PAY, FIRST_PRICE, NO_BID, SECOND_PRICE,
                         StrategyProfile, ap_existence_check, ap_strategy,
                         fp_existence_check, fp_strategy, inflated_type,
                         is_no_bid, j_function, sp_strategy)
from .numerics import (IntegrationError, QuadratureSpec, RootFindingError,
                       TabulatedFunction, find_root, integrate, tabulate)
from .predictors import (Copula, Marginal, Predictor, PqdOrdering,
                         cond_cdf_signal_given_value,
                         cond_cdf_value_given_signal, cond_expectation,
                         copula_partials, hallucinatory_predictor,
                         null_predictor, perfect_predictor, pqd_compare,
                         predictor_from_json, sample_signal,
                         validate_predictor)
from .revenue import (ExistenceFailure, RevenueCurve, condition12_check,
                      expected_kth_value, highest_bid_ap,
                      mr_check_and_revenue, myerson_and_joint_design,
                      ranking_report, revenue_ap, revenue_fp, revenue_sp,
                      sweep_optimal_n, uniform_auction_revenue,
                      virtual_value)
from .simulate import SimConfig, SimResult, best_response_audit, run_sim

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
