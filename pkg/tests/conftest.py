"""Shared fixtures: predictor/game-setup factories with caching.

GameSetup construction tabulates belief quantities, so tests share setups
through a cache keyed by primitive descriptors.
"""

from functools import lru_cache

import numpy as np
import pytest

from prescreen.beliefs import GameSetup
from prescreen.predictors import Copula, Marginal, Predictor


def _copula(desc):
    kind = desc[0]
    if kind == "independence":
        return Copula.independence()
    if kind == "comonotonic":
        return Copula.comonotonic()
    if kind == "hal":
        return Copula.hallucinatory(desc[1])
    if kind == "amh":
        return Copula.amh(desc[1])
    if kind == "fgm":
        return Copula.fgm(desc[1])
    if kind == "fgm-raw":
        return Copula.fgm(desc[1], validate=False)
    if kind == "mix":
        weights = [w for w, _ in desc[1]]
        comps = [_copula(c) for _, c in desc[1]]
        return Copula.mixture(weights, comps)
    raise KeyError(desc)


def _marginal(desc):
    if desc[0] == "power":
        return Marginal.power(desc[1])
    raise KeyError(desc)


@lru_cache(maxsize=None)
def get_predictor(cop=("independence",), f1=("power", 1.0),
                  f2=("power", 1.0)):
    return Predictor(_copula(cop), _marginal(f1), _marginal(f2))


@lru_cache(maxsize=None)
def get_setup(m, n, cop=("independence",), f1=("power", 1.0),
              f2=("power", 1.0), backend="auto"):
    return GameSetup(m, n, get_predictor(cop, f1, f2), backend=backend)


UNIFORM = ("power", 1.0)
POWER02 = ("power", 0.2)

NULL = ("independence",)
PERFECT = ("comonotonic",)


def hal(gamma):
    return ("hal", gamma)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
