"""Shared fixtures: the four reference media used throughout the suite."""

from pathlib import Path

import numpy as np
import pytest

import elastoray as er
from elastoray.medium import Poly3

PARAMS = er.ClassParams(L=3.5, eps=0.2, delta=0.5)


@pytest.fixture(scope="session")
def constant_medium():
    # rho = lam = mu = 1: c_S = 1, c_P = sqrt(3)
    return er.Medium(rho=1.0, lam=1.0, mu=1.0, class_params=PARAMS)


@pytest.fixture(scope="session")
def stressed_medium():
    stress = er.ConstantStress(0.1 * np.diag([1.0, 0.0, -1.0]))
    return er.Medium(rho=1.0, lam=1.0, mu=1.0, stress=stress, class_params=PARAMS)


@pytest.fixture(scope="session")
def potential_medium():
    stress = er.stress_from_potential(Poly3({(1, 1, 1): 0.05}))
    return er.Medium(rho=1.0, lam=1.0, mu=1.0, stress=stress, class_params=PARAMS)


@pytest.fixture(scope="session")
def bump_medium():
    # radial slowdown, smooth and nonconstant; lam = mu keeps c_P/c_S = sqrt(3)
    def bump():
        return er.GaussianBumpField(1.0, -0.3, center=(0.0, 0.0, 0.0), width=0.55)

    return er.Medium(rho=1.0, lam=bump(), mu=bump(), class_params=PARAMS)


@pytest.fixture(scope="session")
def media_dir():
    return Path(__file__).resolve().parents[1] / "media"


@pytest.fixture()
def rng():
    return np.random.default_rng(20260819)
