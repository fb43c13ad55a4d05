from __future__ import annotations

import numpy as np
import pytest

from curvq.metrics import parse_metric_config, resolve_preset

CURVED_1D_TOML = """
dimension = 1
name = "wavy-circle"

[component]
1.1 = "(1 + 0.2*sin(x1))^2"

[range]
1 = [0.0, 6.283185307179586, true]
"""


@pytest.fixture(scope="session")
def flat1():
    return resolve_preset("flat-cartesian-1")


@pytest.fixture(scope="session")
def flat2():
    return resolve_preset("flat-cartesian-2")


@pytest.fixture(scope="session")
def polar():
    return resolve_preset("flat-polar-2")


@pytest.fixture(scope="session")
def sphere():
    return resolve_preset("sphere-2(1)")


@pytest.fixture(scope="session")
def hyperbolic():
    return resolve_preset("hyperbolic-2(1)")


@pytest.fixture(scope="session")
def conformal():
    return resolve_preset("conformal-2(0.3*sin(x1)*sin(x2))")


@pytest.fixture(scope="session")
def curved1d():
    return parse_metric_config(CURVED_1D_TOML)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
