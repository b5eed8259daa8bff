import itertools
import math

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from psi_operators import ActivationParams, DensityKernel

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

FULL_GRID = [
    ActivationParams(q, b, B)
    for q, b, B in itertools.product((0.5, 1.0, 2.0), (0.5, 1.0, 2.0), (2.0, math.e))
]

q_values = st.floats(0.1, 10.0)
beta_values = st.floats(0.25, 4.0)
base_values = st.floats(1.5, 10.0)
params_strategy = st.builds(ActivationParams, q_values, beta_values, base_values)


@pytest.fixture
def unit_kernel():
    return DensityKernel(ActivationParams(1.0, 1.0, math.e))


@pytest.fixture(params=[(2.0, 0.5, 2.0), (0.5, 2.0, math.e), (1.0, 1.0, math.e)], ids=lambda p: "q{}-b{}-B{:.3g}".format(*p))
def kernel(request):
    return DensityKernel(ActivationParams(*request.param))


def mp_psi(params, x, mp):
    """High-precision psi straight from the definition."""
    q, beta, B = (mp.mpf(v) for v in (params.q, params.beta, params.base))
    x = mp.mpf(x)

    def nu(qq, t):
        return 1 / (1 + qq * B ** (-beta * t))

    def G(qq):
        return (nu(qq, x + 1) - nu(qq, x - 1)) / 2

    return (G(q) + G(1 / q)) / 2


def psi_cdf(params, x):
    """Closed-form antiderivative of psi (softplus differences); -> 0 at -inf."""
    c = params.rate

    def S(t, log_q):
        return np.logaddexp(0.0, c * t - log_q) / c

    total = 0.0
    for log_q in (math.log(params.q), -math.log(params.q)):
        total += 0.25 * (S(x + 1.0, log_q) - S(x - 1.0, log_q))
    return total


#: one "PASS/FAIL <criterion>" line per acceptance check, printed at the end
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
