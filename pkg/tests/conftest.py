import numpy as np
import pytest

from strategic_lqg import AgentParams, MarketModel


def random_model(rng, n_agents, horizon, sigma=None, zeta=None):
    agents = [
        AgentParams(
            a=float(rng.uniform(-1.2, 1.2)),
            b=float(rng.uniform(0.3, 1.5) * rng.choice([-1, 1])),
            q=float(-rng.uniform(0.0, 2.0)),
            r=float(-rng.uniform(0.2, 2.0)),
            sigma=float(rng.uniform(0.2, 2.0)) if sigma is None else sigma,
            zeta=float(rng.uniform(0.2, 2.0)) if zeta is None else zeta,
        )
        for _ in range(n_agents)
    ]
    return MarketModel(agents, horizon)


@pytest.fixture
def ref_model():
    """Two identical agents a=b=1, q=r=-1 over two stages."""
    return MarketModel([AgentParams(1, 1, -1, -1)] * 2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
