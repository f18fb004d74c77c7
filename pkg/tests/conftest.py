import numpy as np
import pytest
from hypothesis import settings

from repchain.params import SystemParams, db_to_linear

settings.register_profile("repchain", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("repchain")


def random_params(rng: np.random.Generator, dark_max: float = 1e-4, p1: float = 1.0) -> SystemParams:
    """Device parameters drawn from a realistic box (seeded, so deterministic)."""
    return SystemParams(
        eta_e=rng.uniform(0.5, 1.0), eta_r=rng.uniform(0.5, 1.0), eta_d=rng.uniform(0.5, 1.0),
        p_dark_e=rng.uniform(0, dark_max), p_dark_r=rng.uniform(0, dark_max), p_dark_d=rng.uniform(0, dark_max),
        lambda_m=db_to_linear(rng.uniform(0.0, 3.0)), alpha_db_per_km=rng.uniform(0.15, 0.3),
        m_modes=int(rng.integers(1, 2001)), t_q_seconds=rng.uniform(1e-9, 1e-6), p1=p1,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


IDEAL = SystemParams(eta_e=1.0, eta_r=1.0, eta_d=1.0, p_dark_e=0.0, p_dark_r=0.0, p_dark_d=0.0,
                     lambda_m=1.0, alpha_db_per_km=0.2, m_modes=1, t_q_seconds=1.0)


#: Filled by the acceptance tests; echoed in the terminal summary in criterion order.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
