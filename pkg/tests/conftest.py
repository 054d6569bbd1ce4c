import numpy as np
import pytest

from rishwi.channel import ScenarioGeometry, SystemConfig


def make_geometry(K, seed=0, nu=1.0, mu=1.0, xi=0.5, rho=2.0, epsilon=1.5):
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0.0, 2 * np.pi, size=2 * K + 4)
    return ScenarioGeometry(
        nu=nu, mu=np.broadcast_to(mu, (K,)) * np.linspace(1.0, 0.6, K), xi=np.broadcast_to(xi, (K,)),
        rho=rho, epsilon=np.broadcast_to(epsilon, (K,)),
        psi_a_kr=ang[:K], psi_e_kr=ang[K:2 * K],
        phi_a_rb=ang[-4], phi_e_rb=ang[-3], psi_a_rb=ang[-2], psi_e_rb=ang[-1],
    )


def make_config(M=4, N=4, K=2, p=1.0, sigma2=0.3, k_r=0.3, k_u=0.1, k_b=0.05):
    return SystemConfig(M=M, N=N, K=K, p=p, sigma2=sigma2, k_r=k_r, k_u=k_u, k_b=k_b)


@pytest.fixture
def small():
    """Unit-scale scenario where every term of the moments is of comparable size."""
    return make_geometry(2, seed=3), make_config()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
