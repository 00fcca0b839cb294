"""Shared reference implementations the tests check the library against.

Everything here is written deliberately unlike the library code (plain
loops, different series lengths, different shift thresholds, scipy where
the library hand-rolls) so that agreement is evidence, not tautology.
"""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy import special as sp


def reference_digamma(x: float) -> float:
    """Recurrence to x >= 32, then the Bernoulli asymptotic series.

    The larger shift and the extra series term make the truncation error
    negligible next to the 1e-10 tolerance the library is held to.
    """
    acc = 0.0
    while x < 32.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = (
        1.0 / 12.0
        - inv2
        * (
            1.0 / 120.0
            - inv2
            * (
                1.0 / 252.0
                - inv2
                * (
                    1.0 / 240.0
                    - inv2
                    * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))
                )
            )
        )
    )
    return acc + math.log(x) - 0.5 / x - inv2 * series


def reference_ksg(x: np.ndarray, y: np.ndarray, k: int) -> float:
    """Loop transcription of the joint max-metric k-NN estimator."""
    n = x.shape[0]
    psi_sum = 0.0
    for i in range(n):
        dx = [float(np.sqrt(np.sum((x[i] - x[j]) ** 2))) for j in range(n)]
        dy = [float(np.sqrt(np.sum((y[i] - y[j]) ** 2))) for j in range(n)]
        dj = sorted(max(a, b) for j, (a, b) in enumerate(zip(dx, dy)) if j != i)
        eps = dj[k - 1]
        n_x = sum(1 for j in range(n) if j != i and dx[j] < eps)
        n_y = sum(1 for j in range(n) if j != i and dy[j] < eps)
        psi_sum += sp.psi(n_x + 1) + sp.psi(n_y + 1)
    return float(sp.psi(k) - psi_sum / n + sp.psi(n))


def reference_channel_mi(delta: float, sigma: float) -> float:
    """I(S; Y) for the symmetric binary-input Gaussian channel by quad."""

    def density(y: float) -> float:
        a = math.exp(-((y - delta / 2.0) ** 2) / (2.0 * sigma**2))
        b = math.exp(-((y + delta / 2.0) ** 2) / (2.0 * sigma**2))
        return (a + b) / (2.0 * sigma * math.sqrt(2.0 * math.pi))

    def integrand(y: float) -> float:
        p = density(y)
        return -p * math.log(p) if p > 0.0 else 0.0

    h_y, _ = integrate.quad(integrand, -np.inf, np.inf, limit=400)
    h_noise = 0.5 * math.log(2.0 * math.pi * math.e * sigma**2)
    return h_y - h_noise


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def correlated_gaussian(rho: float, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Bivariate normal with known MI = -0.5 ln(1 - rho^2)."""
    g = np.random.default_rng(seed)
    cov = [[1.0, rho], [rho, 1.0]]
    xy = g.multivariate_normal([0.0, 0.0], cov, size=n)
    return xy[:, :1], xy[:, 1:]
