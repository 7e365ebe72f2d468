"""Independent numerical oracles used by the tests.

Everything here is deliberately implemented without the package internals:
Numerov shooting for 1D eigenvalues, scalar quadrature for the quartic
partition function, Wick pairings for Gaussian moments and the geometric
Kullback-Leibler divergence for thermal single-mode states.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


def numerov_ground_state(a: float = 4.0, L: float = 8.0, m: float = 0.0,
                         n: int = 16001, bracket=(0.5, 2.0)) -> float:
    """Lowest eigenvalue of -u'' + |x|^a + m by even-parity shooting."""

    def mismatch(E: float) -> float:
        x = np.linspace(0.0, L, n)
        h = x[1] - x[0]
        g = E - (x**a + m)
        f = 1.0 + (h * h / 12.0) * g
        u = np.empty(n)
        u[0] = 1.0
        u[1] = u[0] * (1.0 - 0.5 * g[0] * h * h + g[0] ** 2 * h**4 / 24.0)
        for i in range(1, n - 1):
            u[i + 1] = ((12.0 - 10.0 * f[i]) * u[i] - f[i - 1] * u[i - 1]) / f[i + 1]
            if abs(u[i + 1]) > 1e250:
                u[: i + 2] /= 1e250
        return u[-1]

    return brentq(mismatch, *bracket, xtol=1e-12)


def quartic_zr() -> float:
    """Z_r = integral_0^inf exp(-r - r^2) dr for the unit quartic weight."""
    val, _ = quad(lambda r: math.exp(-r - r * r), 0.0, np.inf)
    return val


def dirichlet_eigenvalue(j: int, m: float = 1.0) -> float:
    """Continuum Dirichlet spectrum of -u'' + m on [-1, 1]."""
    return (j * math.pi / 2.0) ** 2 + m


def wick_fourth_moment(lams, i: int, j: int, k: int, l: int) -> float:
    """E[conj(a_i) conj(a_j) a_k a_l] for independent complex Gaussians with
    E|a_p|^2 = 1/lambda_p."""
    lams = np.asarray(lams, dtype=float)
    pairings = int(i == k) * int(j == l) + int(i == l) * int(j == k)
    return pairings / (lams[i] * lams[j])


def geometric_kl(nbar_a: float, nbar_b: float) -> float:
    """KL divergence of the occupancy distributions of two thermal modes."""
    sa = nbar_a / (1.0 + nbar_a)
    sb = nbar_b / (1.0 + nbar_b)
    return math.log((1.0 - sa) / (1.0 - sb)) + nbar_a * math.log(sa / sb)


def forward_difference_form(u: np.ndarray, potential: np.ndarray,
                            dx: float) -> float:
    """Grid quadrature of |u'|^2 + V |u|^2 with Dirichlet walls."""
    padded = np.concatenate([[0.0], u, [0.0]])
    der = np.abs(np.diff(padded)) ** 2 / dx
    return float(der.sum() + np.sum(potential * np.abs(u) ** 2) * dx)
