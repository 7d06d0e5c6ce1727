"""Independent reference computations used by the tests."""

import math

import numpy as np
from scipy.integrate import solve_ivp


def damped_mode(mu: float, t: float, y0: float, yd0: float):
    """(y(t), y'(t)) for y'' + mu y' + mu^2 y = 0 by DOP853.

    The exact factor exp(-mu t / 2) is removed first so the integrator works
    on the undamped oscillator z'' + (3 mu^2 / 4) z = 0 and relative accuracy
    survives even when y(t) is astronomically small.
    """
    a = mu / 2
    w2 = 0.75 * mu * mu
    sol = solve_ivp(lambda s, z: [z[1], -w2 * z[0]], (0.0, t), [y0, yd0 + a * y0],
                    method="DOP853", rtol=1e-13, atol=1e-14)
    z, zd = sol.y[0, -1], sol.y[1, -1]
    damp = math.exp(-a * t)
    return damp * z, damp * (zd - a * z)


def propagator_oracle(mu: float, t: float) -> dict:
    g1, dg1 = damped_mode(mu, t, 1.0, 0.0)
    g2, dg2 = damped_mode(mu, t, 0.0, 1.0)
    return {"G1": g1, "G2": g2, "dG1": dg1, "dG2": dg2}


def radial_fourier_laplacian_1d(width: float, s: float, x: np.ndarray) -> np.ndarray:
    """(-d^2/dx^2)^(s/2) exp(-x^2/w^2) from the Fourier integral by quadrature.

    The transform of exp(-x^2/w^2) is w sqrt(pi) exp(-w^2 xi^2 / 4), so the
    result is (1/pi) int_0^inf xi^s w sqrt(pi) exp(-w^2 xi^2/4) cos(xi x) dxi.
    """
    from scipy.integrate import quad
    out = []
    for xv in np.atleast_1d(x):
        f = lambda xi: xi ** s * width * math.sqrt(math.pi) * math.exp(-(width * xi) ** 2 / 4) * math.cos(xi * xv)
        val, _ = quad(f, 0, 40 / width, epsabs=1e-12, epsrel=1e-10, limit=400)
        out.append(val / math.pi)
    return np.array(out)
