"""Independent reference computations shared by the tests.

Nothing here calls into the package's solvers; exponents come from generic
polynomial roots and the optimal allocation from a bounded numerical search.
"""

import math

import numpy as np
from scipy.optimize import minimize_scalar


def positive_root(coeffs):
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-12].real
    return float(real[real > 0].max())


def power_exponents(r, b, mu, sigma, lam, p):
    """``a_r``, ``k`` and ``a_b`` as positive roots of their defining polynomials."""
    m = 0.5 * ((mu - r) / sigma) ** 2
    m_b = 0.5 * ((mu - b) / sigma) ** 2
    a_r = positive_root([p - r, p - r - m - lam, -lam])
    # lam = k (p - mu + sigma^2 (k + 1) / 2)
    k = positive_root([0.5 * sigma**2, p - mu + 0.5 * sigma**2, -lam])
    a_b = positive_root([p - b, p - b - m_b - lam, -lam])
    return a_r, k, a_b


def power_generator(a, pi_frac, r, b, mu, sigma, lam, p):
    """``L psi / psi`` for ``psi = w^-a`` and ``pi = pi_frac * w`` (independent of ``w``)."""
    drift = r * max(1.0 - pi_frac, 0.0) - b * max(pi_frac - 1.0, 0.0) + mu * pi_frac - p
    return -a * drift + 0.5 * sigma**2 * pi_frac**2 * a * (a + 1.0) - lam


def best_fraction(a, r, b, mu, sigma, lam, p, allow_borrow):
    """Minimise the generator over the feasible fractions by bounded search."""
    f = lambda q: power_generator(a, q, r, b, mu, sigma, lam, p)
    pieces = [(0.0, 1.0)]
    if allow_borrow:
        pieces.append((1.0, 1.0 + 50.0 * (mu - b) / sigma**2 + 10.0))
    best = (math.inf, None)
    for lo, hi in pieces:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        for q in (lo, hi, res.x):
            val = f(q)
            if val < best[0]:
                best = (val, q)
    return best


def random_power_draw(rng):
    r = rng.uniform(0.005, 0.05)
    mu = r + rng.uniform(0.005, 0.12)
    sigma = rng.uniform(0.08, 0.45)
    lam = rng.uniform(0.005, 0.15)
    p = r + rng.uniform(0.002, 0.12)
    b = r + rng.uniform(0.0, 1.0) * (min(mu, p) - r) * 0.999
    return dict(r=r, b=b, mu=mu, sigma=sigma, lam=lam, p=p)


class KummerRiccati:
    """Exact ``y = h/h'`` on the risky-only region from confluent hypergeometric functions.

    With ``t = 2c / (sigma^2 w)`` the linear ODE for ``h`` has solutions
    ``t^s e^-t M(B - s, B, t)`` and ``t^s e^-t U(B - s, B, t)``; the terminal
    value of ``y`` at the lending level fixes their mix.
    """

    def __init__(self, r, mu, sigma, lam, c, dps=30):
        import mpmath as mp

        self.mp = mp
        mp.mp.dps = dps
        self.mu, self.c, self.s2, self.lam = mp.mpf(mu), mp.mpf(c), mp.mpf(sigma) ** 2, mp.mpf(lam)
        al = 2 * self.mu / self.s2
        self.beta = 2 * self.c / self.s2
        ga = 2 * self.lam / self.s2
        self.s = (-(1 - al) + mp.sqrt((1 - al) ** 2 + 4 * ga)) / 2
        self.B = 2 * self.s + 2 - al
        m = 0.5 * ((mu - r) / sigma) ** 2
        q = r + lam + m
        d = (q + math.sqrt(q * q - 4 * r * lam)) / (2 * r)
        x = (mu - r) / sigma**2 / (d - 1)
        self.w_l = x / (1 + x) * c / r
        y_l = mp.mpf(-(c / r - self.w_l) / d)
        w = mp.mpf(self.w_l)
        h1, h2 = self._h1(w), self._h2(w)
        d1, d2 = mp.diff(self._h1, w), mp.diff(self._h2, w)
        # (h1 + C h2) = y_l (d1 + C d2)
        self.C = -(h1 - y_l * d1) / (h2 - y_l * d2)

    def _h1(self, w):
        t = self.beta / w
        return t**self.s * self.mp.exp(-t) * self.mp.hyp1f1(self.B - self.s, self.B, t)

    def _h2(self, w):
        t = self.beta / w
        return t**self.s * self.mp.exp(-t) * self.mp.hyperu(self.B - self.s, self.B, t)

    def h(self, w):
        return self._h1(w) + self.C * self._h2(w)

    def y(self, w):
        w = self.mp.mpf(w)
        return float(self.h(w) / self.mp.diff(self.h, w))

    def root(self, slope, guess):
        """Wealth where ``y`` meets ``slope * w - c / lam``."""
        mp = self.mp
        f = lambda w: self.h(w) / mp.diff(self.h, w) - (slope * w - self.c / self.lam)
        return float(mp.findroot(f, guess))
