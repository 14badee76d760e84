"""Modified Bessel function of the second kind, K_nu(x), for real order.

Temme's series is used for x < 2 and Steed's continued fraction (CF2) for
x >= 2, both at the reduced order mu = nu - round(nu) in [-1/2, 1/2]; the
requested order is then reached by the forward recurrence
K_{mu+1}(x) = K_{mu-1}(x) + (2 mu / x) K_mu(x), which is stable for K.
Vectorized over x for a scalar order.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError, NumericError

_EPS = 1e-16
_MAXIT = 10000
_XMIN = 2.0

# Taylor coefficients of 1/Gamma(1 + x) about 0.
_RGAMMA1P = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
    -2.2987456844353702066e-19,
    1.7144063219273374334e-20,
)


def _temme_gammas(mu: float):
    """gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    odd = 0.0
    even = 0.0
    for k in range(len(_RGAMMA1P) - 1, -1, -1):
        c = _RGAMMA1P[k]
        if k % 2:
            odd = odd * mu * mu + c
        else:
            even = even * mu * mu + c
    # 1/Gamma(1 +- mu) = even +- mu * odd
    gam1 = -odd
    gam2 = even
    return gam1, gam2, even + mu * odd, even - mu * odd


def _k_small(mu: float, x: np.ndarray):
    """K_mu and K_{mu+1} by Temme's series, valid for 0 < x < 2."""
    mu2 = mu * mu
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAXIT):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total = total + np.where(active, delta, 0.0)
        total1 = total1 + np.where(active, c * (p - i * ff), 0.0)
        active &= np.abs(delta) >= np.abs(total) * _EPS
        if not active.any():
            break
    else:
        raise NumericError("bessel_k: series failed to converge")
    return total, total1 * 2.0 / x


def _k_large(mu: float, x: np.ndarray):
    """K_mu and K_{mu+1} by Steed's continued fraction, valid for x >= 2."""
    mu2 = mu * mu
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu2
    q = np.full_like(x, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    active = np.ones(x.shape, dtype=bool)
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + np.where(active, delh, 0.0)
        dels = q * delh
        s = s + np.where(active, dels, 0.0)
        active &= np.abs(dels / s) >= _EPS
        if not active.any():
            break
    else:
        raise NumericError("bessel_k: continued fraction failed to converge")
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def bessel_k(nu: float, x):
    """K_nu(x) for real order ``nu`` and ``x > 0`` (array or scalar).

    K is even in the order, so negative ``nu`` is folded to ``|nu|``.
    """
    nu = abs(float(nu))
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(~(xa > 0)):
        raise DataError("bessel_k requires x > 0")
    nl = int(nu + 0.5)
    mu = nu - nl
    kmu = np.empty_like(xa)
    k1 = np.empty_like(xa)
    small = xa < _XMIN
    if small.any():
        kmu[small], k1[small] = _k_small(mu, xa[small])
    if (~small).any():
        kmu[~small], k1[~small] = _k_large(mu, xa[~small])
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / xa) * k1 + kmu
    return float(kmu[0]) if scalar else kmu
