"""Reference implementations used as test oracles.

These evaluate the same quantities as the package by independent means
(adaptive quadrature, analytic forms) and share no code with it.
"""

import math

import numpy as np
from scipy import integrate

TWO_PI = 2.0 * math.pi


def lorentzian_g(omega, gamma, omega0):
    return 1.0 / (gamma ** 2 + (omega0 - omega) ** 2)


def lorentzian_norm(gamma, lo, hi):
    """L2 normalization constant of the Lorentzian amplitude on ``[lo, hi]``."""
    val, _ = integrate.quad(lambda w: lorentzian_g(w, gamma, 0.0) ** 2, lo, hi,
                            points=[0.0], limit=500, epsabs=0, epsrel=1e-13)
    return 1.0 / math.sqrt(val)


def g2_quadrature_cw(gamma, omega0, lo, hi, t, pair):
    """cw G2 by adaptive oscillatory quadrature over the support ``[lo, hi]``.

    The amplitude is the Lorentzian mode pair normalized on the same support.
    """
    c = lorentzian_norm(gamma, lo - omega0, hi - omega0)

    def part(weight, s):
        if s == 0.0:
            if weight == "sin":
                return 0.0
            val, _ = integrate.quad(lambda w: lorentzian_g(w, gamma, omega0), lo, hi,
                                    points=[omega0], limit=500, epsabs=0, epsrel=1e-12)
            return val
        val, _ = integrate.quad(lambda w: lorentzian_g(w, gamma, omega0), lo, hi,
                                weight=weight, wvar=s, limit=2000, epsabs=0, epsrel=1e-12)
        return val

    out = []
    for tk in np.atleast_1d(t):
        s = 0.5 * tk
        ic = c * part("cos", s)
        is_ = c * part("sin", s)
        if pair == "CD":
            out.append(is_ ** 2)
        elif pair in ("CC", "DD"):
            out.append(0.5 * ic ** 2)
        elif pair == "AB":
            out.append(ic ** 2 + is_ ** 2)
        else:
            raise ValueError(pair)
    return np.asarray(out)


def squared_lorentzian_fwhm(gamma):
    """Analytic FWHM of ``1 / (gamma^2 + u^2)^2`` in ``u``."""
    return 2.0 * gamma * math.sqrt(math.sqrt(2.0) - 1.0)


def jitter_attenuation(omega, sigma_j):
    """Amplitude factor of a cosine of angular frequency ``omega`` blurred by two detectors."""
    return math.exp(-omega ** 2 * (2.0 * sigma_j ** 2) / 2.0)


def fp_single_term_suppression(gamma_f, detuning):
    return (gamma_f / 2) ** 2 / ((gamma_f / 2) ** 2 + detuning ** 2)
