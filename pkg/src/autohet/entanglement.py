"""Schmidt decomposition of discretized two-photon amplitudes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import svdvals

from .errors import ConfigurationError
from .spectral import (Axis, FlatPhaseMatching, GaussianPulse, ModeCombSpec, SignalIdlerGrid,
                       apply_fp_filters, build_cespdc_jsa)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Schmidt coefficients (descending, summing to one) with entropy and Schmidt number."""

    coefficients: np.ndarray
    entropy_nat: float
    entropy_bits: float
    schmidt_number: float

    @property
    def entropy(self):
        return self.entropy_nat

    def to_dict(self, n_coefficients=16):
        return {"entropy_nat": self.entropy_nat, "entropy_bits": self.entropy_bits,
                "schmidt_number": self.schmidt_number,
                "coefficients": self.coefficients[:n_coefficients].tolist()}


def schmidt_from_matrix(matrix):
    """Schmidt spectrum of an amplitude matrix on a uniform grid."""
    s = svdvals(np.asarray(matrix, dtype=complex), check_finite=True)
    lam = s ** 2
    total = lam.sum()
    if not total > 0:
        raise ConfigurationError("amplitude is identically zero")
    lam = np.sort(lam / total)[::-1]
    nz = lam[lam > 0]
    e_nat = float(-np.sum(nz * np.log(nz)))
    e_nat = max(e_nat, 0.0)
    k = float(1.0 / np.sum(lam ** 2))
    return SchmidtSpectrum(lam, e_nat, e_nat / math.log(2.0), k)


def schmidt_decompose(jsa):
    """Schmidt decomposition of a two-dimensional amplitude.

    Signal/idler grids are decomposed directly.  A cw amplitude is a delta
    in ``w+`` and has no finite-grid Schmidt spectrum, so it is rejected.
    """
    if jsa.is_cw:
        raise ConfigurationError(
            "a cw amplitude is delta-correlated in the sum frequency; its Schmidt spectrum "
            "diverges with resolution. Decompose a pulsed amplitude instead.")
    if jsa.coordinate_convention != "signal_idler":
        raise ConfigurationError("Schmidt decomposition needs signal/idler coordinates")
    return schmidt_from_matrix(jsa.values)


def pulsed_grid(omega_s0, omega_i0, gamma, sigma_p, span_linewidths=15.0,
                points_per_fwhm=8, max_points=2048):
    """Square signal/idler grid resolving both the cavity line and the pump.

    Spans ``+-span_linewidths * gamma`` around each photon's centre with a
    power-of-two number of points giving at least ``points_per_fwhm`` samples
    across the narrower of the mode intensity FWHM ``gamma`` and the pump
    intensity FWHM ``2 sqrt(ln 2) sigma_p``.
    """
    span = 2.0 * span_linewidths * gamma
    fwhm = min(gamma, 2.0 * math.sqrt(math.log(2.0)) * sigma_p)
    need = span / (fwhm / points_per_fwhm) + 1
    n = 1 << max(1, int(math.ceil(math.log2(need))))
    if n > max_points:
        raise ConfigurationError(
            f"resolving sigma_p = {sigma_p / TWO_PI:.4g} Hz over +-{span_linewidths} linewidths "
            f"needs {n} points per axis (limit {max_points})")
    return SignalIdlerGrid(Axis(omega_s0, span, n), Axis(omega_i0, span, n))


def pulsed_model_jsa(sigma_p, gamma, omega_minus0, include_filters=False, filter_linewidth=None,
                     filter_fsr=None, grid=None, pm=None, **grid_options):
    """Single mode-pair pulsed amplitude ``alpha(w_s + w_i) A_s(w_s) A_i(w_i)``.

    Signal and idler resonances sit at ``+-omega_minus0 / 2`` and the pump is
    centred on their sum.  Phase matching defaults to flat, which is exact for
    a crystal bandwidth far above the cavity linewidth.
    """
    ws0, wi0 = 0.5 * omega_minus0, -0.5 * omega_minus0
    signal = ModeCombSpec(ws0, gamma, 1e6 * gamma, (0, 0))
    idler = ModeCombSpec(wi0, gamma, 1e6 * gamma, (0, 0))
    if grid is None:
        grid = pulsed_grid(ws0, wi0, gamma, sigma_p, **grid_options)
    jsa = build_cespdc_jsa(GaussianPulse(ws0 + wi0, sigma_p), signal, idler,
                           pm if pm is not None else FlatPhaseMatching(), grid)
    if include_filters:
        if filter_linewidth is None or filter_fsr is None:
            raise ConfigurationError("filter inclusion needs filter_linewidth and filter_fsr")
        jsa = apply_fp_filters(jsa, ModeCombSpec(ws0, filter_linewidth, filter_fsr),
                               ModeCombSpec(wi0, filter_linewidth, filter_fsr))
    return jsa


def entropy_vs_pump_sweep(sigmas, gamma, omega_minus0, include_filters=False, **model_options):
    """Schmidt entropy and number for each pump width in ``sigmas`` (rad/s).

    Returns a list of dicts sorted by ``sigma_p``, each with the entropy in
    nats and bits, the Schmidt number and the grid size used.
    """
    rows = []
    for sigma in sorted(float(s) for s in sigmas):
        jsa = pulsed_model_jsa(sigma, gamma, omega_minus0, include_filters=include_filters,
                               **model_options)
        sp = schmidt_decompose(jsa)
        rows.append({
            "sigma_p": sigma,
            "sigma_p_hz": sigma / TWO_PI,
            "entropy_nat": sp.entropy_nat,
            "entropy_bits": sp.entropy_bits,
            "schmidt_number": sp.schmidt_number,
            "n_points": jsa.grid.signal_axis.n_points,
        })
    return rows
