"""Second-order correlations behind a 50:50 beamsplitter, and their spectra.

For a two-photon amplitude ``f(w+, w-)`` the coincidence rate between
beamsplitter outputs kappa, mu at times ``t, t'`` is

    G2(t+, t-) = | int d2w f(w+, w-) exp(-i w+ t+ / 2) osc(w- t- / 2) |^2

with ``t+- = t +- t'`` and ``osc = i sin`` for opposite outputs (CD),
``cos / sqrt(2)`` for the same output (CC, DD) and ``exp(-i .)`` for the
unmixed detectors (AB).  Writing ``U(t+, t-)`` for the AB transform, all four
follow from ``U`` and its mirror image in ``t-``:

    CD = |(U(-t-) - U(t-)) / 2|^2
    CC = DD = |(U(-t-) + U(t-)) / 2|^2 / 2
    AB = |U|^2

No absolute rate scale is implied.  For the normalized single-mode cw
amplitude the transforms equal ``2 pi gamma`` times the closed forms of
:func:`g2_closed_form_cw` (see :func:`cw_lorentzian_scale`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .spectral import (Axis, FrequencyGrid, JointSpectralAmplitude, SignalIdlerGrid,
                       fourier_along)

TWO_PI = 2.0 * math.pi
CHANNEL_PAIRS = ("CC", "DD", "CD", "AB")


@dataclass(frozen=True)
class CorrelationGrid:
    """Time grid for G2: ``t-`` symmetric about zero, ``t+`` absent for cw."""

    diff_axis: Axis
    sum_axis: Optional[Axis] = None

    def __post_init__(self):
        if self.diff_axis.n_points < 2 or not self.diff_axis.is_symmetric:
            raise ConfigurationError("the t- axis must be symmetric about zero")
        if self.sum_axis is not None and self.sum_axis.n_points < 1:
            raise ConfigurationError("empty t+ axis")

    @property
    def cw_collapsed(self):
        return self.sum_axis is None

    @classmethod
    def cw(cls, half_span, n_points):
        return cls(Axis(0.0, 2.0 * half_span, n_points))

    @classmethod
    def cw_from_step(cls, step, half_span):
        """Symmetric t- grid with spacing ``step`` covering at least ``+-half_span``."""
        n_half = int(math.ceil(half_span / step))
        return cls(Axis(0.0, 2 * n_half * step, 2 * n_half + 1))

    @property
    def shape(self):
        if self.cw_collapsed:
            return (self.diff_axis.n_points,)
        return (self.sum_axis.n_points, self.diff_axis.n_points)


@dataclass(frozen=True)
class G2Surface:
    """G2 for one channel pair; a trace over ``t-`` when the grid is cw."""

    channel_pair: str
    values: np.ndarray
    grid: CorrelationGrid
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("G2 has non-finite entries")
        if np.any(values < 0):
            raise ConfigurationError("G2 must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def t_minus(self):
        return self.grid.diff_axis.values


@dataclass(frozen=True)
class PsdSpectrum:
    """Power spectrum ``|FT|^2`` with frequency axes in Hz.

    ``frequency`` belongs to the last data axis (``t-``); ``frequency_plus`` to
    the first axis of two-dimensional spectra.
    """

    frequency: np.ndarray
    values: np.ndarray
    window: str = "rect"
    normalization: str = "|sum y w dt|^2"
    frequency_plus: Optional[np.ndarray] = None

    @property
    def resolution(self):
        return float(self.frequency[1] - self.frequency[0])


def cw_lorentzian_scale(gamma):
    """Ratio of :func:`g2_from_jsa` output to the closed forms for a normalized cw Lorentzian."""
    return TWO_PI * gamma


def support_max_abs(axis_values, intensity, rel=1e-6):
    """Largest ``|w|`` where ``intensity >= rel * max(intensity)``."""
    mask = intensity >= rel * intensity.max()
    return float(np.max(np.abs(axis_values[mask])))


def _trapezoid_weights(n):
    w = np.ones(n)
    if n > 1:
        w[0] = w[-1] = 0.5
    return w


def ab_transform(jsa, grid):
    """``U(t+, t-) = int d2w f exp(-i (w+ t+ + w- t-) / 2)`` by trapezoid rule.

    Evaluated with the chirp-z transform along each frequency axis.
    """
    if jsa.coordinate_convention != "sum_diff":
        raise ConfigurationError("G2 transforms need sum/difference coordinates")
    if jsa.is_cw != grid.cw_collapsed:
        raise ConfigurationError("cw amplitudes need a cw correlation grid and vice versa")
    fg = jsa.grid
    dax = fg.diff_axis
    intensity = np.abs(jsa.values) ** 2
    marginal = intensity if jsa.is_cw else intensity.sum(axis=0)
    w_max = support_max_abs(dax.values, marginal)
    dt = grid.diff_axis.spacing
    if w_max > 0 and dt > math.pi / w_max:
        raise ConfigurationError(
            f"t- spacing {dt:.4g} s under-resolves difference frequencies up to "
            f"{w_max / TWO_PI:.4g} Hz (needs <= {math.pi / w_max:.4g} s)")
    u = fourier_along(jsa.values, jsa.values.ndim - 1, dax, grid.diff_axis.values, 0.5,
                      weights=_trapezoid_weights(dax.n_points))
    if not jsa.is_cw:
        sax = fg.sum_axis
        u = fourier_along(u, 0, sax, grid.sum_axis.values, 0.5,
                          weights=_trapezoid_weights(sax.n_points))
    return u


def g2_all(jsa, grid):
    """G2 surfaces for all four channel pairs from a single transform."""
    u = ab_transform(jsa, grid)
    ur = u[..., ::-1]
    cd = np.abs(0.5 * (ur - u)) ** 2
    cc = 0.5 * np.abs(0.5 * (ur + u)) ** 2
    ab = np.abs(u) ** 2
    meta = {"normalization": "unit-norm amplitude, trapezoid quadrature"}
    return {
        "CC": G2Surface("CC", cc, grid, dict(meta)),
        "DD": G2Surface("DD", cc.copy(), grid, dict(meta)),
        "CD": G2Surface("CD", cd, grid, dict(meta)),
        "AB": G2Surface("AB", ab, grid, dict(meta)),
    }


def g2_from_jsa(jsa, channel_pair, grid):
    """G2 for one channel pair (``"CC"``, ``"DD"``, ``"CD"`` or ``"AB"``)."""
    if channel_pair not in CHANNEL_PAIRS:
        raise ConfigurationError(f"unknown channel pair {channel_pair!r}")
    return g2_all(jsa, grid)[channel_pair]


def g2_closed_form_cw(gamma, omega_minus0, channel_pair, t_minus):
    """Closed-form cw G2 of a single Lorentzian mode pair, unit envelope at ``t- = 0``.

    ``CD = exp(-gamma|t|)(1 - cos w0 t)/2``, ``CC = DD = exp(-gamma|t|)(1 + cos w0 t)/4``,
    ``AB = exp(-gamma|t|)``.  Multiply by :func:`cw_lorentzian_scale` to compare
    with :func:`g2_from_jsa` on a normalized amplitude.
    """
    t = np.asarray(t_minus, dtype=float)
    env = np.exp(-gamma * np.abs(t))
    c = np.cos(omega_minus0 * t)
    if channel_pair == "CD":
        return env * (1.0 - c) / 2.0
    if channel_pair in ("CC", "DD"):
        return 0.5 * env * (1.0 + c) / 2.0
    if channel_pair == "AB":
        return env
    raise ConfigurationError(f"unknown channel pair {channel_pair!r}")


def pulsed_time_center(jsa):
    """Default ``t+`` centre of a pulsed amplitude: twice its power-weighted group delay.

    With the kernel ``exp(-i w t)`` a spectral phase slope ``d(arg f)/dw+``
    delays both photons by that amount, which shifts ``t+`` by twice it.
    """
    if jsa.is_cw or jsa.coordinate_convention != "sum_diff":
        raise ConfigurationError("group delay is defined for pulsed sum/difference amplitudes")
    f = jsa.values
    df = np.gradient(f, jsa.grid.sum_axis.spacing, axis=0)
    slope = float(np.sum(np.imag(np.conj(f) * df)) / np.sum(np.abs(f) ** 2))
    return 2.0 * slope


def g1_output(jsa, channel, t):
    """Mean output intensity ``(G1_s(t) + G1_i(t)) / 2`` at beamsplitter output C or D.

    Signal and idler enter the beamsplitter in orthogonal ports, so each output
    sees half of each photon and no cross term survives.  cw amplitudes are
    stationary and return a constant (one pair per unit time).  Pulsed
    amplitudes must be built on a :class:`SignalIdlerGrid`; the result then
    integrates over ``t`` to one detected photon per pair and output.
    """
    if channel not in ("C", "D"):
        raise ConfigurationError(f"unknown output channel {channel!r}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if jsa.is_cw:
        return np.ones_like(t)
    if not isinstance(jsa.grid, SignalIdlerGrid):
        raise ConfigurationError("pulsed first-order intensities need a signal/idler grid")
    if t.size > 1 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0):
        raise ConfigurationError("g1_output expects a uniform time grid")
    g = jsa.grid
    es = fourier_along(jsa.values, 0, g.signal_axis, t, 1.0)
    g1_s = np.sum(np.abs(es) ** 2, axis=1) * g.idler_axis.spacing
    ei = fourier_along(jsa.values, 1, g.idler_axis, t, 1.0)
    g1_i = np.sum(np.abs(ei) ** 2, axis=0) * g.signal_axis.spacing
    return 0.5 * (g1_s + g1_i) / TWO_PI


def _window(name, n):
    if name in ("rect", "rectangular", None):
        return np.ones(n)
    if name == "hann":
        return np.hanning(n)
    raise ConfigurationError(f"unknown window {name!r}")


def psd_of_g2(g2, window="rect", n_fft=None, onesided=True):
    """``|FT|^2`` of a G2 trace along ``t-`` (both axes for 2-D surfaces).

    The transform is ``sum_k y_k w_k exp(-2 pi i f t_k) dt``; only its
    magnitude is kept, so the origin of the time axis does not matter.
    ``n_fft`` zero-pads the ``t-`` axis.
    """
    y = np.asarray(g2.values, dtype=float)
    dt = g2.grid.diff_axis.spacing
    n = y.shape[-1]
    n_fft = n_fft or n
    if n_fft < n:
        raise ConfigurationError("n_fft must be at least the trace length")
    y = y * _window(window, n)
    if onesided:
        spec = np.fft.rfft(y, n=n_fft, axis=-1) * dt
        freq = np.fft.rfftfreq(n_fft, dt)
    else:
        spec = np.fft.fftshift(np.fft.fft(y, n=n_fft, axis=-1), axes=-1) * dt
        freq = np.fft.fftshift(np.fft.fftfreq(n_fft, dt))
    freq_plus = None
    if y.ndim == 2:
        tp = g2.grid.sum_axis
        if tp.n_points > 1:
            spec = np.fft.fftshift(np.fft.fft(spec * _window(window, tp.n_points)[:, None],
                                              axis=0), axes=0) * tp.spacing
            freq_plus = np.fft.fftshift(np.fft.fftfreq(tp.n_points, tp.spacing))
    return PsdSpectrum(freq, np.abs(spec) ** 2, window or "rect",
                       "|sum y w dt|^2", freq_plus)
