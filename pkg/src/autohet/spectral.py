"""Joint spectral amplitudes of filtered cavity-enhanced SPDC photon pairs.

All frequencies handled here are angular (rad/s) offsets from a common
optical reference: signal and idler offsets are measured from the same
reference frequency and the pump (sum-frequency) offset from twice it, so that
``omega_plus = omega_s + omega_i`` and ``omega_minus = omega_s - omega_i`` hold
for the offsets too.  Conversion from ordinary frequency (Hz) happens at the
configuration boundary (see :mod:`autohet.config`).

Amplitudes live on one of two uniform grids:

* :class:`FrequencyGrid` in sum/difference coordinates ``(omega_plus,
  omega_minus)``.  For a monochromatic pump the sum axis collapses to the
  single pump frequency and the energy-conservation delta is integrated out,
  leaving a vector over ``omega_minus``.
* :class:`SignalIdlerGrid` in ``(omega_s, omega_i)``, used for Schmidt
  decompositions.

Every builder returns an amplitude with unit L2 norm under the grid's own
measure, ``sum(|f|^2) * d(omega_1) * d(omega_2)`` (``d(omega_minus)`` only for
cw amplitudes).  Raw power fractions that the normalization hides are kept in
``metadata``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import psi
from scipy.signal import czt

from .errors import ConfigurationError

TWO_PI = 2.0 * math.pi

# above this many comb terms the mode sum is evaluated with digamma functions
_DIRECT_SUM_LIMIT = 64

SIGN_CONVENTION = "f = symmetric - antisymmetric"


# ---------------------------------------------------------------------------
# Parameter types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeCombSpec:
    """A comb of Lorentzian cavity modes.

    ``center_frequency`` is the angular frequency of mode 0, ``linewidth``
    the angular intensity FWHM of each mode and ``free_spectral_range`` the
    angular mode spacing.  Modes ``m_min..m_max`` (inclusive) are summed.
    """

    center_frequency: float
    linewidth: float
    free_spectral_range: float
    mode_index_range: tuple = (0, 0)

    def __post_init__(self):
        m_min, m_max = (int(m) for m in self.mode_index_range)
        object.__setattr__(self, "mode_index_range", (m_min, m_max))
        if not self.linewidth > 0:
            raise ConfigurationError(f"linewidth must be positive, got {self.linewidth}")
        if not self.free_spectral_range > 0:
            raise ConfigurationError(
                f"free spectral range must be positive, got {self.free_spectral_range}")
        if not m_min <= 0 <= m_max:
            raise ConfigurationError(
                f"mode index range must bracket 0, got {self.mode_index_range}")

    @classmethod
    def from_hz(cls, center_hz, linewidth_hz, fsr_hz, mode_index_range=(0, 0)):
        return cls(TWO_PI * center_hz, TWO_PI * linewidth_hz, TWO_PI * fsr_hz,
                   tuple(mode_index_range))

    @property
    def n_modes(self):
        return self.mode_index_range[1] - self.mode_index_range[0] + 1

    def covered_band(self):
        """Angular interval spanned by the summed modes, half an FSR beyond each end."""
        m_min, m_max = self.mode_index_range
        fsr = self.free_spectral_range
        return (self.center_frequency + (m_min - 0.5) * fsr,
                self.center_frequency + (m_max + 0.5) * fsr)


@dataclass(frozen=True)
class Monochromatic:
    """Ideal single-frequency pump at angular frequency ``frequency``."""

    frequency: float = 0.0


@dataclass(frozen=True)
class GaussianPulse:
    """Pulsed pump with Gaussian field amplitude ``exp(-(w - center)^2 / (2 sigma^2))``."""

    center: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"pump sigma must be positive, got {self.sigma}")

    def amplitude(self, omega_plus):
        return np.exp(-((omega_plus - self.center) ** 2) / (2.0 * self.sigma ** 2))


PumpSpectrum = Union[Monochromatic, GaussianPulse]


@dataclass(frozen=True)
class FlatPhaseMatching:
    """Constant phase matching, for analytic checks."""

    def amplitude(self, omega_s, omega_i):
        return np.ones(np.broadcast(omega_s, omega_i).shape)


@dataclass(frozen=True)
class GaussianPhaseMatching:
    """Gaussian phase-matching envelope.

    The envelope depends on the signal-idler detuning only.  ``fwhm`` is the
    intensity FWHM in single-photon detuning ``(omega_minus - center) / 2``,
    i.e. the down-converted photon bandwidth; along ``omega_minus`` the
    intensity FWHM is ``2 * fwhm``.
    """

    fwhm: float = TWO_PI * 150e9
    center: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ConfigurationError(f"phase-matching FWHM must be positive, got {self.fwhm}")

    def amplitude(self, omega_s, omega_i):
        detuning = 0.5 * (omega_s - omega_i - self.center)
        return np.exp(-2.0 * math.log(2.0) * (detuning / self.fwhm) ** 2)


PhaseMatchingEnvelope = Union[FlatPhaseMatching, GaussianPhaseMatching]


def default_mode_range(pm, fsr, factor=3.0):
    """Mode range covering ``factor`` phase-matching FWHMs on each side."""
    if isinstance(pm, GaussianPhaseMatching):
        m = int(math.ceil(factor * pm.fwhm / fsr))
        return (-m, m)
    return (0, 0)


# ---------------------------------------------------------------------------
# Grids and amplitudes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    """Uniform axis of ``n_points`` samples spanning ``span`` around ``center``.

    Samples are placed at ``center + (k - (n - 1) / 2) * spacing`` so an axis
    centred on zero is exactly mirror symmetric.
    """

    center: float
    span: float
    n_points: int

    def __post_init__(self):
        object.__setattr__(self, "n_points", int(self.n_points))
        if self.n_points < 1:
            raise ConfigurationError("an axis needs at least one point")
        if self.n_points > 1 and not self.span > 0:
            raise ConfigurationError(f"axis span must be positive, got {self.span}")

    @property
    def spacing(self):
        if self.n_points == 1:
            return 0.0
        return self.span / (self.n_points - 1)

    @property
    def values(self):
        k = np.arange(self.n_points) - (self.n_points - 1) / 2.0
        return self.center + k * self.spacing

    @property
    def is_symmetric(self):
        return self.n_points > 1 and abs(self.center) <= 1e-9 * self.spacing


def _is_power_of_two(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FrequencyGrid:
    """Sum/difference frequency grid.

    With ``cw_collapsed`` the sum axis holds the single pump frequency and
    amplitudes are vectors over the difference axis.
    """

    sum_axis: Axis
    diff_axis: Axis
    cw_collapsed: bool = False

    def __post_init__(self):
        if self.cw_collapsed:
            if self.sum_axis.n_points != 1:
                raise ConfigurationError("a cw-collapsed grid has a single sum-frequency point")
            axes = [self.diff_axis]
        else:
            axes = [self.sum_axis, self.diff_axis]
        for ax in axes:
            if not _is_power_of_two(ax.n_points):
                raise ConfigurationError(
                    f"frequency axes need a power-of-two number of points, got {ax.n_points}")

    convention = "sum_diff"

    @classmethod
    def cw(cls, pump_frequency, diff_span, n_points=2 ** 14, diff_center=0.0):
        return cls(Axis(pump_frequency, 0.0, 1), Axis(diff_center, diff_span, n_points), True)

    @property
    def shape(self):
        if self.cw_collapsed:
            return (self.diff_axis.n_points,)
        return (self.sum_axis.n_points, self.diff_axis.n_points)

    @property
    def cell(self):
        if self.cw_collapsed:
            return self.diff_axis.spacing
        return self.sum_axis.spacing * self.diff_axis.spacing

    def signal_idler_mesh(self):
        """Signal and idler angular frequencies at every grid sample."""
        wm = self.diff_axis.values
        if self.cw_collapsed:
            wp = self.sum_axis.center
            return 0.5 * (wp + wm), 0.5 * (wp - wm)
        wp = self.sum_axis.values[:, None]
        wm = wm[None, :]
        return 0.5 * (wp + wm), 0.5 * (wp - wm)

    def sum_diff_mesh(self):
        if self.cw_collapsed:
            wm = self.diff_axis.values
            return np.full_like(wm, self.sum_axis.center), wm
        return self.sum_axis.values[:, None], self.diff_axis.values[None, :]


@dataclass(frozen=True)
class SignalIdlerGrid:
    """Grid in ``(omega_s, omega_i)``; first array index is the signal."""

    signal_axis: Axis
    idler_axis: Axis

    def __post_init__(self):
        for ax in (self.signal_axis, self.idler_axis):
            if not _is_power_of_two(ax.n_points):
                raise ConfigurationError(
                    f"frequency axes need a power-of-two number of points, got {ax.n_points}")

    convention = "signal_idler"
    cw_collapsed = False

    @property
    def shape(self):
        return (self.signal_axis.n_points, self.idler_axis.n_points)

    @property
    def cell(self):
        return self.signal_axis.spacing * self.idler_axis.spacing

    def signal_idler_mesh(self):
        return self.signal_axis.values[:, None], self.idler_axis.values[None, :]

    def sum_diff_mesh(self):
        ws, wi = self.signal_idler_mesh()
        return ws + wi, ws - wi


Grid = Union[FrequencyGrid, SignalIdlerGrid]


@dataclass(frozen=True)
class JointSpectralAmplitude:
    """Complex two-photon amplitude sampled on a grid.

    ``values`` is read-only.  ``metadata`` records builder parameters and any
    raw (pre-normalization) power bookkeeping.
    """

    grid: Grid
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ConfigurationError(
                f"values of shape {values.shape} do not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("joint spectral amplitude has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def coordinate_convention(self):
        return self.grid.convention

    @property
    def is_cw(self):
        return bool(self.grid.cw_collapsed)

    def norm(self):
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.cell)

    def normalized(self, **extra_metadata):
        n = self.norm()
        if n == 0:
            raise ConfigurationError("cannot normalize an all-zero amplitude")
        meta = dict(self.metadata)
        meta.update(extra_metadata)
        return JointSpectralAmplitude(self.grid, self.values / n, meta)

    def intensity(self):
        return np.abs(self.values) ** 2

    def with_values(self, values, **extra_metadata):
        meta = dict(self.metadata)
        meta.update(extra_metadata)
        return JointSpectralAmplitude(self.grid, values, meta)


@dataclass(frozen=True)
class SymmetryParts:
    """Exchange-symmetric and -antisymmetric parts on the input's grid.

    Following the mirrored-argument-first convention, the input is recovered
    as ``symmetric - antisymmetric``.
    """

    symmetric: JointSpectralAmplitude
    antisymmetric: JointSpectralAmplitude
    sign_convention: str = SIGN_CONVENTION

    def reconstruct(self):
        return self.symmetric.values - self.antisymmetric.values


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def cavity_comb_amplitude(omega, spec):
    """Amplitude response of a Lorentzian mode comb.

    Returns ``sum_m sqrt(gamma / 2 pi) / (gamma / 2 + i (w0 + m FSR - omega))``
    over ``spec.mode_index_range``.  Long comb sums are evaluated in closed form
    with digamma functions, short ones term by term in ascending ``m``.
    """
    omega = np.asarray(omega, dtype=float)
    gamma = spec.linewidth
    fsr = spec.free_spectral_range
    m_min, m_max = spec.mode_index_range
    if spec.n_modes <= _DIRECT_SUM_LIMIT:
        total = np.zeros(omega.shape, dtype=complex)
        for m in range(m_min, m_max + 1):
            total += 1.0 / (0.5 * gamma + 1j * ((spec.center_frequency + m * fsr) - omega))
    else:
        # gamma/2 + i(w0 + m F - w) = iF (m + z)
        z = (spec.center_frequency - omega) / fsr - 0.5j * gamma / fsr
        total = (psi(z + (m_max + 1)) - psi(z + m_min)) / (1j * fsr)
    return math.sqrt(gamma / TWO_PI) * total


def filter_transmission(omega, spec):
    """Comb amplitude rescaled so that a single on-resonance mode transmits 1."""
    return cavity_comb_amplitude(omega, spec) * math.sqrt(math.pi * spec.linewidth / 2.0)


def default_cw_grid(omega_minus0, gamma, n_points=2 ** 14, pump_frequency=0.0):
    """Difference-frequency grid of span ``max(10 |w-0|, 100 gamma)``, centred on 0."""
    span = max(10.0 * abs(omega_minus0), 100.0 * gamma)
    return FrequencyGrid.cw(pump_frequency, span, n_points)


def _truncation_loss(weight, omega_s, omega_i, signal, idler):
    lo_s, hi_s = signal.covered_band()
    lo_i, hi_i = idler.covered_band()
    outside = ((omega_s < lo_s) | (omega_s > hi_s)) | ((omega_i < lo_i) | (omega_i > hi_i))
    outside = np.broadcast_to(outside, weight.shape)
    total = float(np.sum(weight))
    if total == 0:
        return 0.0
    return float(np.sum(weight[outside])) / total


def build_cespdc_jsa(pump, signal, idler, pm=None, grid=None):
    """Cavity-enhanced SPDC amplitude ``alpha(w+) F(ws, wi) A_s(ws) A_i(wi)``.

    A :class:`Monochromatic` pump requires a cw-collapsed :class:`FrequencyGrid`;
    the energy-conservation delta is integrated out so only the difference
    axis is sampled.  A :class:`GaussianPulse` pump needs a two-dimensional
    grid in either coordinate system.

    ``metadata['truncation_loss']`` is the fraction of phase-matching weighted
    power on the grid that falls outside the summed mode ranges; above 1 % a
    message is appended to ``metadata['warnings']``.
    """
    pm = pm if pm is not None else GaussianPhaseMatching()
    if grid is None:
        if not isinstance(pump, Monochromatic):
            raise ConfigurationError("a pulsed pump needs an explicit two-dimensional grid")
        grid = default_cw_grid(signal.center_frequency - idler.center_frequency,
                               max(signal.linewidth, idler.linewidth),
                               pump_frequency=pump.frequency)

    if isinstance(pump, Monochromatic):
        if not (isinstance(grid, FrequencyGrid) and grid.cw_collapsed):
            raise ConfigurationError("a monochromatic pump needs a cw-collapsed sum/difference grid")
        if abs(grid.sum_axis.center - pump.frequency) > 0:
            grid = FrequencyGrid.cw(pump.frequency, grid.diff_axis.span,
                                    grid.diff_axis.n_points, grid.diff_axis.center)
        pump_weight = 1.0
        diff_span = grid.diff_axis.span
    elif isinstance(pump, GaussianPulse):
        if grid.cw_collapsed:
            raise ConfigurationError("a pulsed pump needs a two-dimensional grid")
        wp, _ = grid.sum_diff_mesh()
        pump_weight = pump.amplitude(wp)
        if isinstance(grid, FrequencyGrid):
            diff_span = grid.diff_axis.span
        else:
            diff_span = min(grid.signal_axis.span, grid.idler_axis.span) * 2.0
    else:
        raise ConfigurationError(f"unknown pump type {type(pump).__name__}")

    gamma = max(signal.linewidth, idler.linewidth)
    if diff_span < 4.0 * gamma:
        raise ConfigurationError(
            f"difference-frequency span {diff_span:.4g} rad/s is narrower than 4 linewidths")

    ws, wi = grid.signal_idler_mesh()
    envelope = pm.amplitude(ws, wi) * pump_weight
    values = envelope * cavity_comb_amplitude(ws, signal) * cavity_comb_amplitude(wi, idler)

    loss = _truncation_loss(np.abs(np.broadcast_to(envelope, values.shape)) ** 2,
                            ws, wi, signal, idler)
    warnings = []
    if loss > 0.01:
        warnings.append(f"mode-range truncation discards {100 * loss:.2f}% of the "
                        "phase-matching weighted power")
    meta = {
        "builder": "build_cespdc_jsa",
        "pump": _describe(pump),
        "signal": _describe(signal),
        "idler": _describe(idler),
        "phase_matching": _describe(pm),
        "truncation_loss": loss,
        "warnings": warnings,
    }
    return JointSpectralAmplitude(grid, values, meta).normalized()


def apply_fp_filters(jsa, filter_s, filter_i):
    """Multiply by the signal and idler filter-comb responses and renormalize.

    The filters are scaled to unit peak transmission, so
    ``metadata['transmitted_fraction']`` is the pair power surviving both filters.
    """
    ws, wi = jsa.grid.signal_idler_mesh()
    filtered = jsa.values * filter_transmission(ws, filter_s) * filter_transmission(wi, filter_i)
    before = float(np.sum(np.abs(jsa.values) ** 2))
    after = float(np.sum(np.abs(filtered) ** 2))
    out = jsa.with_values(filtered, transmitted_fraction=after / before,
                          filters={"signal": _describe(filter_s), "idler": _describe(filter_i)})
    return out.normalized()


def single_mode_lorentzian_g(omega_minus_axis, gamma, omega_minus0):
    """Single mode-pair difference amplitude ``g ~ 1 / (gamma^2 + (w-0 - w-)^2)``."""
    if not gamma > 0:
        raise ConfigurationError(f"linewidth must be positive, got {gamma}")
    if omega_minus_axis.span < 4.0 * gamma:
        raise ConfigurationError("difference-frequency span is narrower than 4 linewidths")
    grid = FrequencyGrid(Axis(0.0, 0.0, 1), omega_minus_axis, cw_collapsed=True)
    u = omega_minus0 - omega_minus_axis.values
    values = 1.0 / (gamma ** 2 + u ** 2)
    meta = {"builder": "single_mode_lorentzian_g", "gamma": gamma, "omega_minus0": omega_minus0}
    return JointSpectralAmplitude(grid, values, meta).normalized()


def add_mode_pair(jsa, omega_minus, gamma, relative_amplitude):
    """Coherently add a Lorentzian mode pair at difference frequency ``omega_minus``.

    The added line has peak amplitude ``relative_amplitude`` times the current
    peak amplitude.  cw amplitudes only.
    """
    if not jsa.is_cw:
        raise ConfigurationError("mode-pair injection is defined for cw amplitudes only")
    wm = jsa.grid.diff_axis.values
    line = gamma ** 2 / (gamma ** 2 + (omega_minus - wm) ** 2)
    peak = float(np.max(np.abs(jsa.values)))
    added = jsa.values + relative_amplitude * peak * line
    injected = list(jsa.metadata.get("injected_pairs", []))
    injected.append({"omega_minus": omega_minus, "gamma": gamma,
                     "relative_amplitude": relative_amplitude})
    return jsa.with_values(added, injected_pairs=injected).normalized()


def decompose_symmetry(jsa):
    """Split a sum/difference amplitude into exchange-symmetric and -antisymmetric parts.

    ``antisymmetric(w+, w-) = (f(w+, -w-) - f(w+, w-)) / 2`` and
    ``symmetric(w+, w-) = (f(w+, -w-) + f(w+, w-)) / 2``.  The difference axis
    must be mirror symmetric about zero.
    """
    if jsa.coordinate_convention != "sum_diff":
        raise ConfigurationError("symmetry decomposition needs sum/difference coordinates")
    if not jsa.grid.diff_axis.is_symmetric:
        raise ConfigurationError("difference axis must be symmetric about zero")
    f = jsa.values
    mirrored = f[..., ::-1]
    anti = 0.5 * (mirrored - f)
    sym = 0.5 * (mirrored + f)
    meta = {"sign_convention": SIGN_CONVENTION}
    return SymmetryParts(jsa.with_values(sym, part="symmetric", **meta),
                         jsa.with_values(anti, part="antisymmetric", **meta))


# ---------------------------------------------------------------------------
# Joint temporal amplitude
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JointTemporalAmplitude:
    """Fourier transform of a JSA with kernel ``exp(-i w t)``.

    For sum/difference grids the axes are ``(t_plus, t_minus)`` and the kernel
    is ``exp(-i (w+ t+ + w- t-) / 2)``.  ``natural`` marks the DFT-conjugate
    time grid, on which :func:`jsa_from_jta` inverts exactly.
    """

    t_axes: tuple
    values: np.ndarray
    source_grid: Grid
    convention: str
    natural: bool = True


def _kernel_scale(convention):
    return 0.5 if convention == "sum_diff" else 1.0


def natural_time_axis(omega_axis, scale):
    n = omega_axis.n_points
    dt = TWO_PI / (n * omega_axis.spacing * scale)
    return Axis(0.0 if n % 2 == 1 else -0.5 * dt, (n - 1) * dt, n)


def _time_values(axis, n):
    return (np.arange(n) - n // 2) * axis


def fourier_along(values, axis, omega_axis, t, scale, weights=None):
    """``sum_k w_k f_k exp(-i scale w_k t_j) dw`` along ``axis`` for uniform ``t``.

    ``t`` is a 1-D uniform array.  Evaluated with the chirp-z transform so the
    output grid is independent of the input sampling.
    """
    values = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    n = values.shape[-1]
    h = omega_axis.spacing
    w_first = omega_axis.values[0]
    if weights is not None:
        values = values * weights
    t = np.asarray(t, dtype=float)
    m = t.size
    if m == 1:
        dt = 0.0
    else:
        dt = (t[-1] - t[0]) / (m - 1)
    a = np.exp(1j * scale * h * t[0])
    w = np.exp(-1j * scale * h * dt)
    out = czt(values, m=m, w=w, a=a, axis=-1)
    out = out * np.exp(-1j * scale * w_first * t) * h
    return np.moveaxis(out, -1, axis)


def jta_from_jsa(jsa, t_axes=None):
    """Joint temporal amplitude of ``jsa``.

    Without ``t_axes`` the DFT-conjugate grid is used and the transform is a
    plain FFT (rectangle rule) that :func:`jsa_from_jta` undoes to rounding
    error.  ``t_axes`` (one :class:`Axis` per frequency axis) selects an
    arbitrary uniform time grid instead.
    """
    conv = jsa.coordinate_convention
    scale = _kernel_scale(conv)
    omega_axes = _omega_axes(jsa)
    jacobian = 0.5 if (conv == "sum_diff" and not jsa.is_cw) else 1.0
    values = jsa.values * jacobian
    if t_axes is None:
        out = values
        axes = []
        for k, ax in enumerate(omega_axes):
            tax = natural_time_axis(ax, scale)
            axes.append(tax)
            out = _dft_forward(out, k, ax, tax, scale)
        return JointTemporalAmplitude(tuple(axes), out, jsa.grid, conv, natural=True)
    out = values
    for k, (ax, tax) in enumerate(zip(omega_axes, t_axes)):
        out = fourier_along(out, k, ax, tax.values, scale)
    return JointTemporalAmplitude(tuple(t_axes), out, jsa.grid, conv, natural=False)


def jsa_from_jta(jta):
    """Invert :func:`jta_from_jsa` on its natural time grid."""
    if not jta.natural:
        raise ConfigurationError("exact inversion needs the DFT-conjugate time grid")
    grid = jta.source_grid
    scale = _kernel_scale(jta.convention)
    if isinstance(grid, FrequencyGrid):
        omega_axes = [grid.diff_axis] if grid.cw_collapsed else [grid.sum_axis, grid.diff_axis]
    else:
        omega_axes = [grid.signal_axis, grid.idler_axis]
    out = jta.values
    for k, (ax, tax) in enumerate(zip(omega_axes, jta.t_axes)):
        out = _dft_inverse(out, k, ax, tax, scale)
    jacobian = 0.5 if (jta.convention == "sum_diff" and not grid.cw_collapsed) else 1.0
    return JointSpectralAmplitude(grid, out / jacobian, {"builder": "jsa_from_jta"})


def _omega_axes(jsa):
    grid = jsa.grid
    if isinstance(grid, FrequencyGrid):
        return [grid.diff_axis] if grid.cw_collapsed else [grid.sum_axis, grid.diff_axis]
    return [grid.signal_axis, grid.idler_axis]


def _dft_phases(ax, tax, scale):
    n = ax.n_points
    k = np.arange(n)
    t = tax.values
    # exp(-i s (w0 + k h)(t0 + j dt)) = exp(-i s w0 t_j) exp(-i s k h t0) exp(-2 pi i k j / n)
    pre = np.exp(-1j * scale * k * ax.spacing * t[0])
    post = np.exp(-1j * scale * ax.values[0] * t) * ax.spacing
    return pre, post


def _dft_forward(values, axis, ax, tax, scale):
    pre, post = _dft_phases(ax, tax, scale)
    shape = [1] * values.ndim
    shape[axis] = -1
    out = np.fft.fft(values * pre.reshape(shape), axis=axis)
    return out * post.reshape(shape)


def _dft_inverse(values, axis, ax, tax, scale):
    pre, post = _dft_phases(ax, tax, scale)
    shape = [1] * values.ndim
    shape[axis] = -1
    out = np.fft.ifft(values / post.reshape(shape), axis=axis)
    return out / pre.reshape(shape)


# ---------------------------------------------------------------------------
# Spectral diagnostics
# ---------------------------------------------------------------------------

def fwhm(x, y):
    """Full width at half maximum of a single-peaked sampled curve.

    Half-power crossings are located by linear interpolation between samples.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    left = i
    while left > 0 and y[left] > half:
        left -= 1
    right = i
    while right < y.size - 1 and y[right] > half:
        right += 1
    if y[left] > half or y[right] > half:
        raise ValueError("curve does not fall to half maximum inside the sampled range")
    xl = x[left] + (half - y[left]) * (x[left + 1] - x[left]) / (y[left + 1] - y[left])
    xr = x[right - 1] + (half - y[right - 1]) * (x[right] - x[right - 1]) / (y[right] - y[right - 1])
    return xr - xl


def signal_marginal(jsa):
    """Signal-photon spectral intensity ``(omega_s, P(omega_s))`` of a cw amplitude."""
    if not jsa.is_cw:
        raise ConfigurationError("marginal helper expects a cw amplitude")
    ws, _ = jsa.grid.signal_idler_mesh()
    return ws, np.abs(jsa.values) ** 2


def mode_clusters(jsa, threshold_db=-6.0, gap=None):
    """Group the mode-pair peaks of a cw amplitude into clusters.

    Peaks are local maxima of ``|f|^2`` along ``omega_minus``.  Neighbouring
    peaks further apart than ``gap`` (default: ten times the median peak
    spacing) start a new cluster.  A cluster is kept when its strongest peak
    lies within ``threshold_db`` of the global maximum, and a peak counts as a
    mode of its cluster when it lies within ``threshold_db`` of that cluster's
    strongest peak.  The default of -6 dB admits mode pairs whose combined
    detuning from double resonance is below one linewidth.

    Returns a list of arrays of peak difference frequencies, one per cluster,
    ordered by frequency.
    """
    from scipy.signal import find_peaks

    if not jsa.is_cw:
        raise ConfigurationError("mode clustering expects a cw amplitude")
    intensity = np.abs(jsa.values) ** 2
    wm = jsa.grid.diff_axis.values
    peaks, _ = find_peaks(intensity)
    if peaks.size == 0:
        return []
    ratio = 10.0 ** (threshold_db / 10.0)
    global_max = intensity[peaks].max()
    # weak peaks between clusters would otherwise bridge the gaps
    peaks = peaks[intensity[peaks] >= ratio ** 2 * global_max]
    if peaks.size > 1:
        # a detuned mode pair can show two nearby maxima; keep the stronger
        spacing = np.median(np.diff(wm[peaks]))
        merged = [peaks[0]]
        for k in peaks[1:]:
            if wm[k] - wm[merged[-1]] < 0.5 * spacing:
                if intensity[k] > intensity[merged[-1]]:
                    merged[-1] = k
            else:
                merged.append(k)
        peaks = np.asarray(merged)
    if gap is None:
        spacing = np.median(np.diff(wm[peaks])) if peaks.size > 1 else np.inf
        gap = 10.0 * spacing
    breaks = np.flatnonzero(np.diff(wm[peaks]) > gap) + 1
    clusters = []
    for group in np.split(peaks, breaks):
        top = intensity[group].max()
        if top < ratio * global_max:
            continue
        members = group[intensity[group] >= ratio * top]
        clusters.append(wm[members])
    return clusters


def _describe(obj):
    """Plain-dict description of a parameter dataclass, for provenance."""
    if obj is None:
        return None
    d = {"type": type(obj).__name__}
    for name in getattr(obj, "__dataclass_fields__", {}):
        v = getattr(obj, name)
        d[name] = list(v) if isinstance(v, tuple) else v
    return d
