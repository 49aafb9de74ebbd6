"""Correlation histograms, spectra and beat-note fits from time-tag streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .correlation import PsdSpectrum
from .errors import AmbiguityError, ConfigurationError, FitError

TWO_PI = 2.0 * math.pi

# chunk size for the all-pairs delay expansion
_CHUNK = 1 << 18


@dataclass(frozen=True)
class HistogramConfig:
    """Delay binning: bin width (s), half-range of the delay window (s) and pairing rule.

    ``pairing`` is ``"all"`` (every pair within the window) or
    ``"consecutive"`` (first stop after each start).
    """

    bin_width: float = 625e-12
    max_delay: float = 500e-9
    pairing: str = "all"

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ConfigurationError(f"bin_width must be positive, got {self.bin_width}")
        if not self.max_delay > self.bin_width:
            raise ConfigurationError("max_delay must exceed bin_width")
        if self.pairing not in ("all", "consecutive"):
            raise ConfigurationError(f"unknown pairing rule {self.pairing!r}")


@dataclass(frozen=True)
class CorrelationHistogram:
    """Delay histogram with bins centred on multiples of ``bin_width``.

    ``flagged`` marks bins that carry no information (inside the dead time
    of an auto-correlation).  ``tick_seconds`` and ``jitter_sigma_eff`` describe
    the instrument response of the delays.
    """

    delays: np.ndarray
    counts: np.ndarray
    channel_pair: str
    total_pairs: int
    bin_width: float
    flagged: Optional[np.ndarray] = None
    tick_seconds: float = 625e-12
    jitter_sigma_eff: float = 0.0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(counts < 0):
            raise ConfigurationError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=float))
        if self.flagged is None:
            object.__setattr__(self, "flagged", np.zeros(counts.size, dtype=bool))

    def merged(self, other):
        """Sum of two histograms taken with identical binning."""
        if (other.delays.shape != self.delays.shape or other.bin_width != self.bin_width
                or other.channel_pair != self.channel_pair):
            raise ConfigurationError("histograms have different binning")
        return CorrelationHistogram(self.delays, self.counts + other.counts, self.channel_pair,
                                    self.total_pairs + other.total_pairs, self.bin_width,
                                    self.flagged | other.flagged, self.tick_seconds,
                                    self.jitter_sigma_eff)


@dataclass
class BeatFitResult:
    """Outcome of :func:`fit_beat`.

    ``visibility`` is corrected for the timing response (clock quantization
    and jitter); ``visibility_raw`` is the fitted modulation depth itself.
    ``contamination_db`` maps each probe frequency (Hz, as given) to the PSD
    power near its alias relative to the main peak; ``probe_tones`` gives
    the time-domain amplitude and significance of a fringe at that alias
    (see :func:`probe_tone`).
    """

    beat_frequency: float
    psd_fwhm: float
    envelope_rate: float
    visibility: float
    contamination_db: dict
    visibility_raw: float = float("nan")
    fringe_frequency: float = float("nan")
    fringe_phase: float = float("nan")
    aliased_probes: dict = field(default_factory=dict)
    probe_tones: dict = field(default_factory=dict)
    fit_parameters: dict = field(default_factory=dict)

    @property
    def fringe_period(self):
        return TWO_PI / self.fringe_frequency if self.fringe_frequency > 0 else float("inf")

    def to_dict(self):
        return {
            "beat_frequency_hz": self.beat_frequency,
            "psd_fwhm_hz": self.psd_fwhm,
            "envelope_rate_per_s": self.envelope_rate,
            "visibility": self.visibility,
            "visibility_raw": self.visibility_raw,
            "fringe_frequency_rad_s": self.fringe_frequency,
            "fringe_period_s": self.fringe_period,
            "fringe_phase_rad": self.fringe_phase,
            "contamination_db": {repr(float(k)): v for k, v in self.contamination_db.items()},
            "aliased_probes_hz": {repr(float(k)): v for k, v in self.aliased_probes.items()},
            "probe_tones": {repr(float(k)): v for k, v in self.probe_tones.items()},
            "fit_parameters": self.fit_parameters,
        }


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------

def _bin_ticks(tags, cfg):
    tick = tags.tick_seconds
    ratio = cfg.bin_width / tick
    b = int(round(ratio))
    if b < 1 or abs(ratio - b) > 1e-6 * ratio:
        raise ConfigurationError(
            f"bin width {cfg.bin_width} s is not a whole number of {tick} s clock ticks")
    k_max = int(math.floor(cfg.max_delay / cfg.bin_width + 1e-9))
    return b, k_max


def _jitter_eff(tags, names):
    dets = tags.header.get("detectors") or {}
    total = 0.0
    for name in names:
        det = dets.get(name) or {}
        total += float(det.get("jitter_sigma", 0.0)) ** 2
    return math.sqrt(total)


def _pair_delays(ta, tb, w_ticks, strictly_after=False):
    """Yield chunks of ``tb[j] - ta[i]`` for all pairs with ``|tb - ta| <= w``."""
    ta = ta.astype(np.int64)
    tb = tb.astype(np.int64)
    if strictly_after:
        lo = np.arange(1, ta.size + 1)
    else:
        lo = np.searchsorted(tb, ta - w_ticks, side="left")
    hi = np.searchsorted(tb, ta + w_ticks, side="right")
    counts = np.maximum(hi - lo, 0)
    for s in range(0, ta.size, _CHUNK):
        c = counts[s:s + _CHUNK]
        total = int(c.sum())
        if total == 0:
            continue
        starts = np.repeat(lo[s:s + _CHUNK], c)
        first = np.repeat(np.cumsum(c) - c, c)
        j = starts + (np.arange(total) - first)
        yield tb[j] - np.repeat(ta[s:s + _CHUNK], c)


def _accumulate(delays_iter, b, k_max):
    counts = np.zeros(2 * k_max + 1, dtype=np.int64)
    total = 0
    for d in delays_iter:
        k = np.floor_divide(d + b // 2, b)
        k = k[np.abs(k) <= k_max]
        counts += np.bincount(k + k_max, minlength=counts.size)
        total += int(k.size)
    return counts, total


def cross_histogram(tags, ch_a, ch_b, cfg=HistogramConfig()):
    """Histogram of ``t_b - t_a`` between two channels.

    With the ``"all"`` rule every (a, b) pair within ``+-max_delay`` counts;
    ``"consecutive"`` keeps only the first ``b`` at or after each ``a``.
    """
    b, k_max = _bin_ticks(tags, cfg)
    ta = tags.ticks_of(ch_a)
    tb = tags.ticks_of(ch_b)
    w = k_max * b + b // 2
    if cfg.pairing == "all":
        it = _pair_delays(ta, tb, w)
    else:
        j = np.searchsorted(tb, ta, side="left")
        ok = j < tb.size
        d = tb[j[ok]].astype(np.int64) - ta[ok].astype(np.int64)
        it = iter([d[d <= w]])
    counts, total = _accumulate(it, b, k_max)
    delays = np.arange(-k_max, k_max + 1) * cfg.bin_width
    na = tags.header["channel_names"][tags.channel_index(ch_a)]
    nb = tags.header["channel_names"][tags.channel_index(ch_b)]
    return CorrelationHistogram(delays, counts, f"{na}{nb}", total, cfg.bin_width,
                                tick_seconds=tags.tick_seconds,
                                jitter_sigma_eff=_jitter_eff(tags, (na, nb)))


def auto_histogram(tags, ch, cfg=HistogramConfig(), dead_time=None):
    """Histogram of delays between distinct tags of one channel, both signs.

    Bins with ``|t| < dead_time`` are flagged; the dead time defaults to the
    detector entry in the stream header.
    """
    b, k_max = _bin_ticks(tags, cfg)
    t = tags.ticks_of(ch)
    name = tags.header["channel_names"][tags.channel_index(ch)]
    w = k_max * b + b // 2
    if cfg.pairing == "all":
        it = _pair_delays(t, t, w, strictly_after=True)
    else:
        d = np.diff(t.astype(np.int64))
        it = iter([d[d <= w]])
    half, total = _accumulate(it, b, k_max)
    counts = half + half[::-1]
    counts[k_max] = 2 * half[k_max]
    if dead_time is None:
        det = (tags.header.get("detectors") or {}).get(name) or {}
        dead_time = float(det.get("dead_time", 0.0))
    delays = np.arange(-k_max, k_max + 1) * cfg.bin_width
    flagged = np.abs(delays) < dead_time
    return CorrelationHistogram(delays, counts, f"{name}{name}", 2 * total, cfg.bin_width,
                                flagged=flagged, tick_seconds=tags.tick_seconds,
                                jitter_sigma_eff=_jitter_eff(tags, (name, name)))


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

def _fill_flagged(y, flagged):
    if flagged is None or not flagged.any():
        return y
    if flagged.all():
        raise FitError("every histogram bin is flagged")
    y = y.copy()
    edges = np.flatnonzero(np.diff(np.concatenate(([0], flagged.astype(np.int8), [0]))))
    for lo, hi in zip(edges[0::2], edges[1::2]):
        w = max(4, (hi - lo) // 4)
        left = y[max(lo - w, 0):lo][~flagged[max(lo - w, 0):lo]]
        right = y[hi:hi + w][~flagged[hi:hi + w]]
        a = left.mean() if left.size else right.mean()
        b = right.mean() if right.size else a
        y[lo:hi] = np.linspace(a, b, hi - lo)
    return y


def _window(n, window):
    if window in ("rect", "rectangular", None):
        w = np.ones(n)
    elif window == "hann":
        w = np.hanning(n)
    else:
        raise ConfigurationError(f"unknown window {window!r}")
    return w / w.mean()


def psd_estimate(hist, window="hann", pad_factor=4):
    """``|FT|^2`` of the count sequence up to the Nyquist frequency ``1 / (2 bin)``.

    The window is scaled to unit mean so the dc term keeps the total count.
    Each run of flagged bins is bridged linearly between the mean levels just
    outside it, so the gap adds no sharp edge to the transform.  ``pad_factor`` zero-pads for a finer frequency grid; the
    underlying resolution stays ``1 / (N bin)``.
    """
    y = _fill_flagged(hist.counts.astype(float), hist.flagged)
    n = y.size
    w = _window(n, window)
    n_fft = 1 << int(math.ceil(math.log2(n * max(1, int(pad_factor)))))
    spec = np.fft.rfft(y * w, n=n_fft)
    freq = np.fft.rfftfreq(n_fft, hist.bin_width)
    return PsdSpectrum(freq, np.abs(spec) ** 2, window or "rect",
                       "|sum counts w|^2, mean(w) = 1")


def alias_frequency(f, sample_rate):
    """Apparent frequency of a tone at ``f`` sampled at ``sample_rate`` (all Hz)."""
    if not (np.all(np.asarray(f) >= 0) and sample_rate > 0):
        raise ConfigurationError("frequencies must be non-negative and the sample rate positive")
    return np.abs(f - sample_rate * np.round(np.asarray(f) / sample_rate))


def resolution_report(bin_width, window=None, stream_duration=None):
    """Frequency resolution and range of a delay histogram.

    The resolution is ``1 / (2 window)`` for a histogram spanning
    ``+-window``; without a window the acquisition span is used instead.  The
    range is the Nyquist frequency ``1 / (2 bin_width)``.
    """
    if not bin_width > 0:
        raise ConfigurationError("bin_width must be positive")
    span = window if window is not None else stream_duration
    if span is None or not span > 0:
        raise ConfigurationError("need a positive delay window or stream duration")
    return {
        "frequency_resolution_hz": 1.0 / (2.0 * span),
        "max_frequency_hz": 1.0 / (2.0 * bin_width),
        "note": ("the difference-frequency range grows as the inverse timing resolution; "
                 "few-ps detection reaches about 100 GHz"),
    }


def response_factor(omega, tick, bin_width, jitter_sigma_eff):
    """Amplitude transfer of a delay fringe at ``omega`` through the timing chain.

    Flooring both timestamps to the clock turns each delay into a triangular
    spread over +-1 tick (``sinc^2``); Gaussian jitter contributes
    ``exp(-omega^2 sigma^2 / 2)``; bins wider than one tick average
    ``bin / tick`` integer delays.
    """
    f = omega / TWO_PI
    h = np.sinc(f * tick) ** 2 * math.exp(-0.5 * (omega * jitter_sigma_eff) ** 2)
    b = int(round(bin_width / tick))
    if b > 1:
        x = math.pi * f * tick
        h *= abs(math.sin(b * x) / (b * math.sin(x))) if math.sin(x) != 0 else 1.0
    return float(h)


# ---------------------------------------------------------------------------
# Beat fitting
# ---------------------------------------------------------------------------

def _dc_edge(values):
    """Index of the first local minimum, where the dc lobe ends."""
    d = np.diff(values)
    rising = np.flatnonzero(d > 0)
    return int(rising[0]) if rising.size else values.size - 1


def find_beat_peak(psd, prominence=0.05, min_ratio=20.0, tie_db=3.0, min_frequency=0.0):
    """Dominant non-dc PSD peak.

    Peaks are local maxima beyond the dc lobe (and at or above
    ``min_frequency``) with prominence of at least
    ``prominence`` times the strongest one.  The strongest must exceed the
    median spectral level by ``min_ratio``; another peak within ``tie_db`` of
    it raises :class:`AmbiguityError`.
    """
    p = psd.values
    start = max(_dc_edge(p), int(np.searchsorted(psd.frequency, min_frequency)))
    region = p[start:]
    if region.size < 3:
        raise FitError("spectrum has no content beyond the dc lobe")
    top = region.max()
    peaks, _ = find_peaks(region, prominence=prominence * top)
    if peaks.size == 0:
        raise FitError("no spectral peak beyond the dc lobe")
    peaks = peaks + start
    heights = p[peaks]
    order = np.argsort(heights)[::-1]
    best = peaks[order[0]]
    floor = float(np.median(region))
    if not p[best] > min_ratio * floor:
        raise FitError(f"no dominant beat peak: strongest is {p[best] / floor:.3g}x the median level")
    rivals = [int(k) for k in peaks[order[1:]] if p[k] >= p[best] * 10 ** (-tie_db / 10)]
    if rivals:
        cands = [(float(psd.frequency[k]), float(10 * np.log10(p[k] / p[best])))
                 for k in [best] + rivals]
        raise AmbiguityError(
            "several comparable beat peaks: " + ", ".join(f"{f / 1e6:.3f} MHz ({db:+.2f} dB)"
                                                         for f, db in cands), cands)
    return int(best)


def _half_power_region(p, k):
    half = 0.5 * p[k]
    lo = k
    while lo > 0 and p[lo - 1] >= half:
        lo -= 1
    hi = k
    while hi < p.size - 1 and p[hi + 1] >= half:
        hi += 1
    return lo, hi


def peak_centroid_and_fwhm(psd, k):
    """Power-weighted centroid and FWHM of the peak at index ``k``.

    The peak height is refined by a parabola through the top three samples
    and the half-power crossings are interpolated linearly.
    """
    f = psd.frequency
    p = psd.values
    lo, hi = _half_power_region(p, k)
    sl = slice(lo, hi + 1)
    centroid = float(np.sum(f[sl] * p[sl]) / np.sum(p[sl]))
    peak = p[k]
    if 0 < k < p.size - 1:
        a, b, c = p[k - 1], p[k], p[k + 1]
        denom = a - 2 * b + c
        if denom < 0:
            peak = b - 0.25 * (a - c) ** 2 / denom
    half = 0.5 * peak
    lo, hi = k, k
    while lo > 0 and p[lo] > half:
        lo -= 1
    while hi < p.size - 1 and p[hi] > half:
        hi += 1
    if p[lo] > half or p[hi] > half:
        return centroid, float("nan")
    fl = f[lo] + (half - p[lo]) * (f[lo + 1] - f[lo]) / (p[lo + 1] - p[lo])
    fr = f[hi - 1] + (half - p[hi - 1]) * (f[hi] - f[hi - 1]) / (p[hi] - p[hi - 1])
    return centroid, float(fr - fl)


def _upper_envelope_rate(t, y, period):
    """Exponential fit to the per-period maxima of ``y`` for ``t > 0``."""
    edges = np.arange(t.min(), t.max() + period, period)
    idx = np.digitize(t, edges)
    tm, ym = [], []
    for k in np.unique(idx):
        sel = idx == k
        if sel.sum() < 2:
            continue
        j = np.argmax(y[sel])
        if y[sel][j] > 0:
            tm.append(t[sel][j])
            ym.append(y[sel][j])
    if len(tm) < 3:
        return None, None
    slope, icpt = np.polyfit(np.asarray(tm), np.log(ym), 1, w=np.sqrt(ym))
    return -slope, math.exp(icpt)


def fit_fringe(hist, omega0, rate0=None, fit_range=None):
    """Weighted least-squares fit of ``B + A exp(-G|t|)(1 + m cos(w t - phi))``.

    Flagged bins are excluded.  Returns a dict with ``A, G, m, w, phi, B``,
    their standard errors and the reduced chi-square.
    """
    t = hist.delays
    y = hist.counts.astype(float)
    use = ~hist.flagged
    period = TWO_PI / omega0
    tp = np.abs(t)
    if rate0 is None or not np.isfinite(rate0) or rate0 <= 0:
        rate0, _ = _upper_envelope_rate(tp[use & (tp > 0)], y[use & (tp > 0)], period)
    if rate0 is None or not np.isfinite(rate0) or rate0 <= 0:
        rate0 = 1.0 / (10 * period)
    if fit_range is None:
        fit_range = min(t.max(), 8.0 / rate0)
    use = use & (tp <= fit_range)
    if use.sum() < 10:
        raise FitError("too few usable histogram bins for a fringe fit")
    tu, yu = t[use], y[use]
    sig = np.sqrt(np.maximum(yu, 1.0))

    b0 = float(np.median(y[np.abs(t) > 0.8 * t.max()])) if np.any(np.abs(t) > 0.8 * t.max()) else 0.0
    env = np.exp(-rate0 * np.abs(tu))
    a0 = max(float(np.sum((yu - b0) * env) / np.sum(env ** 2)), 1.0)
    # linear projection for the fringe quadratures at the trial frequency
    resid = (yu - b0) / np.maximum(a0 * env, 1e-300) - 1.0
    wgt = env ** 2
    c = np.cos(omega0 * tu)
    s = np.sin(omega0 * tu)
    mc = float(np.sum(wgt * resid * c) / np.sum(wgt * c * c))
    ms = float(np.sum(wgt * resid * s) / np.sum(wgt * s * s))
    m0 = min(math.hypot(mc, ms), 1.0)
    phi0 = math.atan2(ms, mc)

    def model(p):
        a, g, m, w, phi, bg = p
        return bg + a * np.exp(-g * np.abs(tu)) * (1.0 + m * np.cos(w * tu - phi))

    def residual(p):
        return (model(p) - yu) / sig

    p0 = [a0, rate0, max(m0, 1e-3), omega0, phi0, max(b0, 0.0)]
    lower = [0.0, 0.0, 0.0, 0.5 * omega0, -4 * math.pi, 0.0]
    upper = [np.inf, np.inf, 2.0, 1.5 * omega0, 4 * math.pi, np.inf]
    sol = least_squares(residual, p0, bounds=(lower, upper), x_scale="jac", method="trf")
    a, g, m, w, phi, bg = sol.x
    dof = max(yu.size - len(p0), 1)
    chi2 = float(np.sum(sol.fun ** 2) / dof)
    try:
        jtj = sol.jac.T @ sol.jac
        cov = np.linalg.inv(jtj) * chi2
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(len(p0), np.nan)
    phi = (phi + math.pi) % TWO_PI - math.pi
    names = ("A", "G", "m", "w", "phi", "B")
    out = {k: float(v) for k, v in zip(names, (a, g, m, w, phi, bg))}
    out.update({f"{k}_err": float(e) for k, e in zip(names, err)})
    out["reduced_chi2"] = chi2
    out["fit_range_s"] = float(fit_range)
    return out


def fit_beat(psd, hist, probes=(), **peak_options):
    """Beat frequency, linewidth, envelope decay, visibility and contamination.

    The dominant non-dc PSD peak seeds a least-squares fringe fit of the
    histogram, which gives the decay rate, fringe frequency and modulation
    depth.  The reported beat frequency and FWHM are the power-weighted
    centroid and half-power width of that line after the fitted dc lobe and
    negative-frequency image are removed (:func:`_refined_centroid`); the
    plain PSD values are kept in ``fit_parameters``.  The visibility divides the modulation depth by the
    timing response at the fitted fringe frequency (see
    :func:`response_factor`).  Each probe frequency is aliased into the
    observable band and the strongest PSD value within +-2 resolution bins
    there is reported relative to the main peak, in dB, together with a
    time-domain fit of a fringe at the alias.
    """
    # window sidelobes of the mean level stay above the shot noise for a few
    # native resolution bins, so the search starts beyond them
    peak_options.setdefault("min_frequency", 8.0 / (hist.counts.size * hist.bin_width))
    k = find_beat_peak(psd, **peak_options)
    centroid, width = peak_centroid_and_fwhm(psd, k)
    omega0 = TWO_PI * centroid
    rate0 = math.pi * width / math.sqrt(math.sqrt(2.0) - 1.0) if np.isfinite(width) else None
    fr = fit_fringe(hist, omega0, rate0)
    centroid_raw, width_raw = centroid, width
    centroid, width = _refined_centroid(psd, hist, fr, peak_options["min_frequency"])
    h = response_factor(fr["w"], hist.tick_seconds, hist.bin_width, hist.jitter_sigma_eff)
    vis = float(np.clip(fr["m"] / h, 0.0, 1.0))

    fs = 1.0 / hist.tick_seconds if hist.bin_width <= hist.tick_seconds else 1.0 / hist.bin_width
    native = 1.0 / (hist.counts.size * hist.bin_width)
    main = psd.values[k]
    contamination, aliased, tones = {}, {}, {}
    for fp in probes:
        fa = float(alias_frequency(float(fp), fs))
        sel = np.abs(psd.frequency - fa) <= 2.0 * native + 1e-9 * fs
        level = float(psd.values[sel].max()) if sel.any() else 0.0
        contamination[float(fp)] = 10.0 * math.log10(max(level, 1e-300) / main)
        aliased[float(fp)] = fa
        tones[float(fp)] = probe_tone(hist, fr, fa)
    return BeatFitResult(
        beat_frequency=centroid,
        psd_fwhm=width,
        envelope_rate=fr["G"],
        visibility=vis,
        contamination_db=contamination,
        visibility_raw=fr["m"],
        fringe_frequency=fr["w"],
        fringe_phase=fr["phi"],
        aliased_probes=aliased,
        probe_tones=tones,
        fit_parameters=dict(fr, response_factor=h, peak_index=int(k),
                            psd_peak_centroid_hz=centroid_raw, psd_peak_fwhm_hz=width_raw,
                            frequency_resolution_hz=native),
    )


def _refined_centroid(psd, hist, fr, min_frequency):
    """Centroid and FWHM of the beat line with the fitted dc lobe and image removed.

    A broad line close to dc interferes with the envelope lobe and with its own
    negative-frequency image in ``|FT|^2``, which pulls the plain centroid.
    Here the fitted background, envelope and negative-frequency half of the
    fringe are subtracted from the counts before transforming, leaving the
    positive-frequency line plus noise.  Flagged bins take the model value.
    """
    t = hist.delays
    env = fr["A"] * np.exp(-fr["G"] * np.abs(t))
    pos = 0.5 * fr["m"] * env * np.exp(1j * (fr["w"] * t - fr["phi"]))
    model = fr["B"] + env + 2.0 * pos.real
    y = hist.counts.astype(float)
    if hist.flagged is not None:
        y = np.where(hist.flagged, model, y)
    z = y - (model - pos)
    n_fft = 2 * (psd.frequency.size - 1)
    spec = np.fft.fft(z * _window(z.size, psd.window), n=n_fft)
    line = PsdSpectrum(psd.frequency, np.abs(spec[:psd.frequency.size]) ** 2, psd.window)
    start = int(np.searchsorted(line.frequency, min_frequency))
    k = start + int(np.argmax(line.values[start:]))
    return peak_centroid_and_fwhm(line, k)


def probe_tone(hist, fringe, f):
    """Amplitude of an extra fringe at ``f`` (Hz) left in the fit residual.

    ``fringe`` holds the parameters from :func:`fit_fringe`.  The residual
    over the same delay range is regressed on ``exp(-G|t|) cos(2 pi f t)`` and
    ``exp(-G|t|) sin(2 pi f t)`` with Poisson weights.  The amplitude is
    relative to the fitted envelope ``A`` (like the modulation depth), and
    ``z`` is the square root of the chi-square reduction it buys, which is
    Rayleigh distributed when no tone is present.
    """
    t = hist.delays
    y = hist.counts.astype(float)
    use = ~hist.flagged & (np.abs(t) <= fringe["fit_range_s"])
    t, y = t[use], y[use]
    env = np.exp(-fringe["G"] * np.abs(t))
    model = fringe["B"] + fringe["A"] * env * (1.0 + fringe["m"] * np.cos(fringe["w"] * t - fringe["phi"]))
    sig = np.sqrt(np.maximum(model, 1.0))
    r = (y - model) / sig
    w = TWO_PI * f
    basis = np.stack([fringe["A"] * env * np.cos(w * t), fringe["A"] * env * np.sin(w * t)], axis=1) / sig[:, None]
    coef, *_ = np.linalg.lstsq(basis, r, rcond=None)
    gain = float(r @ r - np.sum((r - basis @ coef) ** 2))
    cov = np.linalg.inv(basis.T @ basis)
    amp = float(math.hypot(*coef))
    err = float(math.sqrt(max(coef @ cov @ coef, 0.0)) / amp) if amp > 0 else float("inf")
    return {"frequency_hz": float(f), "amplitude": amp, "amplitude_err": err,
            "z": math.sqrt(max(gain, 0.0))}


def singles_beat_test(tags, ch, frequency, n_controls=48, control_spread=None):
    """Rayleigh test for a first-order intensity modulation in one channel.

    ``Z(f) = |sum_k exp(-2 pi i f t_k)|^2 / N`` is unit-mean exponential for
    an unmodulated stream.  ``Z`` at ``frequency`` is compared with its values
    at ``n_controls`` nearby control frequencies; the returned ``z_score`` is
    in units of their standard deviation.
    """
    ticks = tags.ticks_of(ch).astype(np.float64)
    n = ticks.size
    if n == 0:
        raise FitError(f"channel {ch!r} has no events")
    dt = tags.tick_seconds
    span = (ticks[-1] - ticks[0]) * dt if n > 1 else dt
    if control_spread is None:
        control_spread = 200.0 / span
    offsets = np.linspace(-1.0, 1.0, n_controls + 2)[1:-1] * control_spread
    offsets = offsets[np.abs(offsets) > 5.0 / span]

    # phasors at the probe frequency, with exact fractional-cycle arithmetic
    cyc = (frequency * dt) % 1.0
    base = np.exp(-2j * math.pi * ((ticks * cyc) % 1.0))
    target = float(np.abs(base.sum()) ** 2 / n)
    # control offsets are small, so sum the phasors in time cells much shorter
    # than the slowest offset period and rotate the cell sums
    cell = 1.0 / (1000.0 * np.max(np.abs(offsets)))
    t = (ticks - ticks[0]) * dt
    idx = np.floor(t / cell).astype(np.int64)
    sums = np.bincount(idx, weights=base.real) + 1j * np.bincount(idx, weights=base.imag)
    centres = (np.arange(sums.size) + 0.5) * cell
    controls = np.array([np.abs(np.sum(sums * np.exp(-2j * math.pi * o * centres))) ** 2 / n
                         for o in offsets])
    score = (target - controls.mean()) / controls.std()
    return {"frequency_hz": float(frequency), "rayleigh_z": target,
            "control_mean": float(controls.mean()), "control_std": float(controls.std()),
            "z_score": float(score), "n_events": int(n), "n_controls": int(offsets.size)}
