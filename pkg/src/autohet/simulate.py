"""Monte-Carlo time-tag generation from predicted cw correlation traces.

Pairs are emitted as a Poisson process.  Each pair leaves the beamsplitter
through outputs CD, CC or DD with probability proportional to the integrated
G2 of that channel pair, and its delay ``t- = t_first - t_second`` is drawn
from the normalized G2 trace.  A detector model then thins, blurs, adds dark
counts, quantizes to clock ticks and enforces dead time.

Every random stage draws from its own child of a ``numpy.random.SeedSequence``
so streams are bit-reproducible from the seed alone.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError

CHANNEL_C = 0
CHANNEL_D = 1
CHANNEL_NAMES = ("C", "D")
OUTCOMES = ("CD", "CC", "DD")

# channels hit by the first and second photon of each outcome
_FIRST = np.array([CHANNEL_C, CHANNEL_C, CHANNEL_D], dtype=np.uint8)
_SECOND = np.array([CHANNEL_D, CHANNEL_C, CHANNEL_D], dtype=np.uint8)


@dataclass(frozen=True)
class SourceConfig:
    """Pair source: Poisson rate (pairs/s), run length (s), fringe visibility and seed."""

    pair_rate: float
    duration: float
    visibility_degradation: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.pair_rate > 0:
            raise ConfigurationError(f"pair_rate must be positive, got {self.pair_rate}")
        if not self.duration > 0:
            raise ConfigurationError(f"duration must be positive, got {self.duration}")
        if not 0.0 <= self.visibility_degradation <= 1.0:
            raise ConfigurationError(
                f"visibility_degradation must lie in [0, 1], got {self.visibility_degradation}")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ConfigurationError("rng_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector: efficiency, dead time (s), Gaussian jitter rms (s),
    clock tick (s) and dark-count rate (1/s)."""

    efficiency: float = 0.5
    dead_time: float = 40e-9
    jitter_sigma: float = 0.0
    clock_tick: float = 625e-12
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigurationError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        for name in ("dead_time", "jitter_sigma", "dark_rate"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if not self.clock_tick > 0:
            raise ConfigurationError(f"clock_tick must be positive, got {self.clock_tick}")


@dataclass(frozen=True)
class TimeTagStream:
    """Detector events sorted by tick (ties by channel).

    ``header`` carries ``tick_seconds``, ``channel_names``, ``start_time``,
    ``seed`` and ``config_digest``.
    """

    header: dict
    channels: np.ndarray
    ticks: np.ndarray

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        tk = np.ascontiguousarray(self.ticks, dtype=np.uint64)
        if ch.shape != tk.shape or ch.ndim != 1:
            raise ConfigurationError("channels and ticks must be 1-D arrays of equal length")
        if tk.size > 1 and np.any(tk[1:] < tk[:-1]):
            raise ConfigurationError("ticks must be non-decreasing")
        ch.setflags(write=False)
        tk.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "ticks", tk)

    @property
    def tick_seconds(self):
        return float(self.header["tick_seconds"])

    def __len__(self):
        return int(self.ticks.size)

    def channel_index(self, name):
        names = list(self.header.get("channel_names", CHANNEL_NAMES))
        if isinstance(name, (int, np.integer)):
            if not 0 <= int(name) < len(names):
                raise ConfigurationError(f"unknown channel {name!r}")
            return int(name)
        if name not in names:
            raise ConfigurationError(f"unknown channel {name!r}; stream has {names}")
        return names.index(name)

    def ticks_of(self, name):
        return self.ticks[self.channels == self.channel_index(name)]


@dataclass(frozen=True)
class PairEvents:
    """Ideal (pre-detector) photon arrivals.

    ``first_times``/``second_times`` are the arrival times (s) of the two
    photons of each pair at the channels in ``first_channels``/``second_channels``.
    """

    emission_times: np.ndarray
    outcomes: np.ndarray
    delays: np.ndarray
    first_channels: np.ndarray
    second_channels: np.ndarray
    first_times: np.ndarray
    second_times: np.ndarray
    duration: float
    latency: float
    outcome_probabilities: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.emission_times.size)


def digest(obj):
    """Short SHA-256 digest of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, default=str, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


_N_STAGES = 12


def _streams(seed):
    """Independent generators for every random stage: 4 for emission, 8 for detection."""
    children = np.random.SeedSequence(int(seed)).spawn(_N_STAGES)
    return [np.random.default_rng(s) for s in children]


def mixed_densities(g2_set, visibility):
    """CD, CC and DD traces with the oscillating parts scaled by ``visibility``.

    The non-oscillating parts are ``AB/2`` for CD and ``AB/4`` for CC and DD,
    so the three always sum to AB.
    """
    try:
        cd = np.asarray(g2_set["CD"].values, dtype=float)
        cc = np.asarray(g2_set["CC"].values, dtype=float)
        dd = np.asarray(g2_set["DD"].values, dtype=float)
    except KeyError as exc:
        raise ConfigurationError(f"g2_set lacks channel pair {exc.args[0]}") from None
    ab = np.asarray(g2_set["AB"].values, dtype=float) if "AB" in g2_set else cc + dd + cd
    v = visibility
    out = {
        "CD": 0.5 * ab + v * (cd - 0.5 * ab),
        "CC": 0.25 * ab + v * (cc - 0.25 * ab),
        "DD": 0.25 * ab + v * (dd - 0.25 * ab),
    }
    return {k: np.clip(x, 0.0, None) for k, x in out.items()}


class _TabulatedSampler:
    """Inverse-CDF sampler for a density tabulated on a uniform grid.

    Cell masses follow the trapezoid rule and the CDF is linear inside each
    cell.
    """

    def __init__(self, x, density):
        x = np.asarray(x, dtype=float)
        density = np.asarray(density, dtype=float)
        mass = 0.5 * (density[1:] + density[:-1]) * np.diff(x)
        total = mass.sum()
        if not total > 0 or not np.isfinite(total):
            raise ConfigurationError("correlation density is not normalizable")
        self.x = x
        self.cdf = np.concatenate([[0.0], np.cumsum(mass) / total])
        self.total = total

    def sample(self, rng, n):
        u = rng.random(n)
        k = np.searchsorted(self.cdf, u, side="right") - 1
        k = np.clip(k, 0, self.x.size - 2)
        lo = self.cdf[k]
        width = self.cdf[k + 1] - lo
        frac = np.divide(u - lo, width, out=np.zeros_like(u), where=width > 0)
        return self.x[k] + frac * (self.x[k + 1] - self.x[k])


def sample_pairs(g2_set, src):
    """Draw ideal pair arrivals from cw correlation traces.

    ``g2_set`` maps channel pairs to :class:`~autohet.correlation.G2Surface`
    traces on a common ``t-`` grid.  Emission times fill ``[0, duration)``;
    photon times are shifted by a fixed latency of half the tabulated delay
    range so that none are negative.
    """
    any_g2 = next(iter(g2_set.values()))
    grid = any_g2.grid
    if not grid.cw_collapsed:
        raise ConfigurationError("pair sampling assumes a stationary (cw) correlation trace")
    t = grid.diff_axis.values
    dens = mixed_densities(g2_set, src.visibility_degradation)
    samplers = []
    weights = []
    for name in OUTCOMES:
        d = dens[name]
        if np.sum(d) > 0:
            samplers.append(_TabulatedSampler(t, d))
            weights.append(samplers[-1].total)
        else:
            samplers.append(None)
            weights.append(0.0)
    weights = np.asarray(weights)
    if not weights.sum() > 0:
        raise ConfigurationError("all correlation traces are zero")
    probs = weights / weights.sum()

    rng_count, rng_times, rng_outcome, rng_delay = _streams(src.rng_seed)[:4]
    n = int(rng_count.poisson(src.pair_rate * src.duration))
    emission = np.sort(rng_times.random(n) * src.duration)
    outcomes = rng_outcome.choice(len(OUTCOMES), size=n, p=probs).astype(np.uint8)
    delays = np.empty(n)
    for k, sampler in enumerate(samplers):
        idx = np.flatnonzero(outcomes == k)
        if idx.size:
            delays[idx] = sampler.sample(rng_delay, idx.size)

    latency = 0.5 * float(np.max(np.abs(t)))
    centre = emission + latency
    return PairEvents(
        emission_times=emission,
        outcomes=outcomes,
        delays=delays,
        first_channels=_FIRST[outcomes],
        second_channels=_SECOND[outcomes],
        first_times=centre + 0.5 * delays,
        second_times=centre - 0.5 * delays,
        duration=float(src.duration),
        latency=latency,
        outcome_probabilities={name: float(p) for name, p in zip(OUTCOMES, probs)},
    )


def enforce_dead_time(ticks, dead_ticks):
    """Non-paralyzable dead time on sorted ticks: keep an event only if it comes
    at least ``dead_ticks`` after the last kept one."""
    ticks = np.asarray(ticks)
    if ticks.size == 0 or dead_ticks <= 0:
        return np.ones(ticks.size, dtype=bool)
    t = ticks.astype(np.int64)
    gap = np.diff(t, prepend=t[0] - dead_ticks)
    keep = gap >= dead_ticks
    # an event far enough from its predecessor is far enough from the last kept one;
    # only the rest needs the sequential rule
    last = None
    for i in np.flatnonzero(~keep):
        if keep[i - 1]:
            last = t[i - 1]
        if t[i] - last >= dead_ticks:
            keep[i] = True
    return keep


def dead_time_ticks(det):
    """Dead time in whole clock ticks, rounded up (tolerant of float noise)."""
    ratio = det.dead_time / det.clock_tick
    return int(math.ceil(ratio - 1e-9))


def _detect_channel(times, det, span, rngs):
    rng_eff, rng_jit, rng_dark_n, rng_dark_t = rngs
    kept = times[rng_eff.random(times.size) < det.efficiency]
    if det.jitter_sigma > 0:
        kept = np.clip(kept + rng_jit.normal(0.0, det.jitter_sigma, kept.size), 0.0, None)
    n_dark = int(rng_dark_n.poisson(det.dark_rate * span)) if det.dark_rate > 0 else 0
    dark = rng_dark_t.random(n_dark) * span
    all_times = np.concatenate([kept, dark])
    ticks = np.floor(all_times / det.clock_tick).astype(np.uint64)
    ticks.sort(kind="stable")
    keep = enforce_dead_time(ticks, dead_time_ticks(det))
    stats = {"photons": int(times.size), "after_efficiency": int(kept.size),
             "dark": n_dark, "dead_time_losses": int((~keep).sum())}
    return ticks[keep], stats


def apply_detector_model(events, det_c, det_d, rng_seed, config=None, start_time=0.0,
                         return_stats=False, config_digest=None):
    """Turn ideal arrivals into a sorted :class:`TimeTagStream`.

    Per channel, in order: keep each photon with probability ``efficiency``;
    add Gaussian jitter (times clipped at 0); add homogeneous Poisson dark
    counts over the run; floor to clock ticks; drop events within the
    non-paralyzable dead time of the previous kept event.  Both detectors
    must share the clock tick.  The header's ``config_digest`` is
    ``config_digest`` when given, else a digest of ``config`` (or of the
    detector settings and seed).
    """
    if det_c.clock_tick != det_d.clock_tick:
        raise ConfigurationError("both detectors must share one clock")
    span = events.duration + 2.0 * events.latency
    streams = _streams(rng_seed)[4:]
    per_channel = []
    stats = {}
    for ch, det, rngs in ((CHANNEL_C, det_c, streams[:4]), (CHANNEL_D, det_d, streams[4:])):
        times = np.concatenate([events.first_times[events.first_channels == ch],
                                events.second_times[events.second_channels == ch]])
        times.sort(kind="stable")
        ticks, st = _detect_channel(times, det, span, rngs)
        per_channel.append((np.full(ticks.size, ch, dtype=np.uint8), ticks))
        stats[CHANNEL_NAMES[ch]] = st
    channels = np.concatenate([c for c, _ in per_channel])
    ticks = np.concatenate([t for _, t in per_channel])
    order = np.lexsort((channels, ticks))
    header = {
        "tick_seconds": float(det_c.clock_tick),
        "channel_names": list(CHANNEL_NAMES),
        "start_time": start_time,
        "seed": int(rng_seed),
        "config_digest": config_digest or digest(config if config is not None else {
            "detectors": [asdict(det_c), asdict(det_d)], "seed": int(rng_seed)}),
        "detectors": {"C": asdict(det_c), "D": asdict(det_d)},
    }
    stream = TimeTagStream(header, channels[order], ticks[order])
    if return_stats:
        return stream, stats
    return stream


def simulate_stream(g2_set, src, det_c, det_d, config=None):
    """:func:`sample_pairs` followed by :func:`apply_detector_model` with ``src.rng_seed``."""
    events = sample_pairs(g2_set, src)
    return apply_detector_model(events, det_c, det_d, src.rng_seed, config=config)
