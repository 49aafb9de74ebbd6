"""File containers for amplitudes, correlation traces, spectra and histograms.

JSA container (JSON)::

    {
      "format": "autohet-jsa", "version": 1,
      "coordinate_convention": "sum_diff" | "signal_idler",
      "cw_collapsed": bool,
      "axes": [{"name": ..., "center_hz": ..., "span_hz": ..., "n_points": ...}, ...],
      "shape": [...],
      "values": [re0, im0, re1, im1, ...],     # C order, float64
      "metadata": {...}, "provenance": {...}
    }

Axis values are ordinary frequencies in Hz; the amplitude itself is stored
exactly as held in memory (normalized under the angular-frequency measure).
For cw amplitudes the sum axis has one point and ``shape`` is ``[n]``.

CSV outputs are long-format tables with a header row.  A leading ``#``
comment line carries the provenance digest when one is given.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import CorrelationHistogram
from .correlation import CorrelationGrid, G2Surface, PsdSpectrum
from .errors import ConfigurationError
from .spectral import Axis, FrequencyGrid, JointSpectralAmplitude, SignalIdlerGrid

TWO_PI = 2.0 * math.pi
JSA_FORMAT = "autohet-jsa"
JSA_VERSION = 1
HISTOGRAM_FORMAT = "autohet-histogram"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def _axis_to_json(name, axis):
    return {"name": name, "center_hz": axis.center / TWO_PI, "span_hz": axis.span / TWO_PI,
            "n_points": axis.n_points}


def _axis_from_json(d):
    return Axis(TWO_PI * float(d["center_hz"]), TWO_PI * float(d["span_hz"]), int(d["n_points"]))


def jsa_to_dict(jsa, provenance=None):
    g = jsa.grid
    if isinstance(g, FrequencyGrid):
        axes = [_axis_to_json("omega_plus", g.sum_axis), _axis_to_json("omega_minus", g.diff_axis)]
    else:
        axes = [_axis_to_json("omega_s", g.signal_axis), _axis_to_json("omega_i", g.idler_axis)]
    inter = np.empty(2 * jsa.values.size)
    flat = jsa.values.ravel()
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    return {
        "format": JSA_FORMAT,
        "version": JSA_VERSION,
        "coordinate_convention": jsa.coordinate_convention,
        "cw_collapsed": jsa.is_cw,
        "axes": axes,
        "shape": list(jsa.values.shape),
        "values": inter.tolist(),
        "metadata": jsa.metadata,
        "provenance": provenance or {},
    }


def jsa_from_dict(d):
    if d.get("format") != JSA_FORMAT:
        raise ConfigurationError("not a JSA container")
    if d.get("version") != JSA_VERSION:
        raise ConfigurationError(f"unsupported JSA container version {d.get('version')!r}")
    axes = [_axis_from_json(a) for a in d["axes"]]
    if d["coordinate_convention"] == "sum_diff":
        grid = FrequencyGrid(axes[0], axes[1], bool(d["cw_collapsed"]))
    elif d["coordinate_convention"] == "signal_idler":
        grid = SignalIdlerGrid(axes[0], axes[1])
    else:
        raise ConfigurationError(f"unknown coordinate convention {d['coordinate_convention']!r}")
    inter = np.asarray(d["values"], dtype=float)
    values = (inter[0::2] + 1j * inter[1::2]).reshape(d["shape"])
    return JointSpectralAmplitude(grid, values, d.get("metadata", {}))


def save_jsa(jsa, path, provenance=None):
    return write_json(path, jsa_to_dict(jsa, provenance))


def load_jsa(path):
    return jsa_from_dict(json.loads(Path(path).read_text()))


def write_csv(path, header, columns, provenance=None):
    """Write equal-length ``columns`` under ``header`` with full float precision."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# provenance: {provenance}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*[c.tolist() for c in cols]):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns ``(header, list of column arrays)``."""
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [[] for _ in header]
    return header, [np.asarray([float(v) for v in c]) for c in cols]


def write_g2_csv(path, surfaces, provenance=None):
    """Long-format G2 table: ``t_minus_s[, t_plus_s], channel_pair, value``."""
    t_cols, names, vals = [], [], []
    first = next(iter(surfaces.values()))
    grid = first.grid
    tm = grid.diff_axis.values
    if grid.cw_collapsed:
        for name, s in surfaces.items():
            t_cols.append(tm)
            names.append(np.full(tm.size, name))
            vals.append(s.values)
        return write_csv(path, ["t_minus_s", "channel_pair", "value"],
                         [np.concatenate(t_cols), np.concatenate(names), np.concatenate(vals)],
                         provenance)
    tp = grid.sum_axis.values
    TP, TM = np.meshgrid(tp, tm, indexing="ij")
    tps, tms = [], []
    for name, s in surfaces.items():
        tps.append(TP.ravel())
        tms.append(TM.ravel())
        names.append(np.full(TP.size, name))
        vals.append(s.values.ravel())
    return write_csv(path, ["t_minus_s", "t_plus_s", "channel_pair", "value"],
                     [np.concatenate(tms), np.concatenate(tps), np.concatenate(names),
                      np.concatenate(vals)], provenance)


def write_psd_csv(path, psd, provenance=None):
    if psd.values.ndim == 1:
        return write_csv(path, ["freq_hz", "power"], [psd.frequency, psd.values], provenance)
    FP, FM = np.meshgrid(psd.frequency_plus, psd.frequency, indexing="ij")
    return write_csv(path, ["freq_hz", "freq_plus_hz", "power"],
                     [FM.ravel(), FP.ravel(), psd.values.ravel()], provenance)


def write_histogram_csv(path, hist, provenance=None):
    return write_csv(path, ["delay_s", "count"], [hist.delays, hist.counts], provenance)


def histogram_to_dict(hist, provenance=None):
    return {
        "format": HISTOGRAM_FORMAT,
        "version": 1,
        "channel_pair": hist.channel_pair,
        "bin_width_s": hist.bin_width,
        "tick_seconds": hist.tick_seconds,
        "jitter_sigma_eff_s": hist.jitter_sigma_eff,
        "total_pairs": int(hist.total_pairs),
        "k_max": int((hist.counts.size - 1) // 2),
        "counts": hist.counts.tolist(),
        "flagged": np.flatnonzero(hist.flagged).tolist(),
        "provenance": provenance or {},
    }


def histogram_from_dict(d):
    if d.get("format") != HISTOGRAM_FORMAT:
        raise ConfigurationError("not a histogram file")
    counts = np.asarray(d["counts"], dtype=np.int64)
    k = int(d["k_max"])
    delays = np.arange(-k, k + 1) * float(d["bin_width_s"])
    flagged = np.zeros(counts.size, dtype=bool)
    flagged[np.asarray(d["flagged"], dtype=int)] = True
    return CorrelationHistogram(delays, counts, d["channel_pair"], int(d["total_pairs"]),
                                float(d["bin_width_s"]), flagged, float(d["tick_seconds"]),
                                float(d["jitter_sigma_eff_s"]))


def save_histogram(hist, path, provenance=None):
    return write_json(path, histogram_to_dict(hist, provenance))


def load_histogram(path):
    return histogram_from_dict(json.loads(Path(path).read_text()))
