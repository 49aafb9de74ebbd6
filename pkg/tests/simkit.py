"""Small end-to-end simulation harness shared by the slower tests."""

import copy

from autohet import config as C
from autohet import pipeline as P

BASE = {
    "version": 1,
    "name": "test",
    "seed": 1,
    "source": {
        "model": "single_mode",
        "pump": {"kind": "cw", "frequency_hz": 0.0},
        "signal": {"center_hz": 125e6, "linewidth_hz": 7.6e6},
        "idler": {"center_hz": -125e6, "linewidth_hz": 7.6e6},
    },
    "simulation": {
        "pair_rate_hz": 5e4,
        "duration_s": 160.0,
        "visibility": 1.0,
        "detectors": {},
    },
    "analysis": {"probes_hz": [], "histograms": ["CD"]},
}


def single_mode_config(f0=250e6, gamma=7.6e6, rate=5e4, duration=160.0, visibility=1.0,
                       seed=1, leakage=None, detectors=None, probes=(), histograms=("CD",),
                       diff_span=None, analysis=None):
    cfg = copy.deepcopy(BASE)
    src = cfg["source"]
    src["signal"].update(center_hz=f0 / 2, linewidth_hz=gamma)
    src["idler"].update(center_hz=-f0 / 2, linewidth_hz=gamma)
    if leakage:
        src["leakage"] = [{"difference_frequency_hz": f, "relative_db": db} for f, db in leakage]
    if diff_span:
        src["grid"] = {"diff_span_hz": diff_span, "n_points": 2 ** 15}
    sim = cfg["simulation"]
    sim.update(pair_rate_hz=rate, duration_s=duration, visibility=visibility)
    if detectors:
        sim["detectors"] = detectors
    cfg["seed"] = seed
    cfg["analysis"].update(probes_hz=list(probes), histograms=list(histograms))
    if analysis:
        cfg["analysis"].update(analysis)
    return cfg


def run(raw, fit=True):
    """Model -> G2 -> tags -> histograms (-> PSD -> fit) without writing files."""
    cfg = C.prepare_config(raw)
    jsa = C.build_jsa(cfg)
    surfaces, _ = P.stage_g2(cfg, jsa)
    stream, info = P.stage_tags(cfg, surfaces)
    hists = P.stage_histograms(cfg, stream)
    out = {"cfg": cfg, "jsa": jsa, "surfaces": surfaces, "stream": stream, "info": info,
           "hists": hists, "psd": {}, "fit": {}}
    for name, h in hists.items():
        out["psd"][name] = P.stage_spectrum(cfg, h)
        if fit:
            out["fit"][name] = P.stage_fit(cfg, h, out["psd"][name])
    return out
