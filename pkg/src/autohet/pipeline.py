"""Pipeline stages: model -> G2 -> tags -> histogram -> PSD -> fit -> report.

Each stage function takes a prepared config (see :mod:`autohet.config`) and
the previous stage's product, and writes its artifacts into ``out_dir``.
Artifacts carry the provenance digest of the config and code version.
"""

from __future__ import annotations

import datetime
import math
from pathlib import Path

import numpy as np

from . import config as C
from .analysis import (auto_histogram, cross_histogram, fit_beat, psd_estimate,
                       resolution_report, singles_beat_test)
from .correlation import g2_all, psd_of_g2
from .entanglement import entropy_vs_pump_sweep
from .io import (save_histogram, save_jsa, write_csv, write_g2_csv, write_histogram_csv,
                 write_json, write_psd_csv)
from .simulate import apply_detector_model, digest, sample_pairs
from .spectral import fwhm, mode_clusters, signal_marginal
from .tags import write_tags, write_tags_csv

TWO_PI = 2.0 * math.pi


def _out(out_dir):
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def jsa_summary(cfg, jsa):
    out = {"coordinate_convention": jsa.coordinate_convention, "cw": jsa.is_cw,
           "shape": list(jsa.values.shape),
           "truncation_loss": jsa.metadata.get("truncation_loss"),
           "transmitted_fraction": jsa.metadata.get("transmitted_fraction"),
           "warnings": jsa.metadata.get("warnings", [])}
    if jsa.is_cw:
        wm = jsa.grid.diff_axis.values
        inten = np.abs(jsa.values) ** 2
        out["peak_difference_frequency_hz"] = float(wm[np.argmax(inten)] / TWO_PI)
        if cfg["source"]["model"] == "comb":
            clusters = mode_clusters(jsa)
            out["mode_clusters"] = [len(c) for c in clusters]
        else:
            try:
                ws, p = signal_marginal(jsa)
                out["signal_marginal_fwhm_hz"] = float(fwhm(ws, p) / TWO_PI)
            except ValueError:
                pass
    return out


def stage_jsa(cfg, out_dir=None):
    jsa = C.build_jsa(cfg)
    if out_dir is not None:
        d = _out(out_dir)
        prov = C.provenance(cfg)
        save_jsa(jsa, d / "jsa.json", prov)
        if jsa.is_cw:
            write_csv(d / "jsa_intensity.csv", ["omega_minus_hz", "intensity"],
                      [jsa.grid.diff_axis.values / TWO_PI, np.abs(jsa.values) ** 2],
                      prov["digest"])
    return jsa


def stage_g2(cfg, jsa, out_dir=None):
    grid = C.correlation_grid(cfg, jsa)
    surfaces = g2_all(jsa, grid)
    psd = psd_of_g2(surfaces["CD"], window=cfg["correlation"]["window"])
    if out_dir is not None:
        d = _out(out_dir)
        prov = C.provenance(cfg)["digest"]
        write_g2_csv(d / "g2.csv", surfaces, prov)
        write_psd_csv(d / "g2_psd_CD.csv", psd, prov)
    return surfaces, psd


def g2_summary(surfaces, psd):
    cd = surfaces["CD"].values
    tot = surfaces["CC"].values + surfaces["DD"].values + cd
    ab = surfaces["AB"].values
    mid = cd.shape[-1] // 2
    # CC + DD + CD always equals AB averaged over both delay signs; it equals AB
    # itself when |U(t-)| is even, e.g. for a real amplitude
    ab_sym = 0.5 * (ab + ab[..., ::-1])
    out = {"conservation_max_rel": float(np.max(np.abs(tot - ab_sym)) / np.max(ab)),
           "ab_asymmetry_max_rel": float(np.max(np.abs(ab - ab_sym)) / np.max(ab)),
           "cd_at_zero_delay_rel": float(np.max(cd[..., mid]) / np.max(cd))}
    if psd.values.ndim == 1:
        p = psd.values
        start = int(np.flatnonzero(np.diff(p) > 0)[0]) if np.any(np.diff(p) > 0) else 0
        k = start + int(np.argmax(p[start:]))
        out["psd_peak_hz"] = float(psd.frequency[k])
    return out


def stage_tags(cfg, surfaces, out_dir=None, csv=False):
    src = C.source_config(cfg)
    events = sample_pairs(surfaces, src)
    stream, stats = apply_detector_model(events, C.detector(cfg, "C"), C.detector(cfg, "D"),
                                         src.rng_seed, return_stats=True,
                                         config_digest=C.provenance(cfg)["digest"])
    info = {"pairs_emitted": len(events), "outcome_probabilities": events.outcome_probabilities,
            "records": len(stream), "detector_stats": stats}
    if out_dir is not None:
        d = _out(out_dir)
        write_tags(stream, d / "tags.bin")
        if csv:
            write_tags_csv(stream, d / "tags.csv")
    return stream, info


def stage_histograms(cfg, stream, out_dir=None):
    hc = C.histogram_config(cfg)
    hists = {}
    for name in cfg["analysis"]["histograms"]:
        if name[0] == name[1]:
            hists[name] = auto_histogram(stream, name[0], hc)
        else:
            hists[name] = cross_histogram(stream, name[0], name[1], hc)
    if out_dir is not None:
        d = _out(out_dir)
        prov = C.provenance(cfg)
        for name, h in hists.items():
            save_histogram(h, d / f"histogram_{name}.json", prov)
            write_histogram_csv(d / f"histogram_{name}.csv", h, prov["digest"])
    return hists


def stage_spectrum(cfg, hist, out_dir=None):
    psd = psd_estimate(hist, window=cfg["analysis"]["window"])
    if out_dir is not None:
        write_psd_csv(_out(out_dir) / f"psd_{hist.channel_pair}.csv", psd,
                      C.provenance(cfg)["digest"])
    return psd


def stage_fit(cfg, hist, psd=None, out_dir=None):
    if psd is None:
        psd = psd_estimate(hist, window=cfg["analysis"]["window"])
    fit = fit_beat(psd, hist, cfg["analysis"]["probes_hz"])
    if out_dir is not None:
        write_json(_out(out_dir) / f"fit_{hist.channel_pair}.json",
                   {"fit": fit.to_dict(), "config": cfg, "provenance": C.provenance(cfg)})
    return fit


def stage_schmidt(cfg, out_dir=None):
    sw = cfg.get("sweep")
    if sw is None:
        raise C.ConfigurationError("the schmidt stage needs a 'sweep' block")
    src = cfg["source"]
    gamma = TWO_PI * sw.get("linewidth_hz", src["signal"]["linewidth_hz"])
    wm0 = TWO_PI * sw.get("difference_frequency_hz",
                          src["signal"]["center_hz"] - src["idler"]["center_hz"])
    opts = {k: sw[k] for k in ("span_linewidths", "points_per_fwhm", "max_points") if k in sw}
    include = bool(sw.get("include_filters", False))
    if include:
        opts["filter_linewidth"] = TWO_PI * src["filters"]["linewidth_hz"]
        opts["filter_fsr"] = TWO_PI * src["filters"]["fsr_hz"]
    rows = entropy_vs_pump_sweep([TWO_PI * s for s in sw["sigma_hz"]], gamma, wm0,
                                 include_filters=include, **opts)
    table = [{"sigma_p_hz": r["sigma_p_hz"], "entropy_nat": r["entropy_nat"],
              "entropy_bits": r["entropy_bits"], "schmidt_number": r["schmidt_number"],
              "n_points": r["n_points"]} for r in rows]
    if out_dir is not None:
        d = _out(out_dir)
        prov = C.provenance(cfg)
        write_csv(d / "schmidt.csv", ["sigma_p_hz", "entropy_nat", "entropy_bits", "schmidt_number"],
                  [[r[k] for r in table] for k in
                   ("sigma_p_hz", "entropy_nat", "entropy_bits", "schmidt_number")],
                  prov["digest"])
        write_json(d / "schmidt.json", {"table": table, "include_filters": include,
                                        "provenance": prov})
    return table


def run_pipeline(cfg, out_dir, normalize=False):
    """Run every stage the config supports and write ``report.json``."""
    d = _out(out_dir)
    prov = C.provenance(cfg)
    report = {"name": cfg.get("name", ""), "provenance": prov, "seed": int(cfg["seed"])}
    if not normalize:
        report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()

    if cfg.get("sweep") is not None:
        report["schmidt"] = stage_schmidt(cfg, d)

    jsa = stage_jsa(cfg, d)
    report["jsa"] = jsa_summary(cfg, jsa)
    surfaces, g2psd = stage_g2(cfg, jsa, d)
    report["g2"] = g2_summary(surfaces, g2psd)

    if jsa.is_cw:
        stream, info = stage_tags(cfg, surfaces, d)
        report["simulation"] = info
        a = cfg["analysis"]
        report["resolution"] = resolution_report(a["bin_width_s"], window=a["max_delay_s"])
        hists = stage_histograms(cfg, stream, d)
        report["histograms"] = {
            k: {"total_pairs": h.total_pairs, "counts_digest": digest(h.counts.tolist()),
                "flagged_bins": int(h.flagged.sum())} for k, h in hists.items()}
        fits = {}
        for name, h in hists.items():
            psd = stage_spectrum(cfg, h, d)
            fits[name] = stage_fit(cfg, h, psd, d).to_dict()
        report["fits"] = fits
        fit_name = a.get("fit", cfg["analysis"]["histograms"][0])
        if fit_name in fits:
            report["beat"] = fits[fit_name]
        if a.get("singles_test"):
            f0 = abs(C.difference_frequency(cfg)) / TWO_PI
            report["singles_test"] = {ch: singles_beat_test(stream, ch, f0) for ch in ("C", "D")}
    else:
        report["note"] = ("pulsed amplitudes are not stationary; time tags are simulated for "
                          "cw sources only")
    write_json(d / "report.json", report)
    return report
