"""Pipeline configuration: schema validation, defaults and object construction.

Configs are JSON documents validated against ``config_schema.json``.  All
frequencies are ordinary frequencies in Hz and all times are in seconds; they
are converted to angular units here and nowhere else.
"""

from __future__ import annotations

import copy
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .analysis import HistogramConfig
from .correlation import CorrelationGrid, pulsed_time_center
from .errors import ConfigurationError
from .simulate import DetectorModel, SourceConfig, digest
from .spectral import (Axis, FlatPhaseMatching, FrequencyGrid, GaussianPhaseMatching,
                       GaussianPulse, ModeCombSpec, Monochromatic, add_mode_pair,
                       apply_fp_filters, build_cespdc_jsa, default_mode_range,
                       single_mode_lorentzian_g)

TWO_PI = 2.0 * math.pi

DEFAULTS = {
    "seed": 0,
    "source": {
        "model": "single_mode",
        "phase_matching": {"kind": "gaussian", "fwhm_hz": 150e9, "center_hz": 0.0},
        "filters": {"enabled": False, "include_in_pulsed": False},
        "leakage": [],
        "grid": {},
    },
    "correlation": {"window": "rect"},
    "simulation": {
        "pair_rate_hz": 5e4,
        "duration_s": 80.0,
        "visibility": 1.0,
        "detectors": {},
    },
    "analysis": {
        "bin_width_s": 625e-12,
        "max_delay_s": 500e-9,
        "pairing": "all",
        "window": "hann",
        "probes_hz": [],
        "histograms": ["CD"],
        "singles_test": False,
    },
}

DETECTOR_DEFAULTS = {"efficiency": 0.5, "dead_time_s": 40e-9, "jitter_sigma_s": 0.0,
                     "clock_tick_s": 625e-12, "dark_rate_hz": 0.0}

RECIPES = ("fig3a_250MHz", "fig3c_165MHz", "fig4_gm", "figS1_pulsed", "figS2_sweep")


def load_schema():
    return json.loads(resources.files("autohet").joinpath("config_schema.json").read_text())


def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else "/"


def validate_config(cfg):
    """Schema diagnostics as a list of ``{"path": json-pointer, "message": str}``."""
    validator = jsonschema.Draft7Validator(load_schema())
    out = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path)):
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            for key in sorted(set(err.instance) - allowed):
                out.append({"path": _pointer(path + [key]),
                            "message": f"unknown key {key!r}"})
            continue
        out.append({"path": _pointer(path), "message": err.message})
    return out


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_config_file(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None


def recipe_path(name):
    return resources.files("autohet").joinpath("recipes", f"{name}.json")


def resolve_config_path(name_or_path):
    """A filesystem path, or the name of a bundled recipe."""
    p = Path(name_or_path)
    if p.exists():
        return p
    if name_or_path in RECIPES:
        return Path(str(recipe_path(name_or_path)))
    raise ConfigurationError(f"config {name_or_path!r} not found (bundled recipes: {', '.join(RECIPES)})")


class ConfigValidationError(ConfigurationError):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__("; ".join(f"{d['path']}: {d['message']}" for d in diagnostics))


def load_config(name_or_path, seed=None):
    """Validated configuration with defaults filled in."""
    raw = read_config_file(resolve_config_path(name_or_path))
    return prepare_config(raw, seed)


def prepare_config(raw, seed=None):
    diags = validate_config(raw)
    if diags:
        raise ConfigValidationError(diags)
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg):
    src = cfg["source"]
    pump = src["pump"]
    if pump["kind"] == "pulsed" and "sigma_hz" not in pump:
        raise ConfigValidationError([{"path": "/source/pump/sigma_hz",
                                      "message": "a pulsed pump needs sigma_hz"}])
    if src["model"] == "comb":
        for name in ("signal", "idler"):
            if "fsr_hz" not in src[name]:
                raise ConfigValidationError([{"path": f"/source/{name}/fsr_hz",
                                              "message": "the comb model needs fsr_hz"}])
    if src["filters"].get("enabled"):
        for key in ("linewidth_hz", "fsr_hz"):
            if key not in src["filters"]:
                raise ConfigValidationError([{"path": f"/source/filters/{key}",
                                              "message": "enabled filters need " + key}])


def provenance(cfg):
    """Config hash plus code version; ``output_dir`` does not enter the hash."""
    body = {k: v for k, v in cfg.items() if k != "output_dir"}
    cd = digest(body)
    return {"config_digest": cd, "code_version": __version__,
            "digest": digest({"config": cd, "code": __version__})}


# ---------------------------------------------------------------------------
# Object construction
# ---------------------------------------------------------------------------

def difference_frequency(cfg):
    src = cfg["source"]
    return TWO_PI * (src["signal"]["center_hz"] - src["idler"]["center_hz"])


def linewidth(cfg):
    src = cfg["source"]
    g_s = src["signal"]["linewidth_hz"]
    g_i = src["idler"]["linewidth_hz"]
    if src["model"] == "single_mode" and g_s != g_i:
        raise ConfigValidationError([{"path": "/source/idler/linewidth_hz",
                                      "message": "the single-mode model needs equal linewidths"}])
    return TWO_PI * max(g_s, g_i)


def phase_matching(cfg):
    pm = cfg["source"]["phase_matching"]
    if pm["kind"] == "flat":
        return FlatPhaseMatching()
    return GaussianPhaseMatching(TWO_PI * pm.get("fwhm_hz", 150e9), TWO_PI * pm.get("center_hz", 0.0))


def comb_spec(cfg, name, pm=None):
    c = cfg["source"][name]
    fsr = TWO_PI * c.get("fsr_hz", 1e6 * c["linewidth_hz"])
    rng = c.get("mode_range")
    if rng is None:
        rng = default_mode_range(pm, fsr) if pm is not None else (0, 0)
    return ModeCombSpec(TWO_PI * c["center_hz"], TWO_PI * c["linewidth_hz"], fsr, tuple(rng))


def filter_specs(cfg):
    src = cfg["source"]
    f = src["filters"]
    g, fsr = TWO_PI * f["linewidth_hz"], TWO_PI * f["fsr_hz"]
    return (ModeCombSpec(TWO_PI * src["signal"]["center_hz"], g, fsr),
            ModeCombSpec(TWO_PI * src["idler"]["center_hz"], g, fsr))


def _pow2(n):
    return 1 << max(1, int(math.ceil(math.log2(max(2, int(n))))))


def frequency_grid(cfg):
    src = cfg["source"]
    g = src["grid"]
    gamma = linewidth(cfg)
    wm0 = difference_frequency(cfg)
    pump = src["pump"]
    if pump["kind"] == "cw":
        span = max(10.0 * abs(wm0), 100.0 * gamma)
        n = 2 ** 14
        if src["model"] == "comb":
            span += 4.0 * TWO_PI * src["idler"]["fsr_hz"]
            n = 2 ** 15
        if "diff_span_hz" in g:
            span = TWO_PI * g["diff_span_hz"]
        n = _pow2(g.get("n_points", n))
        return FrequencyGrid.cw(TWO_PI * pump.get("frequency_hz", 0.0), span, n)
    sigma = TWO_PI * pump["sigma_hz"]
    centre = TWO_PI * pump.get("center_hz", src["signal"]["center_hz"] + src["idler"]["center_hz"])
    sum_span = TWO_PI * g["sum_span_hz"] if "sum_span_hz" in g else 2.0 * max(6.0 * sigma, 15.0 * gamma)
    diff_span = TWO_PI * g["diff_span_hz"] if "diff_span_hz" in g else 2.0 * (abs(wm0) + 20.0 * gamma)
    return FrequencyGrid(Axis(centre, sum_span, _pow2(g.get("sum_n_points", 256))),
                         Axis(0.0, diff_span, _pow2(g.get("n_points", 2048))))


def build_jsa(cfg):
    """Two-photon amplitude described by the ``source`` block."""
    src = cfg["source"]
    gamma = linewidth(cfg)
    wm0 = difference_frequency(cfg)
    grid = frequency_grid(cfg)
    pump = src["pump"]
    if pump["kind"] == "cw" and src["model"] == "single_mode":
        jsa = single_mode_lorentzian_g(grid.diff_axis, gamma, wm0)
    else:
        pm = phase_matching(cfg)
        if src["model"] == "single_mode":
            pm_for_range = None
        else:
            pm_for_range = pm
        signal = comb_spec(cfg, "signal", pm_for_range)
        idler = comb_spec(cfg, "idler", pm_for_range)
        if pump["kind"] == "cw":
            p = Monochromatic(TWO_PI * pump.get("frequency_hz", 0.0))
        else:
            p = GaussianPulse(grid.sum_axis.center, TWO_PI * pump["sigma_hz"])
        jsa = build_cespdc_jsa(p, signal, idler, pm, grid)
        use_filters = src["filters"].get("enabled") and (
            pump["kind"] == "cw" or src["filters"].get("include_in_pulsed"))
        if use_filters:
            jsa = apply_fp_filters(jsa, *filter_specs(cfg))
    for leak in src.get("leakage", []):
        jsa = add_mode_pair(jsa, TWO_PI * leak["difference_frequency_hz"], gamma,
                            10.0 ** (leak["relative_db"] / 40.0))
    return jsa


def correlation_grid(cfg, jsa):
    c = cfg["correlation"]
    if jsa.is_cw:
        return CorrelationGrid.cw_from_step(c.get("t_step_s", 25e-12), c.get("t_half_span_s", 600e-9))
    gamma = linewidth(cfg)
    sigma = TWO_PI * cfg["source"]["pump"]["sigma_hz"]
    tm = CorrelationGrid.cw_from_step(c.get("t_step_s", 200e-12), c.get("t_half_span_s", 150e-9))
    half_plus = c.get("t_plus_half_span_s", 8.0 / sigma + 20.0 / gamma)
    step_plus = c.get("t_plus_step_s", half_plus / 32.0)
    n_plus = 2 * int(math.ceil(half_plus / step_plus)) + 1
    centre = pulsed_time_center(jsa)
    return CorrelationGrid(tm.diff_axis, Axis(centre, (n_plus - 1) * step_plus, n_plus))


def source_config(cfg):
    s = cfg["simulation"]
    return SourceConfig(s["pair_rate_hz"], s["duration_s"], s["visibility"], int(cfg["seed"]))


def detector(cfg, name):
    d = dict(DETECTOR_DEFAULTS)
    d.update(cfg["simulation"]["detectors"].get(name, {}))
    return DetectorModel(d["efficiency"], d["dead_time_s"], d["jitter_sigma_s"],
                         d["clock_tick_s"], d["dark_rate_hz"])


def histogram_config(cfg):
    a = cfg["analysis"]
    return HistogramConfig(a["bin_width_s"], a["max_delay_s"], a["pairing"])
