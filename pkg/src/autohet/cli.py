"""Command-line driver.

    autohet <subcommand> --config <path|recipe> [--out DIR] [--seed N] [--quiet]

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure,
4 ambiguous beat fit.  Failures print one JSON object to stderr.  The output
directory defaults to ``$AUTOHET_OUTPUT_DIR``, then the config's
``output_dir``, then ``./autohet-out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import config as C
from . import pipeline as P
from .errors import AmbiguityError, ConfigurationError, FitError, TagFileError
from .io import load_histogram, load_jsa, write_json
from .tags import read_tags

OUTPUT_ENV = "AUTOHET_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_AMBIGUOUS = 0, 2, 3, 4


def _out_dir(args, cfg):
    if args.out:
        return Path(args.out)
    if os.environ.get(OUTPUT_ENV):
        return Path(os.environ[OUTPUT_ENV])
    return Path(cfg.get("output_dir", "autohet-out"))


def _say(args, msg):
    if not args.quiet:
        print(msg)


def cmd_synth_jsa(args, cfg, out):
    jsa = P.stage_jsa(cfg, out)
    write_json(out / "jsa_summary.json", {"summary": P.jsa_summary(cfg, jsa),
                                          "provenance": C.provenance(cfg)})
    _say(args, f"wrote {out / 'jsa.json'}")


def cmd_compute_g2(args, cfg, out):
    jsa = load_jsa(args.jsa) if args.jsa else C.build_jsa(cfg)
    surfaces, psd = P.stage_g2(cfg, jsa, out)
    write_json(out / "g2_summary.json", {"summary": P.g2_summary(surfaces, psd),
                                         "provenance": C.provenance(cfg)})
    _say(args, f"wrote {out / 'g2.csv'}")


def cmd_simulate_tags(args, cfg, out):
    jsa = load_jsa(args.jsa) if args.jsa else C.build_jsa(cfg)
    if not jsa.is_cw:
        raise ConfigurationError("time tags are simulated for cw sources only")
    surfaces, _ = P.stage_g2(cfg, jsa)
    stream, info = P.stage_tags(cfg, surfaces, out, csv=args.csv)
    write_json(out / "simulation.json", {"simulation": info, "provenance": C.provenance(cfg)})
    _say(args, f"wrote {len(stream)} records to {out / 'tags.bin'}")


def cmd_correlate(args, cfg, out):
    stream = read_tags(args.tags)
    hists = P.stage_histograms(cfg, stream, out)
    _say(args, "wrote " + ", ".join(f"histogram_{k}.json" for k in hists))


def _histogram_arg(args, cfg, out):
    if args.histogram:
        return load_histogram(args.histogram)
    name = cfg["analysis"].get("fit", cfg["analysis"]["histograms"][0])
    path = out / f"histogram_{name}.json"
    if not path.exists():
        raise ConfigurationError(f"no histogram given and {path} does not exist")
    return load_histogram(path)


def cmd_spectrum(args, cfg, out):
    hist = _histogram_arg(args, cfg, out)
    P.stage_spectrum(cfg, hist, out)
    _say(args, f"wrote {out / f'psd_{hist.channel_pair}.csv'}")


def cmd_fit(args, cfg, out):
    hist = _histogram_arg(args, cfg, out)
    fit = P.stage_fit(cfg, hist, None, out)
    _say(args, f"beat {fit.beat_frequency / 1e6:.3f} MHz, visibility {fit.visibility:.3f}")


def cmd_schmidt(args, cfg, out):
    table = P.stage_schmidt(cfg, out)
    if not args.quiet:
        print("sigma_p_hz,entropy_nat,entropy_bits,schmidt_number")
        for r in table:
            print(f"{r['sigma_p_hz']:.6g},{r['entropy_nat']:.6g},{r['entropy_bits']:.6g},"
                  f"{r['schmidt_number']:.6g}")


def cmd_pipeline(args, cfg, out):
    report = P.run_pipeline(cfg, out, normalize=args.normalize)
    if "beat" in report:
        _say(args, f"beat {report['beat']['beat_frequency_hz'] / 1e6:.3f} MHz; "
                   f"report at {out / 'report.json'}")
    else:
        _say(args, f"report at {out / 'report.json'}")


COMMANDS = {
    "synth-jsa": cmd_synth_jsa,
    "compute-g2": cmd_compute_g2,
    "simulate-tags": cmd_simulate_tags,
    "correlate": cmd_correlate,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "schmidt": cmd_schmidt,
    "pipeline": cmd_pipeline,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="autohet", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["validate"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="config file, or the name of a bundled recipe")
        p.add_argument("--quiet", action="store_true")
        if name == "validate":
            continue
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV})")
        p.add_argument("--seed", type=int, help="override the config seed")
        if name in ("compute-g2", "simulate-tags"):
            p.add_argument("--jsa", help="amplitude container from synth-jsa")
        if name == "simulate-tags":
            p.add_argument("--csv", action="store_true", help="also write tags.csv")
        if name == "correlate":
            p.add_argument("--tags", required=True, help="time-tag file")
        if name in ("spectrum", "fit"):
            p.add_argument("--histogram", help="histogram JSON from correlate")
        if name == "pipeline":
            p.add_argument("--normalize", action="store_true",
                           help="omit timestamps so reports are byte-reproducible")
    return parser


def _fail(code, kind, message, **extra):
    payload = {"error": kind, "message": message, "exit_code": code}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return code


def validate_main(args):
    try:
        raw = C.read_config_file(C.resolve_config_path(args.config))
    except ConfigurationError as exc:
        return _fail(EXIT_CONFIG, "ConfigurationError", str(exc))
    diags = C.validate_config(raw)
    if not args.quiet:
        print(json.dumps({"config": str(args.config), "valid": not diags,
                          "diagnostics": diags}, indent=2))
    return EXIT_OK if not diags else EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return validate_main(args)
    try:
        cfg = C.load_config(args.config, seed=args.seed)
        out = _out_dir(args, cfg)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, cfg, out)
    except C.ConfigValidationError as exc:
        return _fail(EXIT_CONFIG, "ConfigurationError", str(exc), diagnostics=exc.diagnostics)
    except AmbiguityError as exc:
        return _fail(EXIT_AMBIGUOUS, "AmbiguityError", str(exc),
                     candidates=[{"frequency_hz": f, "relative_db": db} for f, db in exc.candidates])
    except (ConfigurationError, TagFileError, FileNotFoundError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except FitError as exc:
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))
    except Exception as exc:  # noqa: BLE001 - report any stage failure as JSON
        return _fail(EXIT_RUNTIME, type(exc).__name__, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
