"""Command line entry point: ``qli {plan,run,sweep,optimize,calibrate}``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict, replace

from .errors import CalibrationError, ConfigError, DomainError, InvalidChannelError, InvalidPlanError
from .errors import ModelBreakdownError
from .scenario import (
    DEFAULT_QBER_ANCHOR,
    DEFAULT_SKR_ANCHOR,
    QberAnchor,
    Scenario,
    SkrAnchor,
    calibrate,
    default_powers,
    optimize,
    plan,
    run_scenario,
    sweep_csv,
    sweep_launch_power,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CALIBRATION = 0, 2, 3, 4
DEFAULT_CONFIG = "20km"


def _common(suppress: bool) -> argparse.ArgumentParser:
    # Shared flags work before or after the verb; the subparser copy must not
    # clobber a value given before the verb, hence SUPPRESS there.
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d(DEFAULT_CONFIG),
                   help="scenario file or packaged scenario name (default: 20km)")
    p.add_argument("--seed", type=int, default=d(None), help="override the scenario seed")
    p.add_argument("--mode", choices=("analytic", "mc"), default=d(None),
                   help="override the scenario mode")
    p.add_argument("--out", default=d(None), help="write output here instead of stdout")
    p.add_argument("--quiet", action="store_true", default=d(False),
                   help="suppress warnings and summaries on stderr")
    return p


def _float_list(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(max(n, 0))]
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _anchor(kind):
    def parse(text):
        if text.lower() == "none":
            return None
        parts = [float(x) for x in text.split(",")]
        if kind is SkrAnchor and len(parts) == 2:
            return SkrAnchor(*parts)
        if kind is QberAnchor and len(parts) == 4:
            return QberAnchor(parts[0], int(parts[1]), parts[2], parts[3])
        raise argparse.ArgumentTypeError(f"bad anchor {text!r}")

    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qli",
        description="Raman noise, gap timing and decoy-state key rate for QKD sharing a DWDM fiber.",
        parents=[_common(False)],
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    common = _common(True)

    sub.add_parser("plan", parents=[common], help="check gap/gate geometry for every channel")
    sub.add_parser("run", parents=[common], help="run one scenario, JSON result")

    sw = sub.add_parser("sweep", parents=[common], help="QBER/SKR against launch power, CSV")
    sw.add_argument("--powers", type=_float_list, default=None,
                    help="start:stop:step or comma list in dBm (default -20:10:1)")
    sw.add_argument("--channels", type=_int_list, default=None,
                    help="comma list of classical channels (default: those in the scenario)")
    sw.add_argument("--interleave", choices=("on", "off"), default=None)

    opt = sub.add_parser("optimize", parents=[common], help="best decoy intensities and probabilities")
    opt.add_argument("--points", type=int, default=21, help="grid points per axis per level")
    opt.add_argument("--refinements", type=int, default=2)

    cal = sub.add_parser("calibrate", parents=[common], help="fit insertion loss and Raman scale")
    cal.add_argument("--skr-anchor", type=_anchor(SkrAnchor), default=DEFAULT_SKR_ANCHOR,
                     metavar="LEN_KM,BITS_PER_PULSE", help="no-traffic key rate, or 'none'")
    cal.add_argument("--qber-anchor", type=_anchor(QberAnchor), default=DEFAULT_QBER_ANCHOR,
                     metavar="LEN_KM,CH,P_DBM,QBER",
                     help="QBER with one channel, interleaving off, or 'none'")
    cal.add_argument("--write-config", default=None, help="also write the calibrated scenario here")
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _scenario(args) -> Scenario:
    s = Scenario.load(args.config)
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    if args.mode is not None:
        s = replace(s, mode=args.mode)
    return s


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _run(args) -> int:
    s = _scenario(args)
    if args.verb == "plan":
        report = plan(s.channels, s.fiber, s.frame, s.guard_ns)
        _emit(_dump(report.to_dict()), args.out)
        _say(args, "feasible" if report.feasible else "INFEASIBLE")
        return EXIT_OK if report.feasible else EXIT_INFEASIBLE
    if args.verb == "run":
        res = run_scenario(s)
        _emit(res.to_json(), args.out)
        _say(args, f"{s.name}: QBER {res.qber:.4%}, SKR {res.r_bps:.4g} b/s")
        return EXIT_OK
    if args.verb == "sweep":
        if args.interleave is not None:
            s = replace(s, interleave=args.interleave == "on")
        powers = default_powers() if args.powers is None else args.powers
        rows = sweep_launch_power(s, powers, args.channels)
        _emit(sweep_csv(rows), args.out)
        _say(args, f"{len(rows)} sweep points")
        return EXIT_OK
    if args.verb == "optimize":
        res = optimize(s, points=args.points, refinements=args.refinements)
        out = {
            "decoy": asdict(res.decoy),
            "r_per_pulse": res.r_per_pulse,
            "r_bps": res.r_per_pulse * s.system.rep_rate_mhz * 1e6,
            "objective": res.objective,
            "resolution": list(res.resolution),
            "evaluations": res.evaluations,
        }
        _emit(_dump(out), args.out)
        return EXIT_OK
    if args.verb == "calibrate":
        res = calibrate(s, args.skr_anchor, args.qber_anchor)
        _emit(_dump(asdict(res)), args.out)
        if args.write_config:
            with open(args.write_config, "w", encoding="utf-8") as fh:
                fh.write(res.apply(s).to_toml())
        _say(args, f"insertion loss {res.insertion_loss_db:.4f} dB, beta scale {res.beta_scale:.4g}")
        return EXIT_OK
    raise AssertionError(args.verb)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        if args.quiet:
            warnings.simplefilter("ignore")
        try:
            return _run(args)
        except (ConfigError, InvalidPlanError, InvalidChannelError) as exc:
            print(f"qli: invalid configuration: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except CalibrationError as exc:
            print(f"qli: calibration failed: {exc}", file=sys.stderr)
            return EXIT_CALIBRATION
        except (DomainError, ModelBreakdownError) as exc:
            print(f"qli: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except OSError as exc:
            print(f"qli: {exc}", file=sys.stderr)
            return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
