"""raylimit command line.

Subcommands: ray, julia, invariants, hausdorff, limit, maxwild, figures.
Reports are JSON (stdout unless --out is given), images are binary PPM.
Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.

Every numeric knob is a flag; ``--config file.json`` supplies defaults for
any of them by destination name, and explicit flags win.  The resolved
configuration is echoed into each report.  ``--threads`` only changes how
work is scheduled, never the output, so it is left out of the echo.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DegenerateDerivative, RayLimitError
from .family import PerturbationFamily
from .hausdorff import SphereCloud, directed_dist
from .invariants import classify_point, periodic_points_near
from .limits import analyze, default_threads
from .maxwild import build_maxwild, perturb_and_verify
from .polynomial import MonicPoly, exact_period, format_angle, parse_angle, refine_periodic
from .potential import PotentialParams, trace_ray
from .render import Viewport, overlay_path, ppm_bytes, render_julia
from .scenarios import SCENARIOS, check_expected

NOT_ECHOED = {"command", "func", "out", "outdir", "config", "threads"}


class UsageError(Exception):
    """Bad flag value found after parsing; carries the offending flag."""

    def __init__(self, flag, message):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


# -- argument helpers -----------------------------------------------------------

def _load_json_arg(text: str, flag: str):
    """Inline JSON or @path."""
    try:
        if text.startswith("@"):
            return json.loads(Path(text[1:]).read_text())
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(flag, str(exc)) from exc


def _poly(text: str) -> MonicPoly:
    obj = _load_json_arg(text, "--poly")
    try:
        p = MonicPoly.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError("--poly", f"not a polynomial: {exc}") from exc
    return p


def _angle(text: str):
    try:
        return parse_angle(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError("--angle", f"expected N/D, got {text!r}") from exc


def _complex(text: str, flag: str) -> complex:
    try:
        if "," in text:
            re_, im_ = text.split(",", 1)
            return complex(float(re_), float(im_))
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise UsageError(flag, f"expected 're,im', got {text!r}") from exc


def _positive(value, flag: str):
    if value is not None and not value > 0:
        raise UsageError(flag, "must be positive")
    return value


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in NOT_ECHOED}


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _params(args) -> PotentialParams:
    kw = {}
    if getattr(args, "escape_radius", None) is not None:
        kw["escape_radius"] = args.escape_radius
    if getattr(args, "iter_cap", None) is not None:
        kw["iter_cap"] = args.iter_cap
    return PotentialParams(**kw)


# -- subcommands -----------------------------------------------------------------

def cmd_ray(args) -> int:
    p = _poly(args.poly)
    theta = _angle(args.angle)
    _positive(args.smax, "--smax")
    _positive(args.smin, "--smin")
    params = _params(args)
    smax = args.smax if args.smax is not None else p.degree * (math.log(params.radius(p)) + 1)
    if args.smin is not None and args.smin >= smax:
        raise UsageError("--smin", "must be below --smax")
    tr = trace_ray(p, theta, smax, args.smin, params, stop_on_landing=not args.no_stop)
    obj = tr.to_json()
    obj["config"] = _echo(args)
    _emit(obj, args.out)
    return 0


def cmd_julia(args) -> int:
    p = _poly(args.poly)
    _positive(args.width, "--width")
    if args.pixels[0] < 1 or args.pixels[1] < 1:
        raise UsageError("--pixels", "must be positive")
    vp = Viewport(_complex(args.center, "--center"), args.width, args.pixels[0], args.pixels[1])
    img = render_julia(p, vp, args.max_iter, threads=_threads(args), params=_params(args))
    colors = [(255, 40, 40), (40, 200, 40), (60, 60, 255), (255, 200, 0)]
    for i, a in enumerate(args.ray or []):
        tr = trace_ray(p, _angle(a), p.degree * (math.log(_params(args).radius(p)) + 1), 1e-6)
        img = overlay_path(img, vp, list(tr.z) + ([tr.landing] if tr.landing is not None else []),
                           colors[i % len(colors)])
    Path(args.out).write_bytes(ppm_bytes(img))
    black = float(np.mean(np.all(img == 0, axis=-1)))
    _emit({"image": args.out, "width": vp.pixels_x, "height": vp.pixels_y,
           "black_fraction": black, "config": _echo(args)}, args.report)
    return 0


def cmd_invariants(args) -> int:
    p = _poly(args.poly)
    if args.period < 1:
        raise UsageError("--period", "must be >= 1")
    if args.point is not None:
        z0 = _complex(args.point, "--point")
        try:
            z0 = refine_periodic(p, args.period, z0).point
        except DegenerateDerivative as exc:
            z0 = exc.point if exc.point is not None else z0
        pts = [complex(z0)]
    else:
        pts = []
        for z, _ in periodic_points_near(p, args.period, 0j, math.inf):
            try:
                z = refine_periodic(p, args.period, z).point
            except RayLimitError:
                pass
            if all(abs(z - w) > 1e-8 * (1 + abs(z)) for w in pts):
                pts.append(complex(z))
        pts.sort(key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    out = []
    for z in pts:
        period = exact_period(p, z, args.period, 1e-9 * p.scale)
        out.append(classify_point(p, z, period).to_json())
    _emit(out, args.out)
    return 0


def _cloud(text: str, flag: str) -> SphereCloud:
    obj = _load_json_arg(text, flag)
    try:
        return SphereCloud.from_json(obj)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise UsageError(flag, f"not a cloud: {exc}") from exc


def cmd_hausdorff(args) -> int:
    a, b = _cloud(args.a, "--a"), _cloud(args.b, "--b")
    ab, ba = directed_dist(a, b), directed_dist(b, a)
    _emit({"hausdorff": max(ab, ba), "directed_ab": ab, "directed_ba": ba,
           "sizes": [len(a), len(b)], "config": _echo(args)}, args.out)
    return 0


def _family(text: str) -> PerturbationFamily:
    obj = _load_json_arg(text, "--family")
    try:
        return PerturbationFamily.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError("--family", f"not a family: {exc}") from exc


def cmd_limit(args) -> int:
    fam = _family(args.family)
    theta = _angle(args.angle)
    _positive(args.resolution, "--resolution")
    _positive(args.tol, "--tol")
    res = analyze(fam, theta, args.schedule_len, args.resolution, args.tol, _params(args),
                  threads=_threads(args), subsequence=args.subsequence,
                  require_cauchy=not args.allow_not_cauchy, deep_levels=args.deep_levels)
    obj = res.to_json()
    obj["family"] = fam.to_json()
    obj["config"] = dict(obj.get("config", {}), **_echo(args))
    _emit(obj, args.out)
    return 0


def cmd_maxwild(args) -> int:
    if args.N < 1:
        raise UsageError("--N", "must be >= 1")
    _positive(args.epsilon, "--epsilon")
    res = build_maxwild(args.N, args.safety)
    obj = {"construction": res.to_json(), "verification": None}
    if args.epsilon is not None:
        rep = perturb_and_verify(res, args.epsilon, resolution=args.resolution)
        obj["verification"] = rep.to_json()
    obj["config"] = _echo(args)
    _emit(obj, args.out)
    return 0 if obj["verification"] is None or obj["verification"]["ok"] else 1


def run_scenario(name: str, pixels: int = 400, max_iter: int = 500, threads: int = 1,
                 resolution: float = 1e-3):
    """Analysis report, image and unmet expectations of one scenario."""
    sc = SCENARIOS[name]
    fam = sc.family()
    res = analyze(fam, sc.angle, resolution=resolution, threads=threads, require_cauchy=False)
    report = res.to_json()
    report["scenario"] = sc.to_json()
    misses = check_expected(sc, report)
    report["expectations_met"] = not misses
    report["expectation_misses"] = misses
    vp = Viewport(sc.center, sc.width, pixels, pixels)
    img = render_julia(fam.limit, vp, max_iter, threads=threads)
    seq = res.sequence
    tail = list(zip(seq.traces, seq.landings))
    for k, (tr, zeta) in enumerate(tail):
        # earlier members fade towards grey
        f = (k + 1) / len(tail)
        col = tuple(int(round(c * f + 128 * (1 - f))) for c in (255, 30, 30))
        img = overlay_path(img, vp, list(tr.z) + [zeta], col)
    for arc in res.arcs:
        if arc.kind != "external_ray":
            img = overlay_path(img, vp, arc.samples, (40, 220, 255))
    return report, img


def cmd_figures(args) -> int:
    names = list(SCENARIOS) if args.scenario == "all" else [args.scenario]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = []
    for name in names:
        report, img = run_scenario(name, args.pixels, args.max_iter, _threads(args), args.resolution)
        report["config"] = dict(report.get("config", {}), **dict(_echo(args), scenario=name))
        (outdir / f"{name}.json").write_text(json.dumps(report, indent=2) + "\n")
        (outdir / f"{name}.ppm").write_bytes(ppm_bytes(img))
        summary.append({"scenario": name, "classification": report["classification"],
                        "N": report["N"], "M": report["M"], "Msharp": report["Msharp"],
                        "bb1_ok": report["bounds"]["bb1"]["ok"] if report["bounds"] else None,
                        "expectations_met": report["expectations_met"]})
    _emit(summary, None)
    return 0


# -- parser ------------------------------------------------------------------------

def _common(sp, out_help="write the JSON report here instead of stdout"):
    sp.add_argument("--config", help="JSON file of flag defaults, keyed by option name")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker processes (default: RAYLIMIT_THREADS or all cores)")
    if out_help:
        sp.add_argument("--out", help=out_help)


def _potential_flags(sp):
    sp.add_argument("--escape-radius", type=float, default=None)
    sp.add_argument("--iter-cap", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raylimit", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ray", help="trace an external ray")
    sp.add_argument("--poly", required=True, help='{"degree":d,"coeffs":[[re,im],...]} or @file')
    sp.add_argument("--angle", required=True, help="N/D")
    sp.add_argument("--smax", type=float, default=None)
    sp.add_argument("--smin", type=float, default=1e-9)
    sp.add_argument("--no-stop", action="store_true", help="trace to --smin even after landing")
    _potential_flags(sp)
    _common(sp)
    sp.set_defaults(func=cmd_ray)

    sp = sub.add_parser("julia", help="render the filled Julia set as PPM")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--center", default="0,0", help="re,im")
    sp.add_argument("--width", type=float, default=4.0)
    sp.add_argument("--pixels", type=int, nargs=2, default=[400, 400], metavar=("W", "H"))
    sp.add_argument("--max-iter", type=int, default=256)
    sp.add_argument("--ray", action="append", help="overlay the ray at this angle (repeatable)")
    sp.add_argument("--report", help="write a JSON summary here instead of stdout")
    _potential_flags(sp)
    _common(sp, out_help=None)
    sp.add_argument("--out", default="julia.ppm", help="PPM image path")
    sp.set_defaults(func=cmd_julia)

    sp = sub.add_parser("invariants", help="classify periodic points")
    sp.add_argument("--poly", required=True)
    sp.add_argument("--period", type=int, default=1)
    sp.add_argument("--point", default=None, help="re,im: classify only the point refined from here")
    _common(sp)
    sp.set_defaults(func=cmd_invariants)

    sp = sub.add_parser("hausdorff", help="chordal Hausdorff distance of two clouds")
    sp.add_argument("--a", required=True, help="cloud JSON or @file")
    sp.add_argument("--b", required=True, help="cloud JSON or @file")
    _common(sp)
    sp.set_defaults(func=cmd_hausdorff)

    sp = sub.add_parser("limit", help="analyse the limit of closed rays along a family")
    sp.add_argument("--family", required=True, help="family JSON or @file")
    sp.add_argument("--angle", required=True)
    sp.add_argument("--resolution", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=0.05)
    sp.add_argument("--schedule-len", type=int, default=None)
    sp.add_argument("--subsequence", type=int, nargs="+", default=None)
    sp.add_argument("--deep-levels", type=int, default=20000)
    sp.add_argument("--allow-not-cauchy", action="store_true",
                    help="analyse the last cloud even if the tail is not Cauchy (flagged)")
    _potential_flags(sp)
    _common(sp)
    sp.set_defaults(func=cmd_limit)

    sp = sub.add_parser("maxwild", help="build and verify a maximally wild polynomial")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--epsilon", type=float, default=1e-3)
    sp.add_argument("--safety", type=float, default=0.5)
    sp.add_argument("--resolution", type=float, default=1e-3)
    _common(sp)
    sp.set_defaults(func=cmd_maxwild)

    sp = sub.add_parser("figures", help="run a figure scenario: images and reports")
    sp.add_argument("scenario", choices=sorted(SCENARIOS) + ["all"])
    sp.add_argument("--outdir", default="figures")
    sp.add_argument("--pixels", type=int, default=400)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--resolution", type=float, default=1e-3)
    _common(sp, out_help=None)
    sp.set_defaults(func=cmd_figures)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subs = ap._subparsers._group_actions[0].choices
    cmd = next((a for a in argv if not a.startswith("-")), None)
    if not known.config or cmd not in subs:
        return ap.parse_args(argv)
    try:
        conf = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        ap.error(f"--config: {exc}")
    if not isinstance(conf, dict):
        ap.error("--config: expected a JSON object")
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    sp = subs[cmd]
    known_dests = {a.dest for a in sp._actions}
    unknown = sorted(k for k in conf if k not in known_dests)
    if unknown:
        ap.error(f"--config: unknown keys {unknown}")
    # config values become defaults, so flags on the command line still win
    sp.set_defaults(**conf)
    for a in sp._actions:
        if a.required and a.dest in conf:
            a.required = False
    return ap.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None and args.threads < 1:
        sys.stderr.write("raylimit: error: --threads: must be >= 1\n")
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"raylimit: error: {exc}\n")
        return 2
    except RayLimitError as exc:
        sys.stderr.write(json.dumps(exc.details()) + "\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(json.dumps({"error": "ValueError", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
