"""Command line entry point: ``verify-calibration``, ``gronwall`` and ``evolve``.

Exit status: 0 when every check passed, 1 when a check failed, 2 when an
input file is missing or unreadable, 3 when a scene is invalid.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import geometry as geo
from .calibration_contact import aux_length_identity
from .calibration_global import GlobalCalibration, resolve_localization, verify_extension_suite
from .functionals import relative_entropy
from .reports import CheckResult, write_csv, write_summary
from .scene import SceneError, load_scene
from .transport_sim import PRESETS, area_drift, evolve, make_pair, perimeter_rate_check
from .weights import WeightField, verify_weight_suite

OUT_ENV = "ARTIFACT_OUT_DIR"
EXIT_OK, EXIT_FAILED, EXIT_IO, EXIT_SCENE = 0, 1, 2, 3


class DegenerateFit(RuntimeError):
    """The reference error vanishes initially but not later."""


def _out_dir(args):
    path = Path(args.out or os.environ.get(OUT_ENV) or "artifact-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args):
    if not Path(args.scene).is_file():
        raise FileNotFoundError(f"scene file not found: {args.scene}")
    return load_scene(args.scene)


def _time_grid(horizon, dt=None, points=None):
    if dt is not None:
        n = int(round(horizon / dt))
        return np.linspace(0.0, n * dt, n + 1)
    return np.linspace(0.0, horizon, points or 3)


# ---------------------------------------------------------------------------
# verify-calibration
# ---------------------------------------------------------------------------

def aux_identity_check(scene, times, n_samples, seed, radius):
    rng = np.random.default_rng(seed)
    worst = 0.0
    count = 0
    for t in times:
        for f in geo.locate_contact_points(scene, float(t)):
            pts = geo.sample_interior(scene.domain, n_samples, rng)
            pts = pts[np.linalg.norm(pts - f.c, axis=1) < radius]
            count += len(pts)
            worst = max(worst, *aux_length_identity(scene, (f.interface_index, f.end), float(t), pts))
    return CheckResult("aux_length_identity", worst <= 1e-12, worst, 1e-12, {"samples": count})


def _prefixed(suite, check):
    return CheckResult(f"{suite}.{check.name}", check.passed, check.value, check.threshold, check.detail)


def run_verify(args):
    scene = _load(args)
    horizon = scene.horizon if args.horizon is None else args.horizon
    times = _time_grid(horizon, args.dt, args.times)
    loc = resolve_localization(scene, times)
    cal = GlobalCalibration(scene, loc)
    checks, report, constants = verify_extension_suite(
        cal, times, n_samples=args.samples, fd_step=args.fd_step, seed=args.seed)
    w_checks, w_report, w_constants = verify_weight_suite(
        WeightField(scene, loc), times, n_samples=args.samples, seed=args.seed)
    checks.append(aux_identity_check(scene, times, args.samples, args.seed, loc.r_hat))
    checks = [_prefixed("extension", c) for c in checks] + [_prefixed("weight", c) for c in w_checks]
    rows = [("extension",) + r for r in report.rows()] + [("weight",) + r for r in w_report.rows()]
    out = _out_dir(args)
    write_csv(out / "samples.csv", ("suite",) + report.columns, rows)
    passed = all(c.passed for c in checks)
    write_summary(out / "summary.json", {
        "command": "verify-calibration", "scene": scene.describe(), "times": times.tolist(),
        "localization": {"r_hat": loc.r_hat, "delta": loc.delta, "r_hat_c": list(loc.r_hat_c)},
        "constants": {**constants, **w_constants}, "checks": [c.as_dict() for c in checks],
        "passed": passed})
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value} (threshold {c.threshold})")
    return EXIT_OK if passed else EXIT_FAILED


# ---------------------------------------------------------------------------
# gronwall
# ---------------------------------------------------------------------------

def fit_gronwall(times, values, reference, tol=1e-10):
    """Smallest C >= 0 with values(t) <= C exp(C t) reference at every t.

    Returns ``(C, trivial)``; ``trivial`` marks the case of a vanishing
    reference with vanishing values.
    """
    times, values = np.asarray(times), np.asarray(values)
    if reference <= tol:
        if np.all(values <= tol):
            return 0.0, True
        raise DegenerateFit(f"reference {reference:.3g} vanishes but the error reaches "
                            f"{np.max(values):.3g}")

    def excess(c):
        return float(np.max(values - c * np.exp(c * times) * reference))

    if excess(0.0) <= 0.0:
        return 0.0, False
    hi = 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            return np.inf, False
    c = brentq(excess, 0.0, hi, xtol=1e-14)
    while excess(c) > 0.0:
        c = np.nextafter(c, np.inf) * (1.0 + 1e-15)
    return float(c), False


def gronwall_series(pair, times):
    rows = []
    for t in times:
        rep = relative_entropy(pair, float(t), coercivity_C=None)
        rows.append(rep.row())
    return rows


def run_gronwall(args):
    horizon = 0.5 if args.horizon is None else args.horizon
    times = _time_grid(horizon, args.dt, args.times or 101)
    pair = make_pair(args.preset, args.eps, horizon=horizon, simulate=args.simulate)
    rows = gronwall_series(pair, times)
    E = np.array([r["E"] for r in rows])
    Ev = np.array([r["E_vol"] for r in rows])
    c_e, trivial_e = fit_gronwall(times, E, E[0])
    c_v, trivial_v = fit_gronwall(times, Ev, E[0] + Ev[0])
    for r, t in zip(rows, times):
        r["envelope_E"] = c_e * np.exp(c_e * t) * E[0]
        r["envelope_E_vol"] = c_v * np.exp(c_v * t) * (E[0] + Ev[0])
    ok_e = bool(np.isfinite(c_e) and np.all(E <= np.array([r["envelope_E"] for r in rows]) + 1e-10))
    ok_v = bool(np.isfinite(c_v) and np.all(Ev <= np.array([r["envelope_E_vol"] for r in rows]) + 1e-10))
    ratio = E / E[0] if E[0] > 0 else np.zeros_like(E)
    checks = [CheckResult("gronwall_E", ok_e, c_e, "finite", {"trivial": trivial_e}),
              CheckResult("gronwall_E_vol", ok_v, c_v, "finite", {"trivial": trivial_v})]
    out = _out_dir(args)
    columns = list(rows[0].keys())
    write_csv(out / "gronwall.csv", columns, rows)
    write_summary(out / "summary.json", {
        "command": "gronwall", "preset": args.preset, "eps": args.eps, "horizon": horizon,
        "points": len(times), "C_E": c_e, "C_E_vol": c_v,
        "max_relative_change_E": float(np.max(np.abs(ratio - 1.0))) if E[0] > 0 else 0.0,
        "monotone_envelope_E": np.maximum.accumulate(E).tolist(),
        "checks": [c.as_dict() for c in checks], "passed": ok_e and ok_v})
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: C = {c.value}")
    return EXIT_OK if ok_e and ok_v else EXIT_FAILED


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------

def run_evolve(args):
    scene = _load(args)
    horizon = scene.horizon if args.horizon is None else args.horizon
    times = _time_grid(horizon, args.dt if args.dt is not None else horizon / 10)
    iface = scene.interfaces[0]
    traj = evolve(iface.initial, scene.velocity, times, domain=scene.domain, closed=iface.closed,
                  n_markers=args.markers)
    drift, _ = area_drift(traj)
    gap = max(traj.boundary_gap(k) for k in range(len(times)))
    angle = max(traj.contact_angle_deviation(k) for k in range(len(times)))
    summary = {"command": "evolve", "scene": scene.describe(), "times": len(times),
               "area_drift": drift, "boundary_gap": gap, "max_angle_deviation_deg": angle,
               "redistributions": traj.redistributions}
    checks = [CheckResult("area_conservation", drift <= 1e-7, drift, 1e-7),
              CheckResult("markers_on_boundary", gap <= 1e-8, gap, 1e-8)]
    if len(times) >= 3:
        pr = perimeter_rate_check(traj)
        summary["perimeter_rate_residual"] = pr["max_residual"]
    out = _out_dir(args)
    write_csv(out / "trajectory.csv", ("t", "marker", "x", "y"), traj.rows())
    summary["checks"] = [c.as_dict() for c in checks]
    summary["passed"] = all(c.passed for c in checks)
    write_summary(out / "summary.json", summary)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value} (threshold {c.threshold})")
    return EXIT_OK if summary["passed"] else EXIT_FAILED


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scene=True):
        if scene:
            p.add_argument("--scene", required=True, help="JSON scene file")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./artifact-out)")
        p.add_argument("--horizon", type=float, help="final time (default from the scene)")
        p.add_argument("--dt", type=float, help="time step of the sampling grid")
        p.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("verify-calibration", help="run the extension and weight checks")
    common(v)
    v.add_argument("--samples", type=int, default=10_000, help="random samples per suite")
    v.add_argument("--fd-step", type=float, default=1e-5)
    v.add_argument("--times", type=int, default=3, help="number of time samples without --dt")
    v.set_defaults(func=run_verify)

    g = sub.add_parser("gronwall", help="error time series and fitted stability constants")
    common(g, scene=False)
    g.add_argument("--preset", choices=sorted(PRESETS), default="shear")
    g.add_argument("--eps", type=float, default=0.05, help="rotation of the weak phase")
    g.add_argument("--times", type=int, default=None, help="grid points without --dt (101)")
    g.add_argument("--simulate", action="store_true", help="transport the weak phase by markers")
    g.add_argument("--samples", type=int, default=None, help=argparse.SUPPRESS)
    g.add_argument("--fd-step", type=float, default=None, help=argparse.SUPPRESS)
    g.set_defaults(func=run_gronwall)

    e = sub.add_parser("evolve", help="transport the scene interface and write markers")
    common(e)
    e.add_argument("--markers", type=int, default=512)
    e.set_defaults(func=run_evolve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SceneError, geo.GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENE
    except DegenerateFit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    print(f"finished in {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
