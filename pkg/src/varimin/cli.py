"""Command line entry points.

Subcommands: curvature (estimate and export curvature fields), check
(evaluate the bound suite on a mesh), minimize (constrained descent from
a run config), report (plot-ready radial profile and density CSVs).

Exit codes: 0 success, 1 a checked bound failed, 2 unusable input,
3 a minimization run aborted.  Every command writes a manifest.json
recording inputs, outputs, seed, version and wall clock time; the wall
clock lives only there so the data files stay byte-identical between
reruns.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, io
from .bounds import (
    check_bounds,
    check_local_monotonicity,
    check_lower_density,
    density_estimate,
    isoperimetric_ratio,
    radial_profile,
    radial_profile_defect,
)
from .energy import EnergySpec, MinimizeOptions, minimize_energy, sphericity
from .firstvar import (
    energy_integral,
    mean_curvature_kernel,
    mean_curvature_mesh,
    relative_mean_curvature,
)
from .ambient import Euclidean, ambient_from_config
from .recovery import recover_curvature_tensor
from .varifold import support_diameter, varifold_from_mesh

EXIT_OK = 0
EXIT_BOUND_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_ABORTED = 3


def _fmt(x):
    return f"{float(x):.17g}"


def _parse_ambient(text):
    """Ambient space from a shorthand, inline JSON, or a JSON file path."""
    if text.startswith("euclidean"):
        return Euclidean(int(text[len("euclidean") :] or 3))
    if text.startswith("sphere"):
        body = text[len("sphere") :]
        r = 1.0
        if ":" in body:
            body, tail = body.split(":", 1)
            r = float(tail.split("=", 1)[1])
        return ambient_from_config({"kind": "sphere", "n": int(body or 2), "r": r})
    if text.lstrip().startswith("{"):
        return ambient_from_config(json.loads(text))
    if os.path.exists(text):
        with open(text) as handle:
            return ambient_from_config(json.load(handle))
    raise ValueError(f"cannot parse ambient {text!r}")


def _load_varifold(path):
    mesh = io.read_mesh(path)
    return varifold_from_mesh(mesh), mesh


def _estimate(v, estimator, eps):
    if estimator == "kernel":
        return mean_curvature_kernel(v, eps)
    return mean_curvature_mesh(v)


def _manifest(command, out_dir, inputs, outputs, seed=0, config="", started=None):
    manifest = io.RunManifest(
        command=command,
        config=config,
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs],
        seed=seed,
        version=__version__,
        wall_clock_s=0.0 if started is None else time.perf_counter() - started,
    )
    manifest.write(os.path.join(out_dir, "manifest.json"))


# ---------------------------------------------------------------------------
# curvature


def _cmd_curvature(args):
    started = time.perf_counter()
    v, _ = _load_varifold(args.mesh)
    ambient = _parse_ambient(args.ambient)
    field = _estimate(v, "kernel" if args.estimator == "kernel" else "mesh", args.eps)
    if not isinstance(ambient, Euclidean):
        field = relative_mean_curvature(v, ambient, field)
    values = field.relative if field.relative is not None else field.values

    print(f"atoms = {len(v)}")
    print(f"mass = {_fmt(v.w.sum())}")
    print(f"energy p={args.p:g} = {_fmt(energy_integral(v, values, args.p))}")

    if args.estimator == "both":
        other = mean_curvature_kernel(v, args.eps)
        both_interior = field.interior & other.interior
        deviation = np.linalg.norm(field.values - other.values, axis=1)
        worst = float(deviation[both_interior].max()) if both_interior.any() else float("nan")
        print("cross-check (mesh vs kernel, interior atoms):")
        print(f"  max atomwise deviation = {_fmt(worst)}")
        print(f"  kernel energy p={args.p:g} = {_fmt(energy_integral(v, other.values, args.p))}")

    os.makedirs(args.out, exist_ok=True)
    curvature_path = os.path.join(args.out, "curvature.jsonl")
    io.write_curvature(curvature_path, field)
    outputs = [curvature_path]

    if args.tensor:
        tensor = recover_curvature_tensor(v, args.eps)
        tensor_path = os.path.join(args.out, "tensor.jsonl")
        io.write_tensor(tensor_path, tensor)
        outputs.append(tensor_path)
        print(f"tensor residual (median) = {_fmt(np.median(tensor.residual))}")

    _manifest("curvature", args.out, [args.mesh], outputs, started=started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check


def _applicable(row):
    return not row.note.startswith("inapplicable")


def _print_rows(rows):
    print(f"{'lemma':<28} {'lhs':>13} {'rhs':>13} {'margin':>13}  pass")
    for row in rows:
        print(
            f"{row.name:<28} {row.lhs:>13.6g} {row.rhs:>13.6g} {row.margin:>13.6g}  "
            + ("yes" if row.passed else ("n/a" if not _applicable(row) else "NO"))
        )


def _cmd_check(args):
    started = time.perf_counter()
    v, _ = _load_varifold(args.mesh)
    field = _estimate(v, args.estimator, args.eps)
    values = field.values * args.field_scale

    centroid = np.average(v.x, axis=0, weights=v.w)
    center = v.x[np.argmin(np.linalg.norm(v.x - centroid, axis=1))]
    diameter = support_diameter(v)
    rho = args.rho if args.rho is not None else diameter / 4.0

    os.makedirs(args.out, exist_ok=True)
    p_values = [float(tok) for tok in args.p.split(",")]
    failed = False
    warned_disconnected = False
    outputs = []
    for p in p_values:
        report = check_bounds(v, values, p)
        report.rows.append(check_lower_density(v, values, center, rho, p))
        if args.sigma is not None:
            report.rows.append(
                check_local_monotonicity(v, values, center, args.sigma, rho, p)
            )
        suffix = f"_p{p:g}" if len(p_values) > 1 else ""
        csv_path = os.path.join(args.out, f"bounds{suffix}.csv")
        report.to_csv(csv_path)
        outputs.append(csv_path)
        print(f"p = {p:g}")
        _print_rows(report.rows)
        for row in report.rows:
            if not row.passed and _applicable(row):
                failed = True
            if not _applicable(row) and "connected" in row.note and not warned_disconnected:
                print(f"warning: {row.note}", file=sys.stderr)
                warned_disconnected = True

    _manifest("check", args.out, [args.mesh], outputs, started=started)
    return EXIT_BOUND_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# minimize


def _write_monitors(path, trace):
    columns = ("mass", "mass_lower", "diameter", "diameter_lower", "hausdorff", "weak_gap")
    with open(path, "w") as handle:
        handle.write("iteration," + ",".join(columns) + "\n")
        for k in range(len(trace.energy)):
            row = ",".join(_fmt(getattr(trace, name)[k]) for name in columns)
            handle.write(f"{k},{row}\n")


def _cmd_minimize(args):
    started = time.perf_counter()
    config = io.load_run_config(args.config)
    energy_cfg = dict(config["energy"])
    spec = EnergySpec(
        form=energy_cfg.get("form", "H"),
        p=float(energy_cfg["p"]),
        C=float(energy_cfg.get("C", 1.0)),
        integrand=energy_cfg.get("integrand", "power"),
        delta=float(energy_cfg.get("delta", 0.0)),
        m=int(energy_cfg.get("m", 2)),
    )
    ambient = io.build_ambient(config)
    subset = io.build_subset(config, ambient)
    mesh = io.read_mesh(config["mesh_path"])
    options = MinimizeOptions(
        max_iter=int(config["max_iter"]),
        tol=float(config["tol"]),
        remesh=bool(config.get("remesh", False)),
    )

    out_dir = args.out or os.path.join(os.path.dirname(os.path.abspath(args.config)), "run")
    os.makedirs(out_dir, exist_ok=True)

    result = minimize_energy(mesh, spec, subset, options)

    trace_path = os.path.join(out_dir, "trace.csv")
    result.trace.to_csv(trace_path)
    mesh_path = os.path.join(out_dir, "final.off")
    io.write_mesh(mesh_path, result.mesh)
    monitors_path = os.path.join(out_dir, "monitors.csv")
    _write_monitors(monitors_path, result.trace)

    final_v = varifold_from_mesh(result.mesh)
    summary = {
        "final_energy": result.final_energy,
        "final_mass": float(final_v.w.sum()),
        "final_diameter": support_diameter(final_v),
        "final_sphericity": sphericity(result.mesh),
        "bounds_ok": result.monitors_ok,
        "iterations": result.iterations,
        "stop_reason": result.stop_reason,
        "seed": int(config["seed"]),
    }
    summary_path = os.path.join(out_dir, "summary.json")
    io.write_summary(summary_path, summary)

    _manifest(
        "minimize",
        out_dir,
        [args.config, config["mesh_path"]],
        [trace_path, mesh_path, monitors_path, summary_path],
        seed=int(config["seed"]),
        config=str(args.config),
        started=started,
    )
    print(f"stop = {result.stop_reason} after {result.iterations} iterations")
    print(f"final energy = {_fmt(result.final_energy)}")
    print(f"monitors ok = {'yes' if result.monitors_ok else 'NO'}")
    if result.stop_reason == "degenerate_mesh":
        print("run aborted: mesh degenerated; trace preserved", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def _cmd_report(args):
    started = time.perf_counter()
    v, _ = _load_varifold(args.mesh)
    field = mean_curvature_mesh(v)

    centroid = np.average(v.x, axis=0, weights=v.w)
    if args.center_atom >= 0:
        center = v.x[args.center_atom]
    else:
        center = v.x[np.argmin(np.linalg.norm(v.x - centroid, axis=1))]
    diameter = support_diameter(v)
    if args.radii:
        start, stop, count = args.radii.split(":")
        radii = np.linspace(float(start), float(stop), int(count))
    else:
        radii = np.linspace(0.25 * diameter, 0.75 * diameter, 33)

    profile = radial_profile(v, field.values, center, radii)
    defect = radial_profile_defect(profile)
    os.makedirs(args.out, exist_ok=True)
    profile_path = os.path.join(args.out, "radial_profile.csv")
    with open(profile_path, "w") as handle:
        handle.write("rho,ball_mass,scaled_mass,energy_window,pay_term,defect\n")
        for k in range(len(radii)):
            cells = [
                radii[k],
                profile.I[k],
                profile.I[k] / radii[k] ** profile.m,
                profile.J[k],
                profile.L[k],
                defect[k] if k < len(defect) else float("nan"),
            ]
            handle.write(",".join(_fmt(c) for c in cells) + "\n")

    density = density_estimate(v, center, radii)
    density_path = os.path.join(args.out, "density.csv")
    with open(density_path, "w") as handle:
        handle.write("radius,mass_ratio\n")
        for r, ratio in zip(density.radii, density.ratios):
            handle.write(f"{_fmt(r)},{_fmt(ratio)}\n")

    spec = EnergySpec(form="H", p=args.p)
    print(f"density at center = {_fmt(density.value)}")
    print(f"isoperimetric ratio p={args.p:g} = {_fmt(isoperimetric_ratio(v, field.values, spec))}")
    _manifest("report", args.out, [args.mesh], [profile_path, density_path], started=started)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="varimin",
        description="Curvature fields, bound checks, and constrained curvature-energy descent for discrete varifolds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curvature", help="estimate curvature and export per-atom fields")
    c.add_argument("mesh")
    c.add_argument("--ambient", default="euclidean3")
    c.add_argument("--p", type=float, default=3.0)
    c.add_argument("--estimator", choices=("mesh", "kernel", "both"), default="mesh")
    c.add_argument("--eps", type=float, default=0.15)
    c.add_argument("--tensor", action="store_true", help="also recover the full curvature tensor")
    c.add_argument("--out", default=".")
    c.set_defaults(func=_cmd_curvature)

    k = sub.add_parser("check", help="evaluate the bound suite and write bounds CSVs")
    k.add_argument("mesh")
    k.add_argument("--p", default="3.0", help="comma separated exponents")
    k.add_argument("--estimator", choices=("mesh", "kernel"), default="mesh")
    k.add_argument("--eps", type=float, default=0.15)
    k.add_argument("--rho", type=float, default=None)
    k.add_argument("--sigma", type=float, default=None)
    k.add_argument("--field-scale", type=float, default=1.0,
                   help="scale the estimated field (0 gives a negative control)")
    k.add_argument("--out", default=".")
    k.set_defaults(func=_cmd_check)

    m = sub.add_parser("minimize", help="run constrained descent from a JSON config")
    m.add_argument("config")
    m.add_argument("--out", default=None)
    m.set_defaults(func=_cmd_minimize)

    r = sub.add_parser("report", help="emit plot-ready radial profile and density CSVs")
    r.add_argument("mesh")
    r.add_argument("--p", type=float, default=3.0)
    r.add_argument("--center-atom", type=int, default=-1)
    r.add_argument("--radii", default=None, help="start:stop:count")
    r.add_argument("--out", default=".")
    r.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
