"""Command-line entry point: ``ribbonlab <command> ...``."""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .config import load_config
from .constructions import (ansatz_field, field_surface, psi_config, ruled_isometry,
                            immersion_strip_field)
from .geometry import build_euclidean_ribbon, codazzi_deficit, gauss_deficit, gauss_deficit_1
from .harness import (export, export_mesh, fit_exponent, read_records, run_sweep,
                      solve_3d, solve_reduced)
from .limit_energies import codazzi_i, e0_codazzi, e0_gauss, min_j, plate_energy, wide_j


def _write_rows(header, rows, path):
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)
    finally:
        if path:
            fh.close()


def _midline(geom, n=101):
    return np.linspace(0.0, geom.L, n)


def cmd_deficits(args):
    cfg = load_config(args.config)
    geom = cfg.geometry()
    x = _midline(geom, args.samples)
    dG = gauss_deficit(geom, x)
    dC = codazzi_deficit(geom, x)
    header = ["x1", "delta_G", "delta_C1", "delta_C2"]
    cols = [x, dG, dC[:, 0], dC[:, 1]]
    if np.max(np.abs(dG)) <= 1e-10:
        header.append("delta_G1")
        cols.append(gauss_deficit_1(geom, x))
    _write_rows(header, np.stack(cols, -1).tolist(), args.out)
    return 0


def _plate_field(obj, geom, w, state):
    if obj == "ruled":
        return immersion_strip_field(ruled_isometry(geom, state.alpha, state.beta, w), w)
    return ansatz_field(obj[-1], w, geom=geom, with_energy=False)


def cmd_limit_energy(args):
    cfg = load_config(args.config)
    geom, moduli, state = cfg.geometry(), cfg.moduli(), cfg.state()
    fn = args.functional
    if fn == "e0g":
        value = e0_gauss(geom, moduli, state)
    elif fn == "e0c":
        value = e0_codazzi(geom, moduli, state)
    elif fn == "plate":
        w = float(cfg.section("point")["w"])
        value = plate_energy(geom, w, _plate_field(args.object, geom, w, state), moduli)
    elif fn == "J":
        value = wide_j(geom, state.matrix, moduli)
    elif fn == "minJ":
        r = min_j(geom, moduli)
        value = r.value
        if args.csv_out:
            rows = [[x, M[0, 0], M[0, 1], M[1, 1], f] for x, M, f in zip(r.x, r.M, r.f)]
            _write_rows(["x1", "M11", "M12", "M22", "f_min"], rows, args.csv_out)
    else:
        value = codazzi_i(geom, state.alpha, state.beta, moduli)
    print(json.dumps({"functional": fn, "value": value}))
    return 0


def _surface_points(obj, geom, t, w, state, n1, n2):
    z1 = np.linspace(0.0, geom.L, n1)
    z2 = np.linspace(-w / 2, w / 2, n2)
    Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
    if obj in ("phi", "psi"):
        rib = build_euclidean_ribbon(geom, t, w)
        P = rib.phi(Z1, Z2)
        II = rib.second_form_phi(z1, 0 * z1)
        if obj == "psi":
            cfg3 = psi_config(geom, t, w, ribbon=rib)
            X = np.stack([Z1, Z2 / w, np.full_like(Z1, 0.5)], -1)
            top = cfg3.value(X)
            X[..., 2] = -0.5
            return [("top", top), ("bottom", cfg3.value(X))], II
        return [("mid", P)], II
    if obj == "ruled":
        R = ruled_isometry(geom, state.alpha, state.beta, w)
        return [("mid", R.value(Z1, Z2))], R.second_form(z1, 0 * z1)
    f = ansatz_field(obj[-1], w, geom=geom, with_energy=False)
    S, resid = field_surface(geom, w, f, n=(n1, n2))
    logging.getLogger(__name__).info("frame integration path residual %.3e", resid)
    return [("mid", S.value(Z1, Z2))], S.second_form(z1, 0 * z1)


def cmd_construct(args):
    cfg = load_config(args.config)
    geom, state = cfg.geometry(), cfg.state()
    pt = cfg.section("point")
    t, w = float(pt["t"]), float(pt["w"])
    surfaces, II = _surface_points(args.object, geom, t, w, state, args.n1, args.n2)
    paths = []
    for label, P in surfaces:
        path = args.obj_out if len(surfaces) == 1 else args.obj_out.replace(".obj", "") + f"_{label}.obj"
        paths.append(export_mesh(P, path))
    if args.csv_out:
        x = np.linspace(0.0, geom.L, args.n1)
        _write_rows(["x1", "II11", "II12", "II22"],
                    [[a, b[0, 0], b[0, 1], b[1, 1]] for a, b in zip(x, II)], args.csv_out)
    print(json.dumps({"object": args.object, "meshes": paths}))
    return 0


def cmd_minimize(args):
    cfg = load_config(args.config)
    geom = cfg.geometry()
    pt, sv = cfg.section("point"), cfg.section("solver")
    t, w = float(pt["t"]), float(pt["w"])
    if args.model == "3d":
        r = solve_3d(geom, t, w, tuple(sv["n3d"]), cfg.moduli(), maxiter=sv["maxiter"],
                     gtol=sv["gtol"], perturb=sv["perturb"])
    else:
        r = solve_reduced(geom, t, w, args.regime, n1=sv["n1"], n2=sv["n2"],
                          maxiter=sv["maxiter"], gtol=sv["gtol"], perturb=sv["perturb"])
        if args.obj_out:
            export_mesh(r.config.f, args.obj_out)
    print(json.dumps({"energy": r.energy, "converged": r.converged,
                      "iterations": r.iterations, "start": r.start, **r.extra}))
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    spec = cfg.sweep_spec()
    recs = run_sweep(spec)
    if args.out:
        export(recs, args.out, args.format)
    elif not spec.output:
        export(recs, "/dev/stdout", args.format)
    return 0


def cmd_fit(args):
    recs = read_records(args.records)
    fit = fit_exponent(recs, args.predictor)
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                      "stderr": fit.stderr, "n": fit.n}))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ribbonlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("deficits", help="midline Gauss and Codazzi deficits")
    s.add_argument("config")
    s.add_argument("--samples", type=int, default=101)
    s.add_argument("--out")
    s.set_defaults(func=cmd_deficits)

    s = sub.add_parser("limit-energy", help="evaluate a limit functional")
    s.add_argument("config")
    s.add_argument("--functional", required=True,
                   choices=["e0g", "e0c", "plate", "J", "minJ", "I"])
    s.add_argument("--object", default="ruled", choices=["ruled", "ansatz-d", "ansatz-b"],
                   help="surface whose plate energy is evaluated")
    s.add_argument("--csv-out", help="pointwise minimizers for minJ")
    s.set_defaults(func=cmd_limit_energy)

    s = sub.add_parser("construct", help="build an explicit surface and export it")
    s.add_argument("config")
    s.add_argument("--object", required=True,
                   choices=["phi", "psi", "ruled", "ansatz-d", "ansatz-b"])
    s.add_argument("--obj-out", required=True)
    s.add_argument("--csv-out")
    s.add_argument("--n1", type=int, default=81)
    s.add_argument("--n2", type=int, default=9)
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("minimize", help="minimize the reduced or 3D energy at one (t, w)")
    s.add_argument("config")
    s.add_argument("--model", choices=["reduced", "3d"], default="reduced")
    s.add_argument("--regime", choices=["narrow", "wide"], default="narrow")
    s.add_argument("--obj-out")
    s.set_defaults(func=cmd_minimize)

    s = sub.add_parser("sweep", help="run a (t, w) sweep")
    s.add_argument("config")
    s.add_argument("--out")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit", help="fit a scaling exponent to sweep records")
    s.add_argument("records")
    s.add_argument("--predictor", choices=["w", "t"], default="w")
    s.set_defaults(func=cmd_fit)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
