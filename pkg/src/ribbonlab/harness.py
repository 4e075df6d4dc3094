"""Experiment orchestration: point solvers, (t, w) sweeps, exponent fits, export."""

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .constructions import (ansatz_field, immersion_strip_field, psi_config,
                            recovery_narrow_codazzi, recovery_narrow_gauss, ruled_isometry)
from .elastic_sim import (Config3, Grid3, SurfaceConfig, SurfaceGrid, energy3d,
                          fundamental_forms, lift_planar, reduced_energy, reduced_target,
                          sample_map)
from .errors import ConstructionError, DomainError, GeometryError
from .geometry import build_euclidean_ribbon, planar_immersion, preset
from .limit_energies import min_j, plate_energy
from .optim import minimize
from .quadratic_forms import IsotropicModuli

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "w", "energy", "e_div_t2", "e_div_w4", "e_div_t2w2", "converged",
               "iters", "grid", "seed")


# ---------------------------------------------------------------- initial surfaces

def init_phi(geom, grid):
    """Mid-surface Phi of the associated Euclidean ribbon (narrow start)."""
    rib = build_euclidean_ribbon(geom)
    Z1, Z2 = grid.mesh()
    return SurfaceConfig(grid, rib.phi(Z1, Z2))


def init_ruled(geom, grid, alpha=0.0, beta=0.0):
    R = ruled_isometry(geom, alpha, beta, grid.w)
    Z1, Z2 = grid.mesh()
    return SurfaceConfig(grid, R.value(Z1, Z2))


def init_cylinder(geom, grid, curvature, direction):
    """Planar strip wrapped isometrically onto a cylinder bending along `direction`."""
    chi = planar_immersion(geom, grid.w)
    Z1, Z2 = grid.mesh()
    p = chi(Z1, Z2)
    u = np.asarray(direction, float) / np.linalg.norm(direction)
    v = np.array([-u[1], u[0]])
    a, b = p @ u, p @ v
    k = float(curvature)
    X, Z = np.sin(k * a) / k, (1 - np.cos(k * a)) / k
    pts = X[..., None] * np.r_[u, 0] + b[..., None] * np.r_[v, 0] + Z[..., None] * np.r_[0, 0, 1]
    return SurfaceConfig(grid, pts)


def _rank_one_start(geom):
    """Mean minimizer of the wide-ribbon pointwise problem, as (curvature, direction)."""
    r = min_j(geom)
    M = np.mean(r.M, axis=0)
    lam, V = np.linalg.eigh(M)
    k = int(np.argmax(np.abs(lam)))
    if abs(lam[k]) < 1e-8:
        return None
    return float(lam[k]), V[:, k]


def wide_starts(geom, grid):
    """Flat strip, ruled isometry and rank-one cylinder when they are available."""
    starts = [("flat", lift_planar(geom, grid))]
    try:
        starts.append(("ruled", init_ruled(geom, grid)))
    except (DomainError, ConstructionError):
        pass
    II0 = geom.II0(np.linspace(0, geom.L, 33))
    if np.max(np.abs(np.linalg.det(II0))) > 1e-10:
        ro = _rank_one_start(geom)
        if ro is not None:
            starts.append(("cylinder", init_cylinder(geom, grid, *ro)))
    return starts


def midline_gap(geom, f):
    """RMS over x1 of |II_f - II0| along the discrete midline."""
    _, II, _, _ = fundamental_forms(f)
    n2 = f.grid.n2
    mid = II[:, n2 // 2] if n2 % 2 else 0.5 * (II[:, n2 // 2 - 1] + II[:, n2 // 2])
    x1 = f.grid.axes[0]
    d = mid - geom.II0(x1)
    return float(np.sqrt(np.mean(np.sum(d * d, axis=(-1, -2)))))


# ---------------------------------------------------------------- point solvers

@dataclass
class PointResult:
    energy: float
    converged: bool
    iterations: int
    start: str
    config: object = None
    extra: dict = field(default_factory=dict)


def solve_reduced(geom, t, w, regime="narrow", n1=41, n2=9, maxiter=5000, gtol=1e-9,
                  perturb=0.0, seed=0):
    """Minimize the reduced shell energy from the regime's starting surfaces."""
    grid = SurfaceGrid(n1, n2, w, geom.L)
    target = reduced_target(geom, grid)
    rng = np.random.default_rng(seed)

    def obj(x):
        return reduced_energy(geom, t, w, SurfaceConfig(grid, x), gradient=True, target=target)

    starts = [("phi", init_phi(geom, grid))] if regime == "narrow" else wide_starts(geom, grid)
    best = None
    for label, f0 in starts:
        x0 = f0.f + perturb * w * rng.standard_normal(f0.f.shape) if perturb else f0.f
        try:
            r = minimize(obj, x0, gtol=gtol, maxiter=maxiter)
        except GeometryError as exc:
            log.warning("start %s failed: %s", label, exc)
            continue
        log.info("w=%.4g t=%.4g start=%s energy=%.6e iters=%d", w, t, label, r.energy,
                 r.iterations)
        if best is None or r.energy < best.energy:
            best = PointResult(r.energy, r.converged, r.iterations, label,
                               SurfaceConfig(grid, r.x))
    if best is None:
        raise GeometryError("every starting surface degenerated")
    best.extra["midline_gap"] = midline_gap(geom, best.config)
    best.extra["start"] = best.start
    return best


def solve_3d(geom, t, w, n=(12, 4, 3), moduli=None, maxiter=2000, gtol=1e-9, perturb=0.0,
             seed=0):
    """Minimize the discrete 3D energy on a small trilinear grid, starting from Psi_t."""
    grid = Grid3(*n, L=geom.L)
    rib = build_euclidean_ribbon(geom, t, w)
    u0 = sample_map(psi_config(geom, t, w, ribbon=rib), grid).u
    if perturb:
        u0 = u0 + perturb * t * np.random.default_rng(seed).standard_normal(u0.shape)

    def obj(u):
        return energy3d(geom, moduli, t, w, Config3(grid, u), gradient=True, ribbon=rib)

    r = minimize(obj, u0, gtol=gtol, maxiter=maxiter)
    return PointResult(r.energy, r.converged, r.iterations, "psi", Config3(grid, r.x))


def evaluate_construction(geom, t, w, construction, moduli=None):
    """Energy of an explicit construction: 3D quadrature or plate functional."""
    if construction == "psi":
        return energy3d(geom, moduli, t, w, psi_config(geom, t, w))
    if construction == "recovery-gauss":
        return energy3d(geom, moduli, t, w, recovery_narrow_gauss(geom, moduli, t=t, w=w))
    if construction == "recovery-codazzi":
        return energy3d(geom, moduli, t, w, recovery_narrow_codazzi(geom, moduli, t=t, w=w))
    if construction == "ruled":
        R = ruled_isometry(geom, 0.0, 0.0, w)
        return plate_energy(geom, w, immersion_strip_field(R, w), moduli=moduli)
    if construction in ("ansatz-d", "ansatz-b"):
        return ansatz_field(construction[-1], w, geom=geom, moduli=moduli).energy
    raise ValueError(f"unknown construction {construction!r}")


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepSpec:
    geometry: str
    params: dict = field(default_factory=dict)
    regime: str = "narrow"          # narrow | wide | plate
    exponent: float = 1.5           # t = w**exponent (unused in plate mode)
    ws: tuple = (0.1, 0.0669, 0.0447, 0.0299, 0.02)
    evaluator: str = "reduced"      # reduced | energy3d | minimize3d | plate
    construction: str = None
    moduli: dict = field(default_factory=lambda: {"mu": 1.0, "lam": 0.0})
    solver: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output: str = None

    def __post_init__(self):
        self.ws = tuple(float(w) for w in self.ws)
        if len(self.ws) == 0 or any(b >= a for a, b in zip(self.ws, self.ws[1:])):
            raise ValueError("w list must be nonempty and strictly decreasing")
        if any(w <= 0 for w in self.ws):
            raise ValueError("widths must be positive")
        if self.regime == "narrow" and not 1.0 < self.exponent < 2.0:
            raise ValueError("narrow paths need t = w^p with 1 < p < 2")
        if self.regime == "wide" and not self.exponent > 2.0:
            raise ValueError("wide paths need t = w^q with q > 2")
        if self.regime not in ("narrow", "wide", "plate"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "plate" and self.evaluator != "plate":
            raise ValueError("plate regime evaluates the plate functional directly")
        if self.evaluator in ("energy3d", "plate") and not self.construction:
            raise ValueError(f"evaluator {self.evaluator!r} needs a construction")

    def t_of(self, w):
        return float("nan") if self.regime == "plate" else float(w ** self.exponent)

    def key(self):
        d = asdict(self)
        for k in ("ws", "workers", "output"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def grid_label(self):
        s = self.solver
        if self.evaluator == "reduced":
            return f"{s.get('n1', 41)}x{s.get('n2', 9)}"
        if self.evaluator == "minimize3d":
            return "x".join(str(v) for v in s.get("n3d", (12, 4, 3)))
        return "quadrature"


@dataclass
class SweepRecord:
    t: float
    w: float
    energy: float
    e_div_t2: float
    e_div_w4: float
    e_div_t2w2: float
    converged: bool
    iters: int
    grid: str
    seed: int
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, t, w, energy, converged, iters, grid, seed, extra=None, plate=False):
        t, w, e = float(t), float(w), float(energy)
        if plate:
            # the plate functional is already the t^2 coefficient
            n_t2, n_w4, n_t2w2 = e, float("nan"), e / w ** 2
        else:
            n_t2, n_w4, n_t2w2 = e / t ** 2, e / w ** 4, e / (t * w) ** 2
        return cls(t, w, e, n_t2, n_w4, n_t2w2, bool(converged), int(iters), grid, int(seed),
                   dict(extra or {}))

    def row(self):
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _point_seed(seed, w):
    return int(seed) * 1000003 + int(round(w * 1e9)) % 1000003


def _run_point(spec, w):
    geom = preset(spec.geometry, **spec.params)
    moduli = IsotropicModuli(**spec.moduli)
    t = spec.t_of(w)
    s = dict(spec.solver)
    try:
        if spec.evaluator == "reduced":
            r = solve_reduced(geom, t, w, spec.regime, n1=s.get("n1", 41), n2=s.get("n2", 9),
                              maxiter=s.get("maxiter", 5000), gtol=s.get("gtol", 1e-9),
                              perturb=s.get("perturb", 0.0), seed=_point_seed(spec.seed, w))
            return SweepRecord.build(t, w, r.energy, r.converged, r.iterations,
                                     spec.grid_label(), spec.seed, r.extra)
        if spec.evaluator == "minimize3d":
            r = solve_3d(geom, t, w, tuple(s.get("n3d", (12, 4, 3))), moduli,
                         maxiter=s.get("maxiter", 2000), gtol=s.get("gtol", 1e-9),
                         perturb=s.get("perturb", 0.0), seed=_point_seed(spec.seed, w))
            return SweepRecord.build(t, w, r.energy, r.converged, r.iterations,
                                     spec.grid_label(), spec.seed)
        e = evaluate_construction(geom, t, w, spec.construction, moduli)
        return SweepRecord.build(t, w, e, True, 0, spec.grid_label(), spec.seed,
                                 plate=spec.regime == "plate")
    except (DomainError, GeometryError, ConstructionError, ValueError) as exc:
        log.warning("sweep point w=%g failed: %s", w, exc)
        return SweepRecord(t, w, float("nan"), float("nan"), float("nan"), float("nan"),
                           False, 0, spec.grid_label(), spec.seed, {"error": str(exc)})


def _cache_path(spec):
    return None if not spec.output else os.path.join(spec.output, "records.json")


def _load_cache(spec):
    path = _cache_path(spec)
    if not path or not os.path.exists(path):
        return {}
    with open(path) as fh:
        data = json.load(fh)
    key = spec.key()
    return {float(r["w"]): SweepRecord(**r) for r in data.get("records", [])
            if data.get("spec") == key and "error" not in r.get("extra", {})}


def run_sweep(spec):
    """Evaluate every width of the sweep, reusing cached records of the same spec."""
    cached = _load_cache(spec)
    todo = [w for w in spec.ws if w not in cached]
    if spec.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            fresh = list(ex.map(_run_point, [spec] * len(todo), todo))
    else:
        fresh = [_run_point(spec, w) for w in todo]
    recs = dict(cached)
    recs.update({r.w: r for r in fresh})
    out = sorted((recs[w] for w in spec.ws), key=lambda r: (r.w, r.t))
    if spec.output:
        os.makedirs(spec.output, exist_ok=True)
        with open(_cache_path(spec), "w") as fh:
            json.dump({"spec": spec.key(), "records": [asdict(r) for r in out]}, fh,
                      indent=1, sort_keys=True)
        export(out, os.path.join(spec.output, "records.csv"), "csv")
    return out


# ---------------------------------------------------------------- fits and export

@dataclass
class FitResult:
    slope: float
    intercept: float
    r2: float
    stderr: float
    n: int


def fit_exponent(records, predictor="w"):
    """Least-squares slope of log(energy) against log(w) or log(t)."""
    if predictor not in ("w", "t"):
        raise ValueError("predictor must be 'w' or 't'")
    xs, ys = [], []
    for r in records:
        x = getattr(r, predictor) if not isinstance(r, dict) else float(r[predictor])
        e = r.energy if not isinstance(r, dict) else float(r["energy"])
        if not (e > 0 and math.isfinite(e)):
            log.warning("nonpositive energy at %s=%g excluded from fit", predictor, x)
            continue
        xs.append(math.log(x))
        ys.append(math.log(e))
    if len(xs) < 4:
        raise ValueError(f"need at least 4 usable records, got {len(xs)}")
    X, Y = np.array(xs), np.array(ys)
    A = np.stack([X, np.ones_like(X)], -1)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = Y - A @ coef
    ss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(res @ res) / ss if ss > 0 else 1.0
    dof = max(len(X) - 2, 1)
    se = math.sqrt(float(res @ res) / dof / float(np.sum((X - X.mean()) ** 2)))
    return FitResult(float(coef[0]), float(coef[1]), r2, se, len(X))


def export(records, path, fmt="csv"):
    if not records:
        raise ValueError("no records to export")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(CSV_COLUMNS)
                for r in records:
                    wr.writerow(r.row())
            elif fmt == "json":
                json.dump([asdict(r) for r in records], fh, indent=1, sort_keys=True)
            else:
                raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write records to {path}: {exc}") from exc
    return path


def _parse(v, kind):
    if kind is bool:
        return v.strip().lower() == "true"
    return kind(v)


def read_records(path):
    """Parse a CSV written by `export` back into records."""
    kinds = dict(t=float, w=float, energy=float, e_div_t2=float, e_div_w4=float,
                 e_div_t2w2=float, converged=bool, iters=int, grid=str, seed=int)
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        return [SweepRecord(**{k: _parse(row[k], kinds[k]) for k in CSV_COLUMNS})
                for row in rd]


def export_mesh(points, path):
    """Triangulated OBJ of a grid of points (n1, n2, 3); faces follow d1 x d2."""
    P = np.asarray(points, float)
    n1, n2 = P.shape[:2]
    idx = np.arange(n1 * n2).reshape(n1, n2) + 1
    try:
        with open(path, "w") as fh:
            for p in P.reshape(-1, 3):
                fh.write(f"v {p[0]:.12g} {p[1]:.12g} {p[2]:.12g}\n")
            for i in range(n1 - 1):
                for j in range(n2 - 1):
                    a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
                    fh.write(f"f {a} {b} {c}\nf {a} {c} {d}\n")
    except OSError as exc:
        raise OSError(f"cannot write mesh to {path}: {exc}") from exc
    return path
