"""YAML experiment configuration.

Sections: geometry, moduli, state, point, sweep, solver, output.  Every
section is optional; missing keys fall back to the defaults below.
"""

from dataclasses import dataclass, field

import yaml

from .geometry import preset
from .harness import SweepSpec
from .limit_energies import MidlineState
from .quadratic_forms import IsotropicModuli

DEFAULTS = {
    "geometry": {"preset": "euclidean"},
    "moduli": {"mu": 1.0, "lam": 0.0},
    "state": {"alpha": 0.0, "beta": 0.0, "gammabar": 0.0},
    "point": {"t": 0.001, "w": 0.04},
    "sweep": {"regime": "narrow", "exponent": 1.5, "w": [0.1, 0.0669, 0.0447, 0.0299, 0.02],
              "evaluator": "reduced", "construction": None, "seed": 0, "workers": 1},
    "solver": {"n1": 41, "n2": 9, "maxiter": 5000, "gtol": 1e-9, "perturb": 0.0,
               "n3d": [12, 4, 3]},
    "output": {"dir": None},
}

_SECTIONS = tuple(DEFAULTS)


@dataclass
class Config:
    data: dict = field(default_factory=dict)

    def section(self, name):
        out = dict(DEFAULTS[name])
        out.update(self.data.get(name) or {})
        return out

    def geometry(self):
        g = self.section("geometry")
        name = g.pop("preset")
        return preset(name, **g)

    def moduli(self):
        return IsotropicModuli(**self.section("moduli"))

    def state(self):
        return MidlineState(**self.section("state"))

    def sweep_spec(self):
        g = self.section("geometry")
        name = g.pop("preset")
        s = self.section("sweep")
        solver = self.section("solver")
        solver["n3d"] = list(solver.get("n3d", [12, 4, 3]))
        return SweepSpec(geometry=name, params=g, regime=s["regime"],
                         exponent=float(s["exponent"]), ws=tuple(s["w"]),
                         evaluator=s["evaluator"], construction=s.get("construction"),
                         moduli=self.section("moduli"), solver=solver,
                         seed=int(s["seed"]), workers=int(s["workers"]),
                         output=self.section("output")["dir"])


def load_config(path):
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"{path}: unknown sections {sorted(unknown)}")
    return Config(data)
