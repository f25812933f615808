"""Scenario files: a framework, a starting configuration and run settings.

A scenario is a JSON object with keys

``dimension``
    2 or 3.
``agents``
    List of coordinate lists, the configuration ``p``.
``edges``
    List of ``{"i", "j", "target_sq"}`` with 1-based vertices.
``angles``
    List of ``{"apex", "i", "j"}`` plus exactly one of ``target_cos`` or
    ``target_deg``.
``sim`` (optional)
    ``dt, t_max, err_tol, grad_tol, gain_dist, gain_angle, seed,
    integrator, record_every`` and ``perturb``. With ``perturb`` set, each
    agent is displaced by a seeded random vector of length at most
    ``perturb`` times the formation diameter before a run.
``name``, ``description``, ``desired``, ``experiment`` (optional)
    ``desired`` is a realization of the targets, used by the collision
    certificate; ``experiment`` is ``{"type", "parameters"}``.

Bundled files live next to this module and load by stem, e.g.
``load_scenario("sim1")``.
"""
from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..dynamics import SimConfig
from ..errors import ScenarioError
from ..graph import FrameworkSpec, validate

TOP_KEYS = {"name", "description", "dimension", "agents", "edges", "angles", "sim", "desired", "experiment"}
EDGE_KEYS = {"i", "j", "target_sq"}
ANGLE_KEYS = {"apex", "i", "j", "target_cos", "target_deg"}
SIM_KEYS = {
    "dt", "t_max", "err_tol", "grad_tol", "gain_dist", "gain_angle", "seed",
    "integrator", "record_every", "perturb",
}
EXPERIMENT_TYPES = {"analyze", "simulate", "montecarlo", "check-gradient", "equilibrium"}


@dataclass
class Scenario:
    name: str
    spec: FrameworkSpec
    positions: np.ndarray
    sim: dict = field(default_factory=dict)
    desired: np.ndarray | None = None
    experiment: dict = field(default_factory=dict)
    description: str = ""
    source: str = ""

    def sim_config(self, **overrides) -> SimConfig:
        keys = ("dt", "t_max", "err_tol", "grad_tol", "gain_dist", "gain_angle",
                "integrator", "record_every")
        kw = {k: self.sim[k] for k in keys if k in self.sim}
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return SimConfig(**kw)

    @property
    def seed(self) -> int:
        return int(self.sim.get("seed", 0))

    def initial_positions(self, seed: int | None = None) -> np.ndarray:
        """Starting configuration, perturbed when ``sim.perturb`` is set."""
        P = self.positions.copy()
        frac = float(self.sim.get("perturb", 0.0))
        if frac <= 0:
            return P
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return perturb(P, rng, frac)

    def desired_positions(self) -> np.ndarray:
        return self.positions.copy() if self.desired is None else self.desired.copy()


def perturb(P, rng, frac) -> np.ndarray:
    """Move each agent by a random vector of length at most ``frac * diameter``."""
    P = np.asarray(P, dtype=float)
    diam = float(np.max(np.linalg.norm(P[:, None] - P[None], axis=-1)))
    v = rng.normal(size=P.shape)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(P.shape[0], 1))
    return P + v * r * frac * diam


def _line_of(text: str, pattern: str, occurrence: int = 0) -> int:
    if not text:
        return 0
    hits = [m.start() for m in re.finditer(pattern, text)]
    if not hits:
        return 0
    pos = hits[min(occurrence, len(hits) - 1)]
    return text.count("\n", 0, pos) + 1


def _q(key):
    return f'"{key}"'


def _where(source, text, pattern, occurrence=0):
    line = _line_of(text, pattern, occurrence)
    return f"{source}:{line}" if line else source


def _unknown(keys, allowed, what, strict, source, text):
    extra = sorted(set(keys) - allowed)
    if not extra:
        return
    msg = f"unknown key(s) {', '.join(extra)} in {what}"
    if strict:
        raise ScenarioError(f"{_where(source, text, re.escape(json.dumps(extra[0])))}: {msg}")
    warnings.warn(f"{source}: {msg}", stacklevel=3)


def _number(value, what, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{where}: {what} must be a finite number, got {value!r}")
    return float(value)


def _index(value, what, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: {what} must be an integer, got {value!r}")
    return value


def parse_scenario(data: dict, strict: bool = False, source: str = "<scenario>", text: str = "") -> Scenario:
    """Build and validate a :class:`Scenario` from decoded JSON."""
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}:1: top level must be an object")
    _unknown(data, TOP_KEYS, "scenario", strict, source, text)
    for key in ("dimension", "agents"):
        if key not in data:
            raise ScenarioError(f"{source}: missing required key {key!r}")
    d = data["dimension"]
    if d not in (2, 3) or isinstance(d, bool):
        raise ScenarioError(f"{_where(source, text, _q('dimension'))}: dimension must be 2 or 3, got {d!r}")

    def coords(key):
        rows = data[key]
        where = _where(source, text, f'"{key}"')
        if not isinstance(rows, list) or not rows:
            raise ScenarioError(f"{where}: {key} must be a non-empty list of coordinates")
        out = []
        for a, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != d:
                raise ScenarioError(f"{where}: {key}[{a}] must have {d} coordinates")
            out.append([_number(x, f"{key}[{a}]", where) for x in row])
        return np.array(out)

    P = coords("agents")
    n = P.shape[0]
    desired = coords("desired") if "desired" in data else None
    if desired is not None and desired.shape != P.shape:
        raise ScenarioError(f"{_where(source, text, _q('desired'))}: desired must match agents in shape")

    edges, etar = [], []
    for g, item in enumerate(data.get("edges", [])):
        where = _where(source, text, r'"target_sq"', g)
        if not isinstance(item, dict):
            raise ScenarioError(f"{where}: edges[{g}] must be an object")
        _unknown(item, EDGE_KEYS, f"edges[{g}]", strict, source, text)
        for k in EDGE_KEYS:
            if k not in item:
                raise ScenarioError(f"{where}: edges[{g}] lacks {k!r}")
        edges.append((_index(item["i"], "i", where) - 1, _index(item["j"], "j", where) - 1))
        etar.append(_number(item["target_sq"], f"edges[{g}].target_sq", where))

    angles, atar = [], []
    for h, item in enumerate(data.get("angles", [])):
        where = _where(source, text, r'"apex"', h)
        if not isinstance(item, dict):
            raise ScenarioError(f"{where}: angles[{h}] must be an object")
        _unknown(item, ANGLE_KEYS, f"angles[{h}]", strict, source, text)
        for k in ("apex", "i", "j"):
            if k not in item:
                raise ScenarioError(f"{where}: angles[{h}] lacks {k!r}")
        has_cos, has_deg = "target_cos" in item, "target_deg" in item
        if has_cos == has_deg:
            raise ScenarioError(f"{where}: angles[{h}] needs exactly one of target_cos, target_deg")
        if has_cos:
            c = _number(item["target_cos"], f"angles[{h}].target_cos", where)
        else:
            c = math.cos(math.radians(_number(item["target_deg"], f"angles[{h}].target_deg", where)))
        angles.append(tuple(_index(item[k], k, where) - 1 for k in ("apex", "i", "j")))
        atar.append(c)

    spec = FrameworkSpec(n, d, edges, angles, etar, atar)
    problems = validate(spec)
    if problems:
        raise ScenarioError(f"{source}: invalid framework: " + "; ".join(problems))

    sim = data.get("sim", {})
    if not isinstance(sim, dict):
        raise ScenarioError(f"{_where(source, text, _q('sim'))}: sim must be an object")
    _unknown(sim, SIM_KEYS, "sim", strict, source, text)
    experiment = data.get("experiment", {})
    if experiment:
        if not isinstance(experiment, dict) or experiment.get("type") not in EXPERIMENT_TYPES:
            raise ScenarioError(
                f"{_where(source, text, _q('experiment'))}: experiment.type must be one of "
                + ", ".join(sorted(EXPERIMENT_TYPES))
            )
    scenario = Scenario(
        name=str(data.get("name", Path(source).stem)),
        spec=spec,
        positions=P,
        sim=dict(sim),
        desired=desired,
        experiment=dict(experiment),
        description=str(data.get("description", "")),
        source=source,
    )
    try:
        scenario.sim_config()
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{_where(source, text, _q('sim'))}: {exc}") from None
    return scenario


def bundled_names() -> list[str]:
    """Stems of the scenario files shipped with the package."""
    root = resources.files(__name__)
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(path_or_name, strict: bool = False) -> Scenario:
    """Load a scenario from a file path or a bundled name.

    Raises
    ------
    ScenarioError
        On unreadable files, JSON syntax errors, unknown keys in strict
        mode and invalid frameworks. Messages start with ``file:line``.
    """
    path = Path(path_or_name)
    if not path.exists() and path.suffix == "" and str(path_or_name) in bundled_names():
        text = resources.files(__name__).joinpath(f"{path_or_name}.json").read_text()
        source = f"{path_or_name}.json"
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"{path}: cannot read ({exc.strerror})") from None
        source = str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}: {exc.msg}") from None
    return parse_scenario(data, strict=strict, source=source, text=text)
