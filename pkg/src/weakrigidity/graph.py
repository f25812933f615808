"""Constraint model for distance/angle frameworks.

Vertices are stored 0-based. Scenario files and anything printed for a
human use 1-based labels; convert with :meth:`FrameworkSpec.from_one_based`
and :meth:`FrameworkSpec.one_based`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidSpec

EPS_SEP = 1e-9


def _canonical_edge(edge):
    i, j = int(edge[0]), int(edge[1])
    return (i, j) if i <= j else (j, i)


def _canonical_angle(angle):
    k, i, j = (int(a) for a in angle)
    return (k, i, j) if i <= j else (k, j, i)


@dataclass(frozen=True)
class FrameworkSpec:
    """Vertices, distance edges, angle triples and their targets.

    Parameters
    ----------
    n : int
        Number of vertices.
    d : int
        Ambient dimension, 2 or 3.
    edges : sequence of (i, j)
        Distance constraints. Each pair is canonicalized to ``i < j``.
    angles : sequence of (k, i, j)
        Angle constraints, ``k`` is the apex. Order of the legs is kept as
        given; ``(k, i, j)`` and ``(k, j, i)`` describe the same angle.
    edge_targets : sequence of float
        Desired squared lengths, aligned with ``edges``.
    angle_targets : sequence of float
        Desired cosines, aligned with ``angles``.

    The constructor does not reject malformed input; call :func:`validate`
    (or :meth:`check`) for that.
    """

    n: int
    d: int
    edges: tuple = ()
    angles: tuple = ()
    edge_targets: tuple = ()
    angle_targets: tuple = ()
    names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(_canonical_edge(e) for e in self.edges))
        object.__setattr__(self, "angles", tuple(tuple(int(a) for a in t) for t in self.angles))
        object.__setattr__(self, "edge_targets", tuple(float(x) for x in self.edge_targets))
        object.__setattr__(self, "angle_targets", tuple(float(x) for x in self.angle_targets))

    @classmethod
    def from_one_based(cls, n, d, edges=(), angles=(), edge_targets=(), angle_targets=()):
        return cls(
            n,
            d,
            edges=[(i - 1, j - 1) for i, j in edges],
            angles=[(k - 1, i - 1, j - 1) for k, i, j in angles],
            edge_targets=edge_targets,
            angle_targets=angle_targets,
        )

    def one_based(self):
        """Return ``(edges, angles)`` with 1-based labels."""
        return (
            [(i + 1, j + 1) for i, j in self.edges],
            [(k + 1, i + 1, j + 1) for k, i, j in self.angles],
        )

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def w(self) -> int:
        return len(self.angles)

    @property
    def sigma(self) -> int:
        return self.m + self.w

    @property
    def has_edges(self) -> bool:
        return self.m > 0

    @property
    def threshold(self) -> int:
        """Rank required for infinitesimal weak rigidity."""
        d, n = self.d, self.n
        if self.has_edges:
            return d * n - d * (d + 1) // 2
        return d * n - (d * d + d + 2) // 2

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array(self.edge_targets + self.angle_targets, dtype=float)

    @cached_property
    def edge_index(self) -> np.ndarray:
        return np.array(self.edges, dtype=int).reshape(-1, 2)

    @cached_property
    def angle_index(self) -> np.ndarray:
        return np.array(self.angles, dtype=int).reshape(-1, 3)

    @cached_property
    def sensing_pairs(self) -> np.ndarray:
        return np.array(sensing_graph(self).edges, dtype=int).reshape(-1, 2)

    @cached_property
    def scatter(self) -> dict:
        """One-hot vertex/constraint maps used to accumulate per-agent terms."""
        m, w = self.m, self.w
        edge = np.zeros((self.n, m))
        edge[self.edge_index[:, 0], np.arange(m)] = 1.0
        edge[self.edge_index[:, 1], np.arange(m)] = -1.0
        out = {"edge": edge}
        for col, kind in enumerate(("apex", "leg_i", "leg_j")):
            mat = np.zeros((self.n, w))
            mat[self.angle_index[:, col], np.arange(w)] = 1.0
            out[kind] = mat
        return out

    def constraint_labels(self):
        """Human-readable 1-based label for every constraint row."""
        labels = [f"d{i + 1}{j + 1}" if self.n < 10 else f"d{i + 1}_{j + 1}" for i, j in self.edges]
        for k, i, j in self.angles:
            labels.append(f"a{k + 1}_{i + 1}{j + 1}" if self.n < 10 else f"a{k + 1}_{i + 1}_{j + 1}")
        return labels

    def subset(self, indices: Sequence[int]) -> "FrameworkSpec":
        """Sub-framework keeping the constraint rows in ``indices``."""
        rows = sorted(int(r) for r in indices)
        edges = [self.edges[r] for r in rows if r < self.m]
        etar = [self.edge_targets[r] for r in rows if r < self.m]
        angles = [self.angles[r - self.m] for r in rows if r >= self.m]
        atar = [self.angle_targets[r - self.m] for r in rows if r >= self.m]
        return FrameworkSpec(self.n, self.d, edges, angles, etar, atar)

    def with_angles(self, angles, targets) -> "FrameworkSpec":
        return FrameworkSpec(
            self.n,
            self.d,
            self.edges,
            self.angles + tuple(tuple(a) for a in angles),
            self.edge_targets,
            self.angle_targets + tuple(targets),
        )

    def with_targets(self, targets) -> "FrameworkSpec":
        targets = np.asarray(targets, dtype=float)
        return FrameworkSpec(
            self.n, self.d, self.edges, self.angles, targets[: self.m], targets[self.m :]
        )

    def check(self) -> "FrameworkSpec":
        problems = validate(self)
        if problems:
            raise InvalidSpec("; ".join(problems))
        return self


@dataclass(frozen=True)
class Configuration:
    """Stacked positions ``p`` of ``n`` agents in ``R^d``."""

    p: np.ndarray
    d: int

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        if self.d not in (2, 3) or p.size % self.d:
            raise ValueError(f"length {p.size} is not a multiple of d={self.d}")
        object.__setattr__(self, "p", p)

    @classmethod
    def from_positions(cls, positions):
        positions = np.asarray(positions, dtype=float)
        return cls(positions.reshape(-1), positions.shape[-1])

    @property
    def n(self) -> int:
        return self.p.size // self.d

    @property
    def positions(self) -> np.ndarray:
        return self.p.reshape(self.n, self.d)


def as_positions(cfg, spec: FrameworkSpec | None = None) -> np.ndarray:
    """Return an ``(n, d)`` float array from a Configuration or array-like."""
    if isinstance(cfg, Configuration):
        P = cfg.positions
    else:
        P = np.asarray(cfg, dtype=float)
        if P.ndim == 1:
            if spec is None:
                raise ValueError("flat configuration needs a spec to infer d")
            P = P.reshape(-1, spec.d)
    if spec is not None and P.shape[-2:] != (spec.n, spec.d):
        raise ValueError(f"configuration shape {P.shape} does not match n={spec.n}, d={spec.d}")
    return P


@dataclass(frozen=True)
class SensingGraph:
    n: int
    edges: tuple

    @cached_property
    def neighbors(self) -> tuple:
        nbrs = [set() for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].add(j)
            nbrs[j].add(i)
        return tuple(tuple(sorted(s)) for s in nbrs)


def validate(spec: FrameworkSpec) -> list[str]:
    """List every problem with ``spec``; an empty list means well-formed."""
    problems = []
    n = spec.n
    if not isinstance(n, (int, np.integer)) or n < 3:
        problems.append(f"vertex count must be an integer >= 3, got {n}")
    if spec.d not in (2, 3):
        problems.append(f"dimension must be 2 or 3, got {spec.d}")
    if spec.sigma < 1:
        problems.append("framework has no constraints")
    if len(spec.edge_targets) != spec.m:
        problems.append(f"{spec.m} edges but {len(spec.edge_targets)} edge targets")
    if len(spec.angle_targets) != spec.w:
        problems.append(f"{spec.w} angles but {len(spec.angle_targets)} angle targets")

    seen = set()
    for g, (i, j) in enumerate(spec.edges):
        label = f"edge ({i + 1},{j + 1})"
        if not (0 <= i < n and 0 <= j < n):
            problems.append(f"{label}: vertex index out of range 1..{n}")
        if i == j:
            problems.append(f"{label}: self loop")
        if (i, j) in seen:
            problems.append(f"{label}: duplicate edge")
        seen.add((i, j))
        if g < len(spec.edge_targets) and not spec.edge_targets[g] > 0:
            problems.append(f"{label}: squared-length target must be > 0, got {spec.edge_targets[g]}")

    seen = set()
    for h, (k, i, j) in enumerate(spec.angles):
        label = f"angle ({k + 1},{i + 1},{j + 1})"
        if not all(0 <= v < n for v in (k, i, j)):
            problems.append(f"{label}: vertex index out of range 1..{n}")
        if len({k, i, j}) < 3:
            problems.append(f"{label}: apex and legs must be distinct")
        key = _canonical_angle((k, i, j))
        if key in seen:
            problems.append(f"{label}: duplicate angle")
        seen.add(key)
        if h < len(spec.angle_targets):
            c = spec.angle_targets[h]
            if not -1.0 < c < 1.0:
                problems.append(f"{label}: cosine target must lie in (-1, 1), got {c}")
    return problems


def sensing_graph(spec: FrameworkSpec) -> SensingGraph:
    """Pairs of agents that must measure each other's relative position.

    Every distance edge is sensed, and every angle triple makes its three
    vertices pairwise neighbours (the two legs and the opposite side).
    """
    pairs = set()
    for i, j in spec.edges:
        pairs.add(_canonical_edge((i, j)))
    for k, i, j in spec.angles:
        pairs.update(_canonical_edge(e) for e in ((i, j), (i, k), (j, k)))
    return SensingGraph(spec.n, tuple(sorted(pairs)))
