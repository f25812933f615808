"""Weak rigidity function, its Jacobian, and rank-based classification.

Row order everywhere is: distance constraints in edge order, then angle
constraints in angle order. Columns are agent-major (``x1, y1, x2, ...``).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, InvalidArgument, NotGIWR
from .graph import EPS_SEP, Configuration, FrameworkSpec, as_positions

J0 = np.array([[0.0, -1.0], [1.0, 0.0]])
J1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
J2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
J3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
ROTATION_GENERATORS = {2: (J0,), 3: (J1, J2, J3)}


# --------------------------------------------------------------------------
# batched kernels; P has shape (..., n, d)


def min_pair_distance(spec: FrameworkSpec, P) -> np.ndarray:
    """Smallest distance over all pairs that appear in some constraint."""
    pairs = spec.sensing_pairs
    z = P[..., pairs[:, 0], :] - P[..., pairs[:, 1], :]
    return np.sqrt(np.min(np.sum(z * z, axis=-1), axis=-1))


def ensure_separated(spec: FrameworkSpec, P, eps=EPS_SEP):
    if not np.all(np.isfinite(P)):
        raise DegenerateConfiguration("configuration contains non-finite entries")
    dmin = np.min(min_pair_distance(spec, P))
    if not dmin > eps:
        raise DegenerateConfiguration(
            f"constrained agents closer than {eps:g} (min distance {dmin:.3g})"
        )


def _angle_terms(spec, P):
    """Cosines and their gradients w.r.t. apex and both leg endpoints."""
    idx = spec.angle_index
    pk, pi, pj = P[..., idx[:, 0], :], P[..., idx[:, 1], :], P[..., idx[:, 2], :]
    a = pk - pi
    b = pk - pj
    na = np.sqrt(np.sum(a * a, axis=-1))[..., None]
    nb = np.sqrt(np.sum(b * b, axis=-1))[..., None]
    ah, bh = a / na, b / nb
    cos = np.sum(ah * bh, axis=-1)
    c = cos[..., None]
    gi = -(bh - c * ah) / na
    gj = -(ah - c * bh) / nb
    gk = -(gi + gj)
    return cos, gk, gi, gj


def fw_values(spec: FrameworkSpec, P) -> np.ndarray:
    """Batched weak rigidity function, shape ``(..., m + w)``."""
    e = spec.edge_index
    z = P[..., e[:, 0], :] - P[..., e[:, 1], :]
    dist = np.sum(z * z, axis=-1)
    if spec.w:
        cos = _angle_terms(spec, P)[0]
    else:
        cos = np.zeros(P.shape[:-2] + (0,))
    return np.concatenate([dist, cos], axis=-1)


def weighted_gradient(spec: FrameworkSpec, P, weights) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(e, R_W^T (weights * e))`` reshaped to ``(..., n, d)``.

    ``weights`` is a length ``m + w`` vector (or broadcastable to the error
    batch). This never forms R_W, so it is cheap enough to run inside the
    integrator.
    """
    idx_e, idx_a = spec.edge_index, spec.angle_index
    m = spec.m
    z = P[..., idx_e[:, 0], :] - P[..., idx_e[:, 1], :]
    dist = np.sum(z * z, axis=-1)
    G = np.zeros(P.shape)
    if spec.w:
        cos, gk, gi, gj = _angle_terms(spec, P)
        fw = np.concatenate([dist, cos], axis=-1)
    else:
        fw = dist
    err = fw - spec.targets
    we = err * weights
    if m:
        contrib = 2.0 * we[..., :m, None] * z
        G += _scatter(spec, "edge", contrib)
    if spec.w:
        wa = we[..., m:, None]
        G += _scatter(spec, "apex", wa * gk)
        G += _scatter(spec, "leg_i", wa * gi)
        G += _scatter(spec, "leg_j", wa * gj)
    return err, G


def _scatter(spec, kind, values):
    return spec.scatter[kind] @ values


# --------------------------------------------------------------------------
# public operations


def eval_fw(spec: FrameworkSpec, cfg) -> np.ndarray:
    """Squared edge lengths followed by angle cosines."""
    P = as_positions(cfg, spec)
    ensure_separated(spec, P)
    return fw_values(spec, P)


def law_of_cosines(spec: FrameworkSpec, cfg) -> np.ndarray:
    """Angle cosines computed from the three side lengths of each triangle."""
    P = as_positions(cfg, spec)
    out = []
    for k, i, j in spec.angles:
        a2 = np.sum((P[k] - P[i]) ** 2)
        b2 = np.sum((P[k] - P[j]) ** 2)
        c2 = np.sum((P[i] - P[j]) ** 2)
        out.append((a2 + b2 - c2) / (2.0 * np.sqrt(a2 * b2)))
    return np.array(out)


def weak_rigidity_matrix(spec: FrameworkSpec, cfg) -> np.ndarray:
    """Analytic Jacobian of :func:`eval_fw`, shape ``(m + w, d n)``."""
    P = as_positions(cfg, spec)
    ensure_separated(spec, P)
    n, d, m = spec.n, spec.d, spec.m
    R = np.zeros((spec.sigma, d * n))
    for g, (i, j) in enumerate(spec.edges):
        z = P[i] - P[j]
        R[g, d * i : d * i + d] = 2.0 * z
        R[g, d * j : d * j + d] = -2.0 * z
    if spec.w:
        _, gk, gi, gj = _angle_terms(spec, P)
        for h, (k, i, j) in enumerate(spec.angles):
            row = R[m + h]
            row[d * k : d * k + d] += gk[h]
            row[d * i : d * i + d] += gi[h]
            row[d * j : d * j + d] += gj[h]
    return R


def finite_difference_jacobian(func, x, step=None) -> np.ndarray:
    """Central-difference Jacobian of ``func`` at ``x``.

    The default step is ``1e-6 * max(1, |x|_inf)``.
    """
    x = np.asarray(x, dtype=float)
    if step is None:
        step = 1e-6 * max(1.0, float(np.max(np.abs(x))))
    f0 = np.asarray(func(x))
    J = np.empty((f0.size, x.size))
    for c in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[c] += step
        xm[c] -= step
        J[:, c] = (np.asarray(func(xp)).ravel() - np.asarray(func(xm)).ravel()) / (2.0 * step)
    return J


def fw_jacobian_fd(spec: FrameworkSpec, cfg, step=None) -> np.ndarray:
    p = as_positions(cfg, spec).reshape(-1)
    return finite_difference_jacobian(
        lambda x: fw_values(spec, x.reshape(spec.n, spec.d)), p, step
    )


def trivial_motion_basis(cfg, include_scaling: bool = False, d: int | None = None) -> np.ndarray:
    """Columns spanning translations, rotations and (optionally) scaling.

    Returns a ``(d n, b)`` matrix with ``b = d(d+1)/2`` (+1 with scaling).
    """
    if isinstance(cfg, Configuration):
        P = cfg.positions
    else:
        P = np.asarray(cfg, dtype=float)
        if P.ndim == 1:
            if d is None:
                raise InvalidArgument("flat configuration needs d")
            P = P.reshape(-1, d)
    n, d = P.shape
    if n < 2:
        raise InvalidArgument("trivial motions need at least two agents")
    cols = [np.kron(np.ones(n), np.eye(d)[a]) for a in range(d)]
    for Jg in ROTATION_GENERATORS[d]:
        cols.append((P @ Jg.T).reshape(-1))
    if include_scaling:
        cols.append(P.reshape(-1).copy())
    return np.column_stack(cols)


def numerical_rank(matrix, tol: float | None = None) -> tuple[int, np.ndarray]:
    """Rank by counting singular values above a threshold.

    The default threshold is ``max(rows, cols) * eps * sigma_max``; pass
    ``tol`` for an absolute cutoff instead.
    """
    A = np.asarray(matrix, dtype=float)
    if A.size == 0:
        return 0, np.zeros(0)
    s = np.linalg.svd(A, compute_uv=False)
    if tol is None:
        tol = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return int(np.sum(s > tol)), s


def affine_rank(P, tol: float | None = None) -> int:
    """Dimension of the affine span of the rows of ``P``."""
    P = np.asarray(P, dtype=float)
    C = P - P.mean(axis=0)
    if tol is None:
        scale = max(1.0, float(np.max(np.abs(P))))
        tol = 1e-10 * scale
    return numerical_rank(C, tol)[0]


@dataclass
class RigidityReport:
    rank: int
    threshold: int
    is_giwr: bool
    is_minimal: bool
    singular_values: list
    trivial_basis_residual: float
    e_empty: bool
    sigma: int
    affine_rank: int = field(default=0)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _is_giwr(spec, R, threshold, tol):
    return numerical_rank(R, tol)[0] == threshold


def classify(spec: FrameworkSpec, cfg, tol: float | None = None) -> RigidityReport:
    """Infinitesimal weak rigidity test of ``(spec, cfg)``.

    ``is_minimal`` asks whether every single constraint is needed. Each
    reduced framework is tested against the threshold of the original one,
    so dropping the only distance edge does not silently switch to the
    scale-free threshold.
    """
    P = as_positions(cfg, spec)
    if spec.n < 3:
        raise InvalidArgument("classification needs n >= 3")
    R = weak_rigidity_matrix(spec, P)
    rank, s = numerical_rank(R, tol)
    threshold = spec.threshold
    is_giwr = rank == threshold

    is_minimal = False
    if is_giwr:
        is_minimal = all(
            not _is_giwr(spec, np.delete(R, r, axis=0), threshold, tol) for r in range(spec.sigma)
        )

    basis = trivial_motion_basis(P, include_scaling=not spec.has_edges)
    res = np.linalg.norm(R @ basis, axis=0) / np.linalg.norm(basis, axis=0)
    return RigidityReport(
        rank=rank,
        threshold=threshold,
        is_giwr=bool(is_giwr),
        is_minimal=bool(is_minimal),
        singular_values=[float(x) for x in s],
        trivial_basis_residual=float(np.max(res)),
        e_empty=not spec.has_edges,
        sigma=spec.sigma,
        affine_rank=affine_rank(P),
    )


@dataclass(frozen=True)
class ImplicationCheck:
    """Outcome of checking "distance rigid => weakly rigid" on one instance."""

    premise: bool
    conclusion: bool

    @property
    def vacuous(self) -> bool:
        return not self.premise

    def __bool__(self) -> bool:
        return (not self.premise) or self.conclusion


def check_distance_rigidity_implication(
    spec_distance_only: FrameworkSpec, cfg, added_angles, tol=None
) -> ImplicationCheck:
    """Check that infinitesimal distance rigidity survives adding angles.

    ``added_angles`` are 0-based ``(apex, i, j)`` triples; their targets are
    taken from ``cfg`` since only the Jacobian matters here.
    """
    if spec_distance_only.w:
        raise InvalidArgument("expected a distance-only framework")
    P = as_positions(cfg, spec_distance_only)
    RD = 0.5 * weak_rigidity_matrix(spec_distance_only, P)
    premise = numerical_rank(RD, tol)[0] == spec_distance_only.threshold
    spec_a = spec_distance_only.with_angles(added_angles, [0.0] * len(added_angles))
    spec_a = spec_a.with_targets(fw_values(spec_a, P))
    conclusion = classify(spec_a, P, tol).is_giwr
    return ImplicationCheck(bool(premise), bool(conclusion))


def sample_configuration(spec, rng, box=10.0, min_sep=1e-3, max_tries=1000):
    """Uniform draw from ``[-box, box]^{dn}``, redrawn while constrained
    agents are closer than ``min_sep * box``."""
    for _ in range(max_tries):
        P = rng.uniform(-box, box, size=(spec.n, spec.d))
        if min_pair_distance(spec, P) > min_sep * box:
            return P
    raise RuntimeError("could not draw a separated configuration")


def is_regular_point(spec, cfg, samples: int = 100, seed=0, tol=None) -> bool:
    """Does ``cfg`` attain the largest rank of R_W seen over random draws?"""
    if samples <= 0:
        raise InvalidArgument("samples must be positive")
    rng = np.random.default_rng(seed)
    rank_here = numerical_rank(weak_rigidity_matrix(spec, cfg), tol)[0]
    r = max(
        numerical_rank(weak_rigidity_matrix(spec, sample_configuration(spec, rng)), tol)[0]
        for _ in range(samples)
    )
    return rank_here >= r


def partition_constraints(spec, cfg, tol=None) -> tuple[list[int], list[int]]:
    """Split constraint rows into a minimally rigid subset and the rest.

    Rows are scanned in listed order and kept when they raise the rank of
    the rows kept so far.
    """
    R = weak_rigidity_matrix(spec, cfg)
    if numerical_rank(R, tol)[0] != spec.threshold:
        raise NotGIWR("framework is not infinitesimally weakly rigid at this configuration")
    keep, rest = [], []
    rank = 0
    for r in range(spec.sigma):
        trial = numerical_rank(R[keep + [r]], tol)[0]
        if trial > rank:
            keep.append(r)
            rank = trial
        else:
            rest.append(r)
    return keep, rest
