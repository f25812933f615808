"""Equilibria of the gradient flow: classification, Hessian spectra and
Monte Carlo basin estimates for three agents in the plane."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .control import Gains, interaction_matrix
from .dynamics import SimConfig, collinearity, simulate_batch
from .errors import InvalidPrecondition, NotCollinear
from .graph import FrameworkSpec, as_positions
from .rigidity import (
    classify,
    finite_difference_jacobian,
    fw_values,
    min_pair_distance,
    sample_configuration,
    trivial_motion_basis,
    weighted_gradient,
)


def _gains(gains):
    if gains is None:
        return Gains()
    if isinstance(gains, Gains):
        return gains
    return Gains(*gains)


def gradient(spec: FrameworkSpec, p, gains=None) -> np.ndarray:
    """``R_W^T K e`` as a flat vector; the flow is ``p' = -gradient``."""
    P = np.asarray(p, dtype=float).reshape(spec.n, spec.d)
    return weighted_gradient(spec, P, _gains(gains).vector(spec))[1].reshape(-1)


def hessian_fd(spec: FrameworkSpec, cfg, gains=None, step=None) -> np.ndarray:
    """Central-difference Jacobian of ``R_W^T K e``, i.e. the Hessian of V.

    The default step is ``1e-5 * (1 + |p|_inf)``. The result is not
    symmetrized.
    """
    p = as_positions(cfg, spec).reshape(-1)
    if step is None:
        step = 1e-5 * (1.0 + float(np.max(np.abs(p))))
    return finite_difference_jacobian(lambda x: gradient(spec, x, gains), p, step)


@dataclass
class EquilibriumReport:
    kind: str
    grad_norm: float
    err_norm: float
    collinearity: float
    hessian_spectrum: list
    min_eig: float
    nontrivial_min_eig: float
    symmetry_residual: float
    e_matrix_min_eig: float
    e_matrix_spectrum: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _trivial_complement(P, include_scaling):
    T = trivial_motion_basis(P, include_scaling=include_scaling)
    Q, _ = np.linalg.qr(T, mode="complete")
    return Q[:, T.shape[1] :]


def classify_equilibrium(
    spec: FrameworkSpec, cfg, gains=None, tol_e: float = 1e-6, tol_g: float = 1e-8
) -> EquilibriumReport:
    """Classify ``cfg`` as a desired, incorrect or non-equilibrium point.

    ``kind`` is ``desired`` when ``|e| < tol_e``, ``incorrect`` when the
    gradient ``|R_W^T K e|`` is below ``tol_g`` but the error is not, and
    ``not_equilibrium`` otherwise. The Hessian comes from
    :func:`hessian_fd` and is symmetrized before its spectrum is taken;
    ``symmetry_residual`` is ``max|J - J^T|`` before that.
    """
    P = np.array(as_positions(cfg, spec), dtype=float)
    g = _gains(gains)
    err = fw_values(spec, P) - spec.targets
    grad = gradient(spec, P, g)
    err_norm = float(np.linalg.norm(err))
    grad_norm = float(np.linalg.norm(grad))
    if err_norm < tol_e:
        kind = "desired"
    elif grad_norm < tol_g:
        kind = "incorrect"
    else:
        kind = "not_equilibrium"

    J = hessian_fd(spec, P, g)
    sym = float(np.max(np.abs(J - J.T)))
    Js = 0.5 * (J + J.T)
    spectrum = np.linalg.eigvalsh(Js)
    Q = _trivial_complement(P, include_scaling=not spec.has_edges)
    nontrivial = np.linalg.eigvalsh(Q.T @ Js @ Q) if Q.shape[1] else np.zeros(0)
    E = interaction_matrix(spec, P, g)
    e_spec = np.linalg.eigvalsh(0.5 * (E + E.T))
    return EquilibriumReport(
        kind=kind,
        grad_norm=grad_norm,
        err_norm=err_norm,
        collinearity=float(collinearity(P)),
        hessian_spectrum=[float(x) for x in spectrum],
        min_eig=float(spectrum[0]),
        nontrivial_min_eig=float(nontrivial[0]) if nontrivial.size else float("nan"),
        symmetry_residual=sym,
        e_matrix_min_eig=float(e_spec[0]),
        e_matrix_spectrum=[float(x) for x in e_spec],
    )


def _require_planar_triangle(spec):
    if spec.n != 3 or spec.d != 2:
        raise InvalidPrecondition(f"needs n=3, d=2 (got n={spec.n}, d={spec.d})")


def _collinear_tol(P, tol_col):
    diam = float(np.max(np.linalg.norm(P[:, None] - P[None], axis=-1)))
    return tol_col * max(1.0, diam)


def collinear_equilibrium_check(
    spec3: FrameworkSpec, cfg, gains=None, tol_col: float = 1e-6, tol_e=1e-6, tol_g=1e-8
) -> bool:
    """For three planar agents: an incorrect equilibrium must be collinear.

    Returns ``False`` only for a counterexample, i.e. a non-collinear
    incorrect equilibrium.
    """
    _require_planar_triangle(spec3)
    P = as_positions(cfg, spec3)
    err = fw_values(spec3, P) - spec3.targets
    grad = gradient(spec3, P, gains)
    incorrect = np.linalg.norm(err) >= tol_e and np.linalg.norm(grad) < tol_g
    if not incorrect:
        return True
    return bool(collinearity(P) <= _collinear_tol(P, tol_col))


def align_to_x_axis(P) -> np.ndarray:
    """Rotate and translate ``P`` so its principal axis is the x-axis and
    its centroid is the origin."""
    P = np.asarray(P, dtype=float)
    C = P - P.mean(axis=0)
    _, _, Vt = np.linalg.svd(C)
    R = Vt
    if np.linalg.det(R) < 0:
        R = np.diag([1.0, -1.0]) @ R
    return C @ R.T


@dataclass
class BlockCheck:
    """Residuals of the x/y block form of the Hessian at a collinear point."""

    off_block: float
    y_block_vs_e: float
    hessian_max: float

    def ok(self, rel: float = 1e-6) -> bool:
        bound = rel * max(1.0, self.hessian_max)
        return self.off_block <= bound and self.y_block_vs_e <= bound


def block_structure_check(spec3: FrameworkSpec, cfg_collinear, gains=None, tol_col=1e-6) -> BlockCheck:
    """Check that the Hessian at a collinear point splits into x and y blocks.

    After aligning the agents with the x-axis and ordering coordinates as
    ``(x_1, x_2, x_3, y_1, y_2, y_3)``, the off-diagonal blocks vanish and
    the y-block equals the interaction matrix.

    Raises
    ------
    NotCollinear
        If the agents do not lie on a line.
    """
    _require_planar_triangle(spec3)
    P = as_positions(cfg_collinear, spec3)
    if collinearity(P) > _collinear_tol(P, tol_col):
        raise NotCollinear(f"agents are not collinear (measure {collinearity(P):.3g})")
    A = align_to_x_axis(P)
    A[:, 1] = 0.0
    J = hessian_fd(spec3, A, gains)
    J = 0.5 * (J + J.T)
    n = spec3.n
    order = np.concatenate([np.arange(n) * 2, np.arange(n) * 2 + 1])
    Jp = J[np.ix_(order, order)]
    off = float(np.max(np.abs(Jp[:n, n:])))
    E = interaction_matrix(spec3, A, gains)
    yb = float(np.max(np.abs(Jp[n:, n:] - E)))
    return BlockCheck(off_block=off, y_block_vs_e=yb, hessian_max=float(np.max(np.abs(J))))


@dataclass
class BasinStats:
    trials: int
    seed: int
    n_desired: int
    n_incorrect: int
    n_horizon: int
    n_degenerate: int
    mean_convergence_time: float
    box: float
    convergence_rate: float
    collinear_mode: bool = False
    max_collinearity: float = 0.0
    final_positions: np.ndarray = field(default=None, repr=False)
    flags: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("final_positions")
        d.pop("flags")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def sample_starts(spec3, trials, rng, box=20.0, collinear=False, tol_col=1e-6):
    """Initial configurations for :func:`monte_carlo_basin`.

    Generic draws are uniform in ``[-box, box]^2`` per agent and redrawn
    when nearly collinear. Collinear draws put all agents on one horizontal
    line, which the flow then keeps exactly (the y-velocities are products
    of exact zeros), so rounding cannot push a run off the line.
    """
    starts = []
    while len(starts) < trials:
        if collinear:
            x = rng.uniform(-box, box, size=spec3.n)
            y = rng.uniform(-box, box)
            P = np.column_stack([x, np.full(spec3.n, y)])
            if min_pair_distance(spec3, P) > 1e-3 * box:
                starts.append(P)
        else:
            P = rng.uniform(-box, box, size=(spec3.n, spec3.d))
            if collinearity(P) > _collinear_tol(P, tol_col) and min_pair_distance(spec3, P) > 1e-3 * box:
                starts.append(P)
    return np.array(starts).reshape(trials, spec3.n, spec3.d)


def monte_carlo_basin(
    spec3: FrameworkSpec,
    trials: int,
    seed: int,
    simcfg: SimConfig | None = None,
    box: float = 20.0,
    collinear: bool = False,
    tol_col: float = 1e-6,
) -> BasinStats:
    """Simulate ``trials`` random starts and count where they end.

    All trials are integrated together with :func:`simulate_batch`.
    ``convergence_rate`` is the fraction that reached the desired shape.
    """
    _require_planar_triangle(spec3)
    rng = np.random.default_rng(seed)
    probe = sample_configuration(spec3, np.random.default_rng(seed))
    if not classify(spec3.with_targets(fw_values(spec3, probe)), probe).is_minimal:
        raise InvalidPrecondition("constraint set is not minimally weakly rigid")
    simcfg = simcfg or SimConfig()
    P0 = sample_starts(spec3, trials, rng, box, collinear, tol_col)
    res = simulate_batch(spec3, P0, simcfg)
    flags = list(res.flags)
    conv = [t for t, f in zip(res.stop_times, flags) if f == "converged"]
    n_desired = flags.count("converged")
    return BasinStats(
        trials=int(trials),
        seed=int(seed),
        n_desired=n_desired,
        n_incorrect=flags.count("incorrect_equilibrium"),
        n_horizon=flags.count("horizon"),
        n_degenerate=flags.count("degenerate"),
        mean_convergence_time=float(np.mean(conv)) if conv else float("nan"),
        box=float(box),
        convergence_rate=n_desired / trials if trials else float("nan"),
        collinear_mode=bool(collinear),
        max_collinearity=float(np.max(res.max_collinearity)) if trials else 0.0,
        final_positions=res.final_positions,
        flags=flags,
    )
