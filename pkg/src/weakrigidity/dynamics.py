"""Fixed-step integration of the gradient flow with invariant monitors."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .control import Gains
from .errors import AmbiguousRoot, InvalidArgument, InvalidPrecondition, NoRealRoot
from .graph import EPS_SEP, FrameworkSpec, as_positions
from .rigidity import (
    affine_rank,
    ensure_separated,
    min_pair_distance,
    numerical_rank,
    weak_rigidity_matrix,
    weighted_gradient,
)

FLAGS = ("converged", "incorrect_equilibrium", "horizon", "degenerate")


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    A run stops when ``|e| < err_tol`` (flag ``converged``), when the
    gradient ``|R_W^T K e|`` falls below ``grad_tol`` with the error still
    large (flag ``incorrect_equilibrium``), when two constrained agents
    meet (flag ``degenerate``) or at ``t_max`` (flag ``horizon``).
    Setting ``grad_tol = 0`` disables the incorrect-equilibrium stop.
    """

    dt: float = 1e-3
    t_max: float = 10.0
    err_tol: float = 1e-8
    grad_tol: float = 1e-10
    integrator: str = "rk4"
    record_every: int = 1
    gain_dist: float = 1.0
    gain_angle: float = 1.0
    monitor_rank: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and self.t_max > 0 and self.err_tol > 0):
            raise InvalidArgument("dt, t_max and err_tol must be positive")
        if self.grad_tol < 0:
            raise InvalidArgument("grad_tol must be non-negative")
        if self.integrator not in ("rk4", "euler"):
            raise InvalidArgument(f"unknown integrator {self.integrator!r}")
        if int(self.record_every) < 1:
            raise InvalidArgument("record_every must be >= 1")

    @property
    def gains(self) -> Gains:
        return Gains(self.gain_dist, self.gain_angle)

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_max / self.dt - 1e-9))


@dataclass
class SimulationTrace:
    """Recorded trajectory.

    ``times``, ``positions``, ``errors`` and every entry of ``monitors`` are
    aligned along their first axis and sampled every ``record_every`` steps,
    so ``times`` has constant spacing. The state at which the run stopped is
    kept separately in the ``final_*`` fields.
    """

    spec: FrameworkSpec
    simcfg: SimConfig
    times: np.ndarray
    positions: np.ndarray
    errors: np.ndarray
    monitors: dict
    flag: str
    steps: int
    final_time: float
    final_positions: np.ndarray
    final_error: np.ndarray
    final_grad_norm: float
    lyapunov_violations: int = 0

    @property
    def final_err_norm(self) -> float:
        return float(np.linalg.norm(self.final_error))

    def all_positions(self) -> np.ndarray:
        """Recorded positions with the final state appended if it is new."""
        if self.steps % self.simcfg.record_every == 0:
            return self.positions
        return np.concatenate([self.positions, self.final_positions[None]], axis=0)

    def summary(self) -> dict:
        return {
            "flag": self.flag,
            "steps": self.steps,
            "final_time": self.final_time,
            "final_err": self.final_err_norm,
            "final_grad_norm": self.final_grad_norm,
            "lyapunov_violations": self.lyapunov_violations,
            "slope_log_err": log_error_slope(self)[0],
            "gain_dist": self.simcfg.gain_dist,
            "gain_angle": self.simcfg.gain_angle,
            "dt": self.simcfg.dt,
            "integrator": self.simcfg.integrator,
        }


def _field(spec, weights):
    def f(P):
        err, G = weighted_gradient(spec, P, weights)
        return err, -G

    return f


def _step(f, P, dt, integrator, k1=None):
    if k1 is None:
        k1 = f(P)[1]
    if integrator == "euler":
        return P + dt * k1
    k2 = f(P + 0.5 * dt * k1)[1]
    k3 = f(P + 0.5 * dt * k2)[1]
    k4 = f(P + dt * k3)[1]
    return P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _centered_rank(P, tol=None):
    return affine_rank(P, tol)


def _raw_rank(P):
    scale = max(1.0, float(np.max(np.abs(P))))
    return numerical_rank(P.T, 1e-10 * scale)[0]


def _record(spec, P, err, weights, simcfg, rec):
    rec["positions"].append(P.copy())
    rec["errors"].append(err.copy())
    rec["centroid"].append(P.mean(axis=0))
    rec["scale"].append(np.linalg.norm(P - P.mean(axis=0)) / np.sqrt(spec.n))
    rec["cp_rank"].append(_centered_rank(P))
    rec["cp_rank_raw"].append(_raw_rank(P))
    rec["min_pair_dist"].append(float(min_pair_distance(spec, P)))
    rec["V"].append(0.5 * float(err @ (weights * err)))
    if simcfg.monitor_rank:
        rec["rw_rank"].append(numerical_rank(weak_rigidity_matrix(spec, P))[0])
    else:
        rec["rw_rank"].append(-1)


def simulate(spec: FrameworkSpec, cfg0, simcfg: SimConfig | None = None) -> SimulationTrace:
    """Integrate ``p' = -R_W^T K e`` from ``cfg0``.

    Raises
    ------
    DegenerateConfiguration
        If ``cfg0`` itself is outside the domain. A collapse during the run
        is reported through ``flag == "degenerate"`` instead.
    """
    simcfg = simcfg or SimConfig()
    P = np.array(as_positions(cfg0, spec), dtype=float)
    ensure_separated(spec, P)
    weights = simcfg.gains.vector(spec)
    f = _field(spec, weights)
    keys = ("positions", "errors", "centroid", "scale", "cp_rank", "cp_rank_raw",
            "min_pair_dist", "rw_rank", "V")
    rec = {k: [] for k in keys}
    times = []

    n_steps = simcfg.n_steps
    every = int(simcfg.record_every)
    violations = 0
    flag = "horizon"
    step = 0
    V_prev = None
    with np.errstate(all="ignore"):
        err, k1 = f(P)
        while True:
            V = 0.5 * float(err @ (weights * err))
            if V_prev is not None and V > V_prev + 1e-9 * V_prev:
                violations += 1
            V_prev = V
            if step % every == 0:
                times.append(step * simcfg.dt)
                _record(spec, P, err, weights, simcfg, rec)
            grad = float(np.linalg.norm(k1))
            if np.linalg.norm(err) < simcfg.err_tol:
                flag = "converged"
                break
            if grad < simcfg.grad_tol:
                flag = "incorrect_equilibrium"
                break
            if step >= n_steps:
                break
            P_new = _step(f, P, simcfg.dt, simcfg.integrator, k1)
            if not np.all(np.isfinite(P_new)) or min_pair_distance(spec, P_new) <= EPS_SEP:
                flag = "degenerate"
                break
            err_new, k1_new = f(P_new)
            if not (np.all(np.isfinite(err_new)) and np.all(np.isfinite(k1_new))):
                flag = "degenerate"
                break
            P, err, k1 = P_new, err_new, k1_new
            step += 1

    monitors = {k: np.array(rec[k]) for k in keys[2:]}
    return SimulationTrace(
        spec=spec,
        simcfg=simcfg,
        times=np.array(times),
        positions=np.array(rec["positions"]),
        errors=np.array(rec["errors"]).reshape(len(times), spec.sigma),
        monitors=monitors,
        flag=flag,
        steps=step,
        final_time=step * simcfg.dt,
        final_positions=P.copy(),
        final_error=err.copy(),
        final_grad_norm=float(np.linalg.norm(k1)),
        lyapunov_violations=violations,
    )


@dataclass
class BatchResult:
    """Outcome of :func:`simulate_batch`, one entry per trial."""

    final_positions: np.ndarray
    final_errors: np.ndarray
    grad_norms: np.ndarray
    flags: list
    stop_times: np.ndarray
    max_collinearity: np.ndarray
    min_pair_dist: np.ndarray


def collinearity(P) -> np.ndarray:
    """Smallest singular value of the centered positions, batched."""
    P = np.asarray(P, dtype=float)
    C = P - P.mean(axis=-2, keepdims=True)
    return np.linalg.svd(C, compute_uv=False)[..., -1]


def simulate_batch(spec: FrameworkSpec, P0, simcfg: SimConfig | None = None) -> BatchResult:
    """Integrate many independent initial conditions in lock step.

    Trials are vectorized along the leading axis of ``P0`` (shape
    ``(B, n, d)``). Each trial freezes once it meets a stop condition, so
    the result is identical to running :func:`simulate` on each start with
    the same settings. No trace is kept; only per-trial summaries.
    """
    simcfg = simcfg or SimConfig()
    P = np.array(P0, dtype=float)
    if P.ndim != 3 or P.shape[1:] != (spec.n, spec.d):
        raise InvalidArgument(f"expected shape (B, {spec.n}, {spec.d}), got {P.shape}")
    B = P.shape[0]
    weights = simcfg.gains.vector(spec)
    f = _field(spec, weights)
    flags = np.array(["horizon"] * B, dtype=object)
    stop_step = np.full(B, simcfg.n_steps)
    active = np.ones(B, dtype=bool)
    max_col = np.zeros(B)
    dmin = np.full(B, np.inf)
    final_err = np.zeros((B, spec.sigma))
    grad = np.zeros(B)
    if B == 0:
        return BatchResult(P, final_err, grad, [], np.zeros(0), max_col, dmin)
    with np.errstate(all="ignore"):
        err, k1 = f(P)
        step = 0
        while True:
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            Pa, ea, ka = P[idx], err[idx], k1[idx]
            max_col[idx] = np.maximum(max_col[idx], collinearity(Pa))
            dmin[idx] = np.minimum(dmin[idx], min_pair_distance(spec, Pa))
            final_err[idx] = ea
            g = np.linalg.norm(ka.reshape(idx.size, -1), axis=1)
            grad[idx] = g
            enorm = np.linalg.norm(ea, axis=1)
            done_c = enorm < simcfg.err_tol
            done_i = ~done_c & (g < simcfg.grad_tol)
            for mask, name in ((done_c, "converged"), (done_i, "incorrect_equilibrium")):
                flags[idx[mask]] = name
                stop_step[idx[mask]] = step
            active[idx[done_c | done_i]] = False
            if step >= simcfg.n_steps:
                break
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            Pn = _step(f, P[idx], simcfg.dt, simcfg.integrator, k1[idx])
            en, kn = f(Pn)
            bad = ~(
                np.all(np.isfinite(Pn.reshape(idx.size, -1)), axis=1)
                & (min_pair_distance(spec, Pn) > EPS_SEP)
                & np.all(np.isfinite(en), axis=1)
                & np.all(np.isfinite(kn.reshape(idx.size, -1)), axis=1)
            )
            flags[idx[bad]] = "degenerate"
            stop_step[idx[bad]] = step
            active[idx[bad]] = False
            good = idx[~bad]
            P[good], err[good], k1[good] = Pn[~bad], en[~bad], kn[~bad]
            step += 1
    return BatchResult(
        final_positions=P,
        final_errors=final_err,
        grad_norms=grad,
        flags=list(flags),
        stop_times=stop_step * simcfg.dt,
        max_collinearity=max_col,
        min_pair_dist=dmin,
    )


# --------------------------------------------------------------------------
# monitors


def monitor_centroid(trace: SimulationTrace) -> float:
    """Largest distance of the centroid from its initial value."""
    P = trace.all_positions()
    c = P.mean(axis=1)
    return float(np.max(np.linalg.norm(c - c[0], axis=1)))


def monitor_scale(trace: SimulationTrace) -> float:
    """Largest deviation of ``p^s = |p - 1 kron p^o| / sqrt(n)`` from its start.

    Raises
    ------
    InvalidPrecondition
        If the framework has distance constraints, since the scale is then
        not conserved by the flow.
    """
    if trace.spec.has_edges:
        raise InvalidPrecondition("scale is only conserved when there are no distance constraints")
    P = trace.all_positions()
    C = P - P.mean(axis=1, keepdims=True)
    s = np.sqrt(np.sum(C * C, axis=(1, 2)) / trace.spec.n)
    return float(np.max(np.abs(s - s[0])))


def monitor_cp_rank(trace: SimulationTrace, centered: bool = True) -> bool:
    """Is the rank of the position matrix the same at every snapshot?"""
    key = "cp_rank" if centered else "cp_rank_raw"
    ranks = list(trace.monitors[key])
    P = trace.final_positions
    ranks.append(_centered_rank(P) if centered else _raw_rank(P))
    return len(set(ranks)) == 1


def monitor_rw_rank(trace: SimulationTrace) -> bool:
    """Is the numerical rank of R_W the same at every snapshot?"""
    ranks = trace.monitors["rw_rank"]
    if np.any(ranks < 0):
        raise InvalidPrecondition("trace was recorded without rank monitoring")
    return len(set(int(r) for r in ranks)) == 1


def log_error_slope(trace: SimulationTrace, floor: float = None, start_frac: float = 0.0):
    """Least-squares fit of ``log |e(t)|`` on the decaying part of a run.

    The segment runs from ``start_frac`` of the recorded samples to the
    last sample whose error is above ``floor`` (default ``100 * err_tol``).

    Returns
    -------
    slope, r_squared : float
        ``nan`` if fewer than three samples qualify.
    """
    norms = np.linalg.norm(trace.errors, axis=1)
    floor = 100.0 * trace.simcfg.err_tol if floor is None else floor
    i0 = int(start_frac * len(norms))
    keep = np.arange(len(norms)) >= i0
    keep &= norms > floor
    if keep.sum() < 3:
        return float("nan"), float("nan")
    t = trace.times[keep]
    y = np.log(norms[keep])
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def collision_margin(spec: FrameworkSpec, cfg0, desired_cfg) -> float:
    """Smallest pairwise value of the collision-avoidance bound.

    For each pair ``(i, j)`` the bound is
    ``|p*_i - p*_j| - sqrt(n) |p(0) - 1 kron p^o| - sum_l |p^o - p*_l|``
    with ``p^o`` the (conserved) centroid of ``cfg0``.
    """
    P0 = as_positions(cfg0, spec)
    Ps = as_positions(desired_cfg, spec)
    n = spec.n
    po = P0.mean(axis=0)
    spread = np.sqrt(n) * np.linalg.norm(P0 - po)
    offset = float(np.sum(np.linalg.norm(po - Ps, axis=1)))
    i, j = np.triu_indices(n, 1)
    pair = np.linalg.norm(Ps[i] - Ps[j], axis=1)
    return float(np.min(pair) - spread - offset)


def collision_certificate(spec: FrameworkSpec, cfg0, desired_cfg, zeta: float) -> bool:
    """True iff the collision bound exceeds ``zeta`` for every pair.

    By the triangle inequality ``sum_l |p^o - p*_l| >= |p*_i - p*_j|``, so
    the bound is never positive and the certificate holds for no ``zeta >= 0``.
    """
    return collision_margin(spec, cfg0, desired_cfg) > zeta


# --------------------------------------------------------------------------
# scale recovery


def scale_invariant(cfg, d: int | None = None) -> float:
    """``|p - 1 kron p^o|``, conserved by the flow when there are no distances."""
    P = np.asarray(cfg.positions if hasattr(cfg, "positions") else cfg, dtype=float)
    if P.ndim == 1:
        if d is None:
            raise InvalidArgument("flat configuration needs d")
        P = P.reshape(-1, d)
    return float(np.linalg.norm(P - P.mean(axis=0)))


def base_distance_roots(invariant: float, v, direction=None) -> np.ndarray:
    """Real roots of the quadratic in ``x = |z_21|`` (ascending)."""
    V = np.asarray(v, dtype=float)
    if V.ndim == 1:
        V = V.reshape(0, 2) if V.size == 0 else V.reshape(1, -1)
    dim = V.shape[1] if V.size else (len(direction) if direction is not None else 2)
    u = np.eye(dim)[0] if direction is None else np.asarray(direction, float)
    u = u / np.linalg.norm(u)
    n = V.shape[0] + 2
    # sum of |z_ij|^2 over all pairs equals n |p - 1 kron p^o|^2.
    # With z_21 = x u and z_j2 = z_j1 - x u, collect powers of x.
    b = float(np.sum(V @ u))
    c0 = 2.0 * float(np.sum(V * V))
    for a in range(V.shape[0]):
        diff = V[a + 1 :] - V[a]
        c0 += float(np.sum(diff * diff))
    qa, qb, qc = n - 1.0, -2.0 * b, c0 - n * invariant**2
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0:
        if disc > -1e-12 * (qb * qb + abs(4 * qa * qc)):
            disc = 0.0
        else:
            return np.zeros(0)
    sq = np.sqrt(disc)
    # numerically stable pair of roots
    q = -0.5 * (qb + np.copysign(sq, qb)) if qb != 0 else -0.5 * sq
    r1 = q / qa
    r2 = qc / q if q != 0 else -r1
    return np.sort(np.array([r1, r2]))


def recover_base_distance(invariant, v, direction=None, previous=None) -> float:
    """Recover ``|z_21|`` from ``v = [z_31, ..., z_n1]`` and the conserved scale.

    Parameters
    ----------
    invariant : float or SimulationTrace
        ``|p(0) - 1 kron p^o(0)|``; a trace supplies it from its first frame.
    v : array_like, shape (n - 2, d)
        Relative positions of agents 3..n with respect to agent 1, in a
        frame where ``direction`` is the direction of ``z_21``.
    direction : array_like, optional
        Unit direction of ``z_21`` in the frame of ``v``; the first axis by
        default.
    previous : float, optional
        Earlier value of ``|z_21|`` along the same run. When both roots are
        non-negative the one nearer to ``previous`` is returned.

    Raises
    ------
    NoRealRoot
        No non-negative root exists, so the inputs are inconsistent.
    AmbiguousRoot
        Two distinct non-negative roots exist and ``previous`` is not given;
        both are attached.

    Notes
    -----
    The invariant fixes one quadratic in ``|z_21|``. The product of its
    roots has no fixed sign, so for many shapes (including a triangular
    bipyramid at rest) both roots are positive and ``v`` alone does not
    determine the distance.
    """
    if isinstance(invariant, SimulationTrace):
        if invariant.spec.has_edges:
            raise InvalidPrecondition("scale recovery needs a run without distance constraints")
        invariant = scale_invariant(invariant.positions[0])
    roots = base_distance_roots(float(invariant), v, direction)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(roots)))) if roots.size else 0.0
    nonneg = roots[roots >= -tol]
    if nonneg.size == 0:
        raise NoRealRoot("no non-negative solution for |z_21|")
    if nonneg.size == 2 and nonneg[1] - nonneg[0] > 1e-9 * max(1.0, nonneg[1]):
        if previous is None:
            raise AmbiguousRoot(nonneg)
        return float(max(nonneg[np.argmin(np.abs(nonneg - previous))], 0.0))
    return float(max(nonneg[-1], 0.0))


def track_base_distance(trace: SimulationTrace) -> np.ndarray:
    """Recover ``|z_21|`` at every snapshot of an angle-only run.

    The first value is measured from the initial frame, which is known
    whenever the invariant is; later values follow the root branch nearest
    to the previous estimate.
    """
    if trace.spec.has_edges:
        raise InvalidPrecondition("scale recovery needs a run without distance constraints")
    inv = scale_invariant(trace.positions[0])
    frames = trace.all_positions()
    prev = float(np.linalg.norm(frames[0][1] - frames[0][0]))
    out = []
    for P in frames:
        v, u = relative_to_agent_one(P)
        prev = recover_base_distance(inv, v, u, previous=prev)
        out.append(prev)
    return np.array(out)


def relative_to_agent_one(P) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(v, direction)`` with ``v[j] = p_{j+3} - p_1`` and the unit ``z_21``."""
    P = np.asarray(P, dtype=float)
    z21 = P[1] - P[0]
    return P[2:] - P[0], z21 / np.linalg.norm(z21)


# --------------------------------------------------------------------------
# CSV output


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trace(trace: SimulationTrace, out_dir, extra: dict | None = None) -> dict:
    """Write positions.csv, errors.csv, monitors.csv and summary.json.

    ``extra`` entries are merged into the summary.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = trace.spec
    axes = "xyz"[: spec.d]
    with open(out / "positions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", *axes])
        for t, P in zip(trace.times, trace.positions):
            for a in range(spec.n):
                w.writerow([_fmt(t), a + 1, *(_fmt(x) for x in P[a])])
    labels = spec.constraint_labels()
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "constraint_id", "error"])
        for t, e in zip(trace.times, trace.errors):
            for lab, x in zip(labels, e):
                w.writerow([_fmt(t), lab, _fmt(x)])
    mon = trace.monitors
    with open(out / "monitors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"centroid_{a}" for a in axes), "scale", "cp_rank", "cp_rank_raw",
                    "rw_rank", "min_pair_dist", "V"])
        for r, t in enumerate(trace.times):
            w.writerow([
                _fmt(t),
                *(_fmt(x) for x in mon["centroid"][r]),
                _fmt(mon["scale"][r]),
                int(mon["cp_rank"][r]),
                int(mon["cp_rank_raw"][r]),
                int(mon["rw_rank"][r]),
                _fmt(mon["min_pair_dist"][r]),
                _fmt(mon["V"][r]),
            ])
    summary = trace.summary()
    summary.update(extra or {})
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def read_positions_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Load ``positions.csv`` as ``(times, positions[T, n, d])``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InvalidArgument(f"{path} holds no samples")
    d = len(rows[0]) - 2
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    times = np.unique(data[:, 0])
    n = int(data[:, 1].max())
    P = data[:, 2:].reshape(len(times), n, d)
    return times, P
