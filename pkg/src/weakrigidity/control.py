"""Gradient-flow formation controller and its interaction-matrix form.

The stacked law is ``u = -R_W^T K e`` with ``K`` diagonal (one gain for
distance errors, one for angle errors), i.e. the negative gradient of
``V = 0.5 e^T K e``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .graph import FrameworkSpec, as_positions, sensing_graph
from .rigidity import ensure_separated, fw_values, weighted_gradient


@dataclass(frozen=True)
class Gains:
    """Proportional gains on distance and angle errors."""

    dist: float = 1.0
    angle: float = 1.0

    def vector(self, spec: FrameworkSpec) -> np.ndarray:
        return np.concatenate([np.full(spec.m, self.dist), np.full(spec.w, self.angle)])


def _gains(gains) -> Gains:
    if gains is None:
        return Gains()
    if isinstance(gains, Gains):
        return gains
    dist, angle = gains
    return Gains(float(dist), float(angle))


def error_vector(spec: FrameworkSpec, cfg) -> np.ndarray:
    """Squared-length errors followed by cosine errors."""
    P = as_positions(cfg, spec)
    ensure_separated(spec, P)
    return fw_values(spec, P) - spec.targets


def lyapunov(spec: FrameworkSpec, cfg, gains=None) -> float:
    """``V = 0.5 e^T K e``."""
    e = error_vector(spec, cfg)
    return 0.5 * float(e @ (_gains(gains).vector(spec) * e))


def control_input(spec: FrameworkSpec, cfg, gains=None) -> np.ndarray:
    """Stacked velocity command ``-R_W^T K e`` of length ``d n``."""
    P = as_positions(cfg, spec)
    ensure_separated(spec, P)
    _, G = weighted_gradient(spec, P, _gains(gains).vector(spec))
    return -G.reshape(-1)


def _cos_grads(a, b):
    """Cosine of the angle between ``a`` and ``b`` and its gradients."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    ah, bh = a / na, b / nb
    c = float(ah @ bh)
    return c, (bh - c * ah) / na, (ah - c * bh) / nb


def agent_control_input_from_measurements(
    spec: FrameworkSpec, k: int, measurements: dict, gains=None
) -> np.ndarray:
    """Velocity of agent ``k`` computed from its own relative measurements.

    Parameters
    ----------
    spec : FrameworkSpec
    k : int
        0-based agent index.
    measurements : dict
        Maps each sensing neighbour ``j`` to ``z_kj = p_k - p_j`` expressed
        in agent ``k``'s local frame.
    gains : Gains or (float, float), optional

    Returns
    -------
    ndarray of shape (d,)
        The command in the same local frame.

    Notes
    -----
    Only differences of measurements are used, so a translation of the
    local frame has no effect and a rotation of it rotates the output.
    """
    g = _gains(gains)
    u = np.zeros(spec.d)

    def z(a, b):
        # z_ab from the point of view of agent k, whose own position is 0
        pa = np.zeros(spec.d) if a == k else -np.asarray(measurements[a], dtype=float)
        pb = np.zeros(spec.d) if b == k else -np.asarray(measurements[b], dtype=float)
        return pa - pb

    for g_idx, (i, j) in enumerate(spec.edges):
        if k not in (i, j):
            continue
        other = j if k == i else i
        zk = z(k, other)
        e = float(zk @ zk) - spec.edge_targets[g_idx]
        u -= g.dist * e * 2.0 * zk

    for h, (apex, i, j) in enumerate(spec.angles):
        if k not in (apex, i, j):
            continue
        a, b = z(apex, i), z(apex, j)
        c, dc_da, dc_db = _cos_grads(a, b)
        e = c - spec.angle_targets[h]
        # a = p_apex - p_i and b = p_apex - p_j
        if k == apex:
            grad = dc_da + dc_db
        elif k == i:
            grad = -dc_da
        else:
            grad = -dc_db
        u -= g.angle * e * grad
    return u


def agent_control_input(spec: FrameworkSpec, cfg, k: int, gains=None) -> np.ndarray:
    """Velocity of agent ``k`` from relative positions of its sensing neighbours."""
    P = as_positions(cfg, spec)
    ensure_separated(spec, P)
    if not 0 <= k < spec.n:
        raise InvalidArgument(f"agent index {k} out of range")
    nbrs = sensing_graph(spec).neighbors[k]
    meas = {j: P[k] - P[j] for j in nbrs}
    return agent_control_input_from_measurements(spec, k, meas, gains)


def angle_coefficients(pk, pi, pj):
    """Coefficients of ``p_k, p_i, p_j`` in the gradient of one cosine.

    Returns a symmetric 3x3 matrix ``C`` (rows/cols ordered k, i, j) with
    ``grad_{p_r} cos = sum_s C[r, s] p_s``. Each row sums to zero.
    """
    a = np.asarray(pk, float) - np.asarray(pi, float)
    b = np.asarray(pk, float) - np.asarray(pj, float)
    A = np.linalg.norm(a)
    B = np.linalg.norm(b)
    c = float(a @ b) / (A * B)
    ab = 1.0 / (A * B)
    ca, cb = c / A**2, c / B**2
    alpha_k = 2.0 * ab - ca - cb
    alpha_i = -ab + ca
    alpha_j = -ab + cb
    beta_i = -ca
    beta_j = ab
    gamma_j = -cb
    return np.array(
        [
            [alpha_k, alpha_i, alpha_j],
            [alpha_i, beta_i, beta_j],
            [alpha_j, beta_j, gamma_j],
        ]
    )


def interaction_matrix(spec: FrameworkSpec, cfg, gains=None, errors=None) -> np.ndarray:
    """Symmetric ``n x n`` matrix with ``R_W^T K e = (E kron I_d) p``.

    Parameters
    ----------
    errors : array_like, optional
        Error vector to weight the contributions with. Defaults to the error
        of ``cfg`` itself.
    """
    P = as_positions(cfg, spec)
    ensure_separated(spec, P)
    e = fw_values(spec, P) - spec.targets if errors is None else np.asarray(errors, float)
    we = e * _gains(gains).vector(spec)
    n = spec.n
    E = np.zeros((n, n))
    for g, (i, j) in enumerate(spec.edges):
        v = 2.0 * we[g]
        E[i, i] += v
        E[j, j] += v
        E[i, j] -= v
        E[j, i] -= v
    for h, (k, i, j) in enumerate(spec.angles):
        C = angle_coefficients(P[k], P[i], P[j])
        idx = np.array([k, i, j])
        E[np.ix_(idx, idx)] += we[spec.m + h] * C
    return E
