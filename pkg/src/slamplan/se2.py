"""Planar rigid-motion helpers for pose-graph work.

Poses are arrays (x, y, theta) with theta in radians.  Composition and
relative poses follow the usual convention: compose(a, b) applies b in
a's frame, between(a, b) is the motion observed from a to b.
"""

from __future__ import annotations

import numpy as np


def wrap_angle(a):
    """Wrap to (-pi, pi]; -pi maps to +pi."""
    w = np.remainder(np.asarray(a, dtype=float), 2.0 * np.pi)
    return np.where(w > np.pi, w - 2.0 * np.pi, w) if np.ndim(w) else (
        float(w - 2.0 * np.pi) if w > np.pi else float(w)
    )


def rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def compose(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    xy = a[:2] + rot(a[2]) @ b[:2]
    return np.array([xy[0], xy[1], wrap_angle(a[2] + b[2])])


def inverse(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    xy = -rot(a[2]).T @ a[:2]
    return np.array([xy[0], xy[1], wrap_angle(-a[2])])


def between(a, b) -> np.ndarray:
    """Relative pose taking a to b (a's frame)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    xy = rot(a[2]).T @ (b[:2] - a[:2])
    return np.array([xy[0], xy[1], wrap_angle(b[2] - a[2])])


def edge_residual(xi, xj, z) -> np.ndarray:
    """Residual of measurement z on the pair (xi, xj), angle wrapped.

    e = t2v(Z^-1 * (Xi^-1 * Xj)): the prediction error is rotated into the
    measurement frame so the covariance applies in its own axes.
    """
    pred = between(xi, xj)
    z = np.asarray(z, dtype=float)
    e_xy = rot(z[2]).T @ (pred[:2] - z[:2])
    return np.array([e_xy[0], e_xy[1], wrap_angle(pred[2] - z[2])])


def edge_jacobians(xi, xj, z) -> tuple[np.ndarray, np.ndarray]:
    """Analytic Jacobians of the residual w.r.t. xi and xj (3x3 each)."""
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    ri = rot(xi[2])
    rz = rot(z[2])
    rzt_rit = rz.T @ ri.T
    dt = xj[:2] - xi[:2]
    s, c = np.sin(xi[2]), np.cos(xi[2])
    drit = np.array([[-s, c], [-c, -s]])  # d(Ri^T)/dtheta
    a = np.zeros((3, 3))
    a[:2, :2] = -rzt_rit
    a[:2, 2] = rz.T @ (drit @ dt)
    a[2, 2] = -1.0
    b = np.zeros((3, 3))
    b[:2, :2] = rzt_rit
    b[2, 2] = 1.0
    return a, b
