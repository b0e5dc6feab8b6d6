"""Small dense linear-algebra helpers used by the continuation kernels."""

from __future__ import annotations

import numpy as np

from .errors import NoTangentError

# Singular values below NULLSPACE_RCOND * s_max count as zero when extracting
# tangent spaces; PINV_RCOND is the cutoff for least-squares Newton steps.
NULLSPACE_RCOND = 1e-8
PINV_RCOND = 1e-10

FD_STEP = 1e-6


def fd_step(value: float) -> float:
    """Per-coordinate central-difference step, scaled by magnitude."""
    return FD_STEP * max(1.0, abs(value))


def fd_jacobian(fun, x: np.ndarray, f0: np.ndarray | None = None) -> np.ndarray:
    """Central finite-difference Jacobian of ``fun`` at ``x``.

    ``fun`` maps a 1-D array to a 1-D array.  ``f0`` is only used to size the
    output when provided.
    """
    x = np.asarray(x, dtype=float)
    if f0 is None:
        f0 = np.asarray(fun(x), dtype=float)
    m = f0.shape[0]
    jac = np.empty((m, x.shape[0]))
    for j in range(x.shape[0]):
        h = fd_step(x[j])
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac


def nullspace(jac: np.ndarray, rcond: float = NULLSPACE_RCOND) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical null space of ``jac``."""
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    _, s, vt = np.linalg.svd(jac)
    if s.size == 0:
        return np.eye(jac.shape[1])
    cutoff = rcond * s[0]
    rank = int(np.sum(s > cutoff))
    return vt[rank:].T


def tangent_vector(jac: np.ndarray, orient: np.ndarray | None = None) -> np.ndarray:
    """Unit tangent spanning a one-dimensional null space of ``jac``.

    With ``orient`` given, the sign is chosen so the tangent has positive dot
    product with it; otherwise the entry of largest magnitude is made
    positive.
    """
    basis = nullspace(jac)
    if basis.shape[1] == 0:
        raise NoTangentError("map Jacobian has no null space (over-constrained)")
    if basis.shape[1] > 1 and orient is not None:
        # Closest null direction to the previous tangent.
        coeff = basis.T @ orient
        vec = basis @ coeff
        nrm = np.linalg.norm(vec)
        if nrm > 0:
            return vec / nrm
    vec = basis[:, 0]
    if orient is not None:
        if float(orient @ vec) < 0.0:
            vec = -vec
        return vec
    return fix_sign(vec)


def fix_sign(vec: np.ndarray) -> np.ndarray:
    """Flip ``vec`` so its largest-magnitude entry is positive."""
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec.copy()


def pinv_solve(a: np.ndarray, b: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a x = b``."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0:
        return np.zeros(a.shape[1])
    cutoff = rcond * s[0]
    inv = np.where(s > cutoff, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return vt.T @ (inv * (u.T @ b))


def project_out(vec: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Component of ``vec`` orthogonal to the unit vector ``direction``."""
    return vec - (vec @ direction) * direction
