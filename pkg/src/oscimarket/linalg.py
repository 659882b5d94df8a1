"""Householder reflection and a cyclic Jacobi symmetric eigensolver."""

from __future__ import annotations

import numpy as np

from .errors import EigenNoConvergence, ValidationError


def householder_to_last(u) -> np.ndarray:
    """Symmetric orthogonal H with H @ u = |u| e_n.

    The last component of the reflection vector is formed without
    cancellation, so u close to e_n is handled accurately.
    """
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValidationError("cannot reflect the zero vector")
    u = u / norm
    n = u.size
    v = u.copy()
    head = float(np.dot(u[:-1], u[:-1]))
    if head == 0.0:
        H = np.eye(n)
        if u[-1] < 0:
            H[-1, -1] = -1.0
        return H
    if u[-1] > 0:
        v[-1] = -head / (1.0 + u[-1])  # u_n - 1
    else:
        v[-1] = u[-1] - 1.0
    return np.eye(n) - 2.0 * np.outer(v, v) / np.dot(v, v)


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every pair once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def off_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    the rotations of a round act on disjoint index pairs and are applied as
    one orthogonal update.  Stops when the off-diagonal Frobenius norm is
    below ``tol * |A|_F``.

    Returns ``(eigenvalues, eigenvectors)`` unsorted; column k of the
    eigenvector matrix belongs to eigenvalue k.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("jacobi_eigh needs a square matrix")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(A).max())):
        raise ValidationError("jacobi_eigh needs a symmetric matrix")
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return np.diag(A).copy(), V
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V
    rounds = _round_robin(n)
    for sweep in range(max_sweeps):
        if off_norm(A) <= tol * scale:
            return np.diag(A).copy(), V
        for p, q in rounds:
            apq = A[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            with np.errstate(over="ignore", divide="ignore"):
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 1.0, theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                         np.sign(safe) / (np.abs(safe) + np.sqrt(safe * safe + 1.0)))
            t = np.where(theta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            J = np.eye(n)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
            A[q, p] = 0.0
            A[p, q] = 0.0
            A = 0.5 * (A + A.T)
            V = V @ J
    if off_norm(A) <= tol * scale:
        return np.diag(A).copy(), V
    raise EigenNoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
