"""Small dense linear algebra used throughout the package.

Everything here operates on tiny matrices (the benchmark state dimension is
4 and regression windows rarely exceed 3), so the routines favour clarity
over blocking or sparsity. Covariance-producing routines return exactly
symmetric matrices.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "LinalgError",
    "NotPositiveDefinite",
    "NotSymmetric",
    "DimensionMismatch",
    "NoConvergence",
    "symmetrize",
    "cholesky",
    "spd_solve",
    "riccati_step",
    "steady_state_riccati",
    "solve_discrete_lyapunov",
    "is_schur_stable",
    "eig_sym",
    "min_eig_sym",
    "psd_geq",
    "sherman_morrison_update",
    "sample_gaussian",
    "spectral_norm",
]


class LinalgError(ArithmeticError):
    """Base class for numerical failures raised by this module."""


class NotPositiveDefinite(LinalgError):
    pass


class NotSymmetric(LinalgError):
    pass


class DimensionMismatch(LinalgError, ValueError):
    pass


class NoConvergence(LinalgError):
    """An iteration exhausted its budget (or diverged) before meeting tol."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _as_matrix(m, name="matrix"):
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinalgError(f"{name} has non-finite entries")
    return a


def _as_vector(v, name="vector"):
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {a.shape}")
    return a


def _check_square(a, name="matrix"):
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")


def _check_symmetric(a, tol=1e-10, name="matrix"):
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise NotSymmetric(f"{name} is not symmetric within {tol:g}")


def symmetrize(m):
    """Return ``(m + m.T) / 2``."""
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def cholesky(m):
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == m``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot falls below ``1e-12 * trace(m) / rows``.
    """
    a = _as_matrix(m)
    _check_square(a)
    _check_symmetric(a)
    n = a.shape[0]
    floor = 1e-12 * abs(np.trace(a)) / n
    L = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= floor:
            raise NotPositiveDefinite(f"pivot {pivot:.3e} at column {j}")
        L[j, j] = np.sqrt(pivot)
        for i in range(j + 1, n):
            L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def spd_solve(m, b):
    """Solve ``m x = b`` for symmetric positive definite ``m``."""
    a = _as_matrix(m)
    rhs = _as_vector(b, "b")
    if a.shape[0] != rhs.shape[0]:
        raise DimensionMismatch(f"matrix {a.shape} and rhs {rhs.shape}")
    L = cholesky(a)
    n = len(rhs)
    y = np.zeros(n)
    for i in range(n):
        y[i] = (rhs[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (y[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def riccati_step(p, c, gamma, q, noise_var):
    """One step of the filtering Riccati recursion.

    Returns ``G P G' + Q - G P c (c' P c + r)^-1 c' P G'`` with ``G = gamma``
    and ``r = noise_var``.
    """
    p = _as_matrix(p, "p")
    gamma = _as_matrix(gamma, "gamma")
    q = _as_matrix(q, "q")
    c = _as_vector(c, "c")
    d = gamma.shape[0]
    if not (p.shape == gamma.shape == q.shape == (d, d) and c.shape == (d,)):
        raise DimensionMismatch(
            f"p {p.shape}, gamma {gamma.shape}, q {q.shape}, c {c.shape}"
        )
    pc = p @ c
    s = c @ pc + noise_var
    gpc = gamma @ pc
    out = gamma @ p @ gamma.T + q - np.outer(gpc, gpc) / s
    return symmetrize(out)


def steady_state_riccati(gamma, q, c, noise_var, tol=1e-10, max_iter=1_000_000):
    """Fixed point of :func:`riccati_step` for a constant output vector ``c``.

    Iterates from ``P0 = Q``. Convergence presumes ``(gamma, Q^1/2)`` is
    controllable and ``(gamma, c')`` is detectable; neither is checked.
    """
    p = symmetrize(_as_matrix(q, "q"))
    residual = np.inf
    for it in range(1, max_iter + 1):
        nxt = riccati_step(p, c, gamma, q, noise_var)
        residual = float(np.max(np.abs(nxt - p)))
        p = nxt
        if residual <= tol:
            return p
        if not np.isfinite(residual):
            break
    raise NoConvergence(
        f"Riccati iteration stalled at residual {residual:.3e}",
        residual=residual,
        iterations=it,
    )


def solve_discrete_lyapunov(gamma, w, tol=1e-10, max_iter=100):
    """Solve ``X = gamma' X gamma + W`` by the doubling iteration.

    ``X_{k+1} = X_k + A_k' X_k A_k`` and ``A_{k+1} = A_k^2`` starting from
    ``X_0 = W``, ``A_0 = gamma``; after ``k`` steps ``X_k`` sums the first
    ``2^k`` terms of the series. Both the residual and the next increment
    must fall below ``tol * max(1, max|X|)``.

    Raises
    ------
    NoConvergence
        When the series does not settle, which signals a spectral radius of
        at least one.
    """
    a = _as_matrix(gamma, "gamma")
    _check_square(a, "gamma")
    x = symmetrize(_as_matrix(w, "w"))
    if x.shape != a.shape:
        raise DimensionMismatch(f"gamma {a.shape} and w {x.shape}")
    w0 = x.copy()
    g = a.copy()
    residual = np.inf
    for it in range(max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            residual = float(np.max(np.abs(x - a.T @ x @ a - w0)))
            inc = g.T @ x @ g
        if not np.isfinite(residual) or not np.all(np.isfinite(inc)):
            break
        scale = tol * max(1.0, float(np.max(np.abs(x))))
        # a small residual alone is not enough: for rho >= 1 it stays O(1)
        # while X grows, so the next doubling increment must vanish too
        if residual <= scale and float(np.max(np.abs(inc))) <= scale:
            return x
        if it == max_iter:
            break
        with np.errstate(over="ignore", invalid="ignore"):
            x = symmetrize(x + inc)
            g = g @ g
    raise NoConvergence(
        f"Lyapunov doubling did not converge (residual {residual:.3e})",
        residual=residual,
        iterations=it,
    )


def is_schur_stable(m, tol=1e-10, max_iter=100):
    """True iff the Lyapunov series of ``m`` converges (spectral radius < 1)."""
    a = _as_matrix(m)
    _check_square(a)
    try:
        solve_discrete_lyapunov(a, np.eye(a.shape[0]), tol=tol, max_iter=max_iter)
    except NoConvergence:
        return False
    return True


def eig_sym(m, tol=1e-12, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    a = _as_matrix(m).copy()
    _check_square(a)
    _check_symmetric(a)
    a = symmetrize(a)
    n = a.shape[0]
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[r, r] = c
                rot[p, r] = s
                rot[r, p] = -s
                a = rot.T @ a @ rot
                a[p, r] = a[r, p] = 0.0
    else:
        raise NoConvergence("Jacobi sweeps exhausted")
    return np.sort(np.diag(a))


def min_eig_sym(m):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(eig_sym(m)[0])


def psd_geq(a, b, tol=1e-9):
    """Loewner order test ``a >= b`` up to ``-tol`` slack on the spectrum."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionMismatch(f"a {a.shape} and b {b.shape}")
    return min_eig_sym(symmetrize(a - b)) >= -tol


def sherman_morrison_update(v_inv, x):
    """Rank-one update of an inverse Gram matrix.

    Given ``V^-1`` and a new regressor ``x`` returns ``(V + x x')^-1`` along
    with ``log det(V + x x') - log det(V)``.
    """
    v_inv = _as_matrix(v_inv, "v_inv")
    x = _as_vector(x, "x")
    vx = v_inv @ x
    denom = 1.0 + x @ vx
    return symmetrize(v_inv - np.outer(vx, vx) / denom), float(np.log(denom))


def sample_gaussian(mean, cov, rng):
    """Draw from ``N(mean, cov)`` using a ridge-stabilised Cholesky factor."""
    mean = _as_vector(mean, "mean")
    cov = _as_matrix(cov, "cov")
    n = len(mean)
    if cov.shape != (n, n):
        raise DimensionMismatch(f"mean {mean.shape} and cov {cov.shape}")
    u = rng.standard_normal(n)
    if not np.any(cov):
        return mean.copy()
    ridge = 1e-12 * max(1.0, float(np.trace(cov)) / n)
    L = cholesky(symmetrize(cov) + ridge * np.eye(n))
    return mean + L @ u


def spectral_norm(m, iters=500, tol=1e-13):
    """Largest singular value by power iteration on ``m' m``."""
    a = _as_matrix(m)
    if not np.any(a):
        return 0.0
    gram = a.T @ a
    v = np.ones(a.shape[1]) / np.sqrt(a.shape[1])
    lam = 0.0
    for _ in range(iters):
        w = gram @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # start vector landed in the null space; restart on a basis vector
            v = np.eye(a.shape[1])[int(np.argmax(np.abs(np.diag(gram))))]
            continue
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return float(np.sqrt(lam))
