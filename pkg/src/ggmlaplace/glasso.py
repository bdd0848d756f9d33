"""Graphical lasso, optionally restricted to the edges of a support graph.

Minimises ``-log det(Omega) + tr(S Omega) + rho * sum_ij |omega_ij|`` over
positive definite ``Omega`` whose entries outside the support are zero. The
penalty runs over the full matrix, so each off-diagonal pair is charged twice
and each diagonal entry once.

The solver is a proximal Newton method over the free entries: the quadratic
model uses the exact restricted Hessian, its lasso subproblem is solved by
cyclic coordinate descent finished with an exact solve on the detected
sign pattern, and the step is backtracked until the iterate is
positive definite (checked by Cholesky) and the objective has decreased
sufficiently. Optimality is certified by the KKT residual.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._kernels import quadratic_lasso_cd
from .errors import InvalidPenalty, NotPositiveDefinite
from .graphmodel import FreeIndexSet, Graph
from .matrixcore import as_symmetric, cholesky

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 500
_ARMIJO = 1e-4
_MIN_STEP = 2.0**-40
_FLAT = 1e-13
_CD_SWEEPS = 50
_ACTIVE_ITER = 4


@dataclass(frozen=True)
class GlassoProblem:
    sigma_hat: np.ndarray
    rho: float
    support: Optional[Graph] = None

    def __post_init__(self):
        s = as_symmetric(self.sigma_hat)
        if np.any(np.diag(s) < 0):
            raise ValueError("sample covariance has a negative diagonal entry")
        if not self.rho >= 0:
            raise InvalidPenalty(f"rho must be >= 0, got {self.rho}")
        if self.support is not None and self.support.p != s.shape[0]:
            raise ValueError("support dimension does not match sigma_hat")
        object.__setattr__(self, "sigma_hat", s)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def p(self):
        return self.sigma_hat.shape[0]

    @property
    def graph(self):
        return self.support if self.support is not None else Graph.complete(self.p)

    @property
    def index(self):
        return FreeIndexSet.of(self.graph)


@dataclass(frozen=True)
class GlassoSolution:
    omega_star: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    objective_trace: tuple = field(default=(), repr=False)


def restricted_hessian(w, idx):
    """Hessian of ``-log det`` over the coordinates in ``idx``, from ``w = Omega^{-1}``.

    Entry ``(a, b)`` is ``tr(W E_a W E_b)``, which expands to
    ``m_a m_b / 2 * (W[i,l] W[j,m] + W[i,m] W[j,l])`` with ``m`` the
    coordinate multiplicity (1 diagonal, 2 off-diagonal).
    """
    r, c, m = idx.rows, idx.cols, idx.mult
    h = w[np.ix_(r, r)] * w[np.ix_(c, c)] + w[np.ix_(r, c)] * w[np.ix_(c, r)]
    h *= 0.5 * np.outer(m, m)
    return 0.5 * (h + h.T)


def _penalty_weights(idx, rho):
    return np.where(idx.is_diag, 0.0, idx.mult * rho)


def _objective_from(chol, s, idx, x, rho):
    return -chol.log_det() + float(np.dot(idx.mult * s[idx.rows, idx.cols], x)) + rho * float(np.dot(idx.mult, np.abs(x)))


def objective(omega, problem):
    """Penalised objective at ``omega`` (which must be supported on the problem's graph)."""
    idx = problem.index
    chol = cholesky(omega)
    return _objective_from(chol, problem.sigma_hat, idx, idx.vec(omega), problem.rho)


def _kkt(w, s, idx, x, rho):
    grad = (w - s)[idx.rows, idx.cols]
    target = np.where(idx.is_diag, rho, rho * np.sign(x))
    viol = np.abs(grad - target)
    zero = (x == 0) & ~idx.is_diag
    viol[zero] = np.maximum(0.0, np.abs(grad[zero]) - rho)
    return float(np.max(viol)) if viol.size else 0.0


def kkt_residual(omega, problem):
    """Largest violation of the optimality conditions over the free entries.

    Non-zero entries need ``(W - S)_ij = rho * sign(omega_ij)``, zero ones
    ``|(W - S)_ij| <= rho``; the diagonal needs ``(W - S)_ii = rho``. Entries
    constrained to zero by the support are not checked.
    """
    idx = problem.index
    w = cholesky(omega).inverse()
    return _kkt(w, problem.sigma_hat, idx, idx.vec(omega), problem.rho)


def initial_omega(problem):
    return np.diag(1.0 / (np.diag(problem.sigma_hat) + problem.rho))


def _usable_init(init, problem, idx):
    if init is None:
        return None
    omega = idx.unvec(idx.vec(init))
    try:
        cholesky(omega)
    except NotPositiveDefinite:
        return None
    return omega


def _model_value(hess, c, pen, z):
    return 0.5 * float(z @ hess @ z) + float(c @ z) + float(pen @ np.abs(z))


def _feature_sign(hess, c, pen, z, max_iter):
    """Active-set solver for ``min_z z.H.z/2 + c.z + sum pen*|z|`` started at ``z``.

    Alternates an exact solve on the current sign pattern (with a line search
    over the points where a coordinate changes sign) and activation of the
    zero coordinate that most violates its subgradient bound. Every step
    decreases the objective, so stopping early still returns a descent point.
    """
    z = z.copy()
    free = pen == 0.0
    slack = 1e-12 * (1.0 + float(np.max(np.abs(c))))
    theta = np.sign(z)
    need_activation = False  # first solve on the starting pattern
    for _ in range(max_iter):
        act = (z != 0.0) | free
        if need_activation:
            grad = hess @ z + c
            viol = np.where(act, -np.inf, np.abs(grad) - pen)
            i = int(np.argmax(viol))
            if not viol[i] > slack:
                return z
            theta[i] = -np.sign(grad[i])
            act[i] = True
        za = np.linalg.solve(hess[np.ix_(act, act)], -(c[act] + pen[act] * theta[act]))
        target = np.zeros_like(z)
        target[act] = za
        best, best_val = target, _model_value(hess, c, pen, target)
        step = target - z
        for j in np.flatnonzero((z * target < 0.0) & ~free):
            point = z - (z[j] / step[j]) * step
            point[j] = 0.0
            val = _model_value(hess, c, pen, point)
            if val < best_val:
                best, best_val = point, val
        # a full step re-checks the zeros; a partial one dropped a coordinate
        need_activation = best is target
        z = best
        theta = np.sign(z)
    return z


def _newton_direction(hess, grad, x, pen):
    """Target of the lasso-penalised Newton model: a few coordinate descent
    sweeps to find the sign pattern, then an exact active-set finish."""
    tol = 1e-13 * (1.0 + np.max(np.abs(x)))
    z, _ = quadratic_lasso_cd(hess, grad, x, pen, _CD_SWEEPS, tol)
    return _feature_sign(hess, grad - hess @ x, pen, z, _ACTIVE_ITER * len(x) + 10)


def solve(problem, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, init=None):
    """Solve a (support-constrained) graphical lasso problem.

    ``init`` is an optional warm start; it is restricted to the support and
    ignored if that restriction is not positive definite. Hitting
    ``max_iter`` returns ``converged=False`` rather than raising.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    s, rho = problem.sigma_hat, problem.rho
    if np.any(np.diag(s) + rho <= 0):
        raise NotPositiveDefinite("zero diagonal in sigma_hat with rho = 0 leaves the objective unbounded")
    idx = problem.index
    pen = _penalty_weights(idx, rho)
    lin = idx.mult * s[idx.rows, idx.cols]

    omega = _usable_init(init, problem, idx)
    if omega is None:
        omega = initial_omega(problem)
    x = idx.vec(omega)
    chol = cholesky(omega)
    f = _objective_from(chol, s, idx, x, rho)
    trace = [f]
    converged = False
    it = 0
    kkt = np.inf
    for it in range(max_iter + 1):
        w = chol.inverse()
        kkt = _kkt(w, s, idx, x, rho)
        if kkt <= tol:
            converged = True
            break
        if it == max_iter:
            break
        grad = lin - idx.mult * w[idx.rows, idx.cols]
        grad[idx.is_diag] += rho
        hess = restricted_hessian(w, idx)
        z = _newton_direction(hess, grad, x, pen)
        d = z - x
        decrease = float(grad @ d) + float(pen @ (np.abs(z) - np.abs(x)))
        if decrease >= 0:
            # model predicts no progress: numerically at the optimum
            break
        alpha = 1.0
        accepted = False
        # below roundoff in f the Armijo test cannot rank steps; the
        # quadratic model is exact there, so take the full step if feasible
        flat = -decrease <= _FLAT * (1.0 + abs(f))
        while alpha >= _MIN_STEP:
            x_new = z if alpha == 1.0 else x + alpha * d
            omega_new = idx.unvec(x_new)
            try:
                chol_new = cholesky(omega_new)
            except NotPositiveDefinite:
                alpha *= 0.5
                continue
            f_new = _objective_from(chol_new, s, idx, x_new, rho)
            if flat or f_new <= f + _ARMIJO * alpha * decrease:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        x, omega, chol, f = x_new, omega_new, chol_new, f_new
        trace.append(f)

    return GlassoSolution(
        omega_star=omega,
        objective=f,
        kkt_residual=kkt,
        iterations=it,
        converged=converged,
        objective_trace=tuple(trace),
    )


def default_zero_threshold(omega):
    return 1e-8 * (1.0 + float(np.max(np.abs(omega))))


def zero_set(solution, support, threshold=None):
    """Edges of ``support`` whose solved entry is (numerically) zero."""
    omega = solution.omega_star if isinstance(solution, GlassoSolution) else np.asarray(solution)
    if threshold is None:
        threshold = default_zero_threshold(omega)
    return {e for e in support.edges if abs(omega[e]) <= threshold}
