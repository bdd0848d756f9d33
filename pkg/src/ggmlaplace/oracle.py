"""Brute-force reference computations used by the test-suite.

Nothing here is on the production path: the Monte-Carlo marginal is only
feasible for ``p <= 4`` and the finite-difference Hessian is quadratic in
the number of free coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import DegenerateProposal, GuardViolated, NotPositiveDefinite
from .glasso import GlassoProblem, solve
from .graphmodel import FreeIndexSet
from .matrixcore import as_symmetric, cholesky
from .score import HessianMatrix, hessian_at

MAX_ORACLE_P = 4
MIN_DRAWS = 10_000
CHUNK = 50_000


@dataclass(frozen=True)
class IntegralEstimate:
    log_value: float
    mc_standard_error: float
    draws: int
    acceptance: float = 1.0


def _lse_pairwise(values):
    """Log-sum-exp combined in a fixed binary tree."""
    vals = list(values)
    while len(vals) > 1:
        nxt = [np.logaddexp(vals[k], vals[k + 1]) for k in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return float(vals[0])


def _batched_h(x, idx, s, rho):
    """Penalised objective for a batch of free-coordinate vectors; ``inf`` outside the PD cone."""
    m = x.shape[0]
    p = idx.p
    om = np.zeros((m, p, p))
    om[:, idx.rows, idx.cols] = x
    om[:, idx.cols, idx.rows] = x
    eig = np.linalg.eigvalsh(om)
    ok = eig[:, 0] > 0
    out = np.full(m, np.inf)
    lin = idx.mult * s[idx.rows, idx.cols]
    logdet = np.sum(np.log(np.where(ok[:, None], eig, 1.0)), axis=1)
    val = -logdet + x @ lin + rho * (np.abs(x) @ idx.mult)
    out[ok] = val[ok]
    return out


def mc_marginal(g, sigma_hat, n, lam, draws=1_000_000, seed=0, inflate=2.0):
    """Importance-sampling estimate of ``log ∫ exp(-n h(Omega)/2) dOmega`` over the graph's free entries.

    The proposal is Gaussian at the constrained glasso solution with
    covariance ``inflate * (2/n) H^{-1}``. Draws outside the positive definite
    cone get weight zero, which is the same as sampling the truncated
    proposal and multiplying by its retained mass.
    """
    s = as_symmetric(sigma_hat)
    p = s.shape[0]
    if p > MAX_ORACLE_P:
        raise GuardViolated(f"oracle integral limited to p <= {MAX_ORACLE_P}")
    if draws < MIN_DRAWS:
        raise GuardViolated(f"need at least {MIN_DRAWS} draws")
    rho = lam / n
    idx = FreeIndexSet.of(g)
    sol = solve(GlassoProblem(s, rho, g), tol=1e-10, max_iter=1000)
    center = idx.vec(sol.omega_star)
    hess = hessian_at(sol.omega_star, idx).entries
    try:
        hchol = cholesky(hess)
    except NotPositiveDefinite as exc:
        raise DegenerateProposal("Hessian at the mode is not positive definite") from exc
    # proposal precision P = n H / (2 inflate); x = center + L^{-T} z with L L' = P
    k = len(idx)
    scale = math.sqrt(2.0 * inflate / n)
    lower = hchol.lower
    log_norm = -0.5 * k * math.log(2 * math.pi) + hchol.log_det() / 2 - k * math.log(scale)

    rng = np.random.default_rng(seed)
    chunk_lse, chunk_sq, accepted = [], [], 0
    left = draws
    while left > 0:
        m = min(CHUNK, left)
        left -= m
        z = rng.standard_normal((m, k))
        u = scale * np.linalg.solve(lower.T, z.T).T
        x = center + u
        logq = log_norm - 0.5 * np.sum(z * z, axis=1)
        hv = _batched_h(x, idx, s, rho)
        logw = np.where(np.isfinite(hv), -0.5 * n * hv - logq, -np.inf)
        accepted += int(np.sum(np.isfinite(hv)))
        chunk_lse.append(logsumexp_safe(logw))
        chunk_sq.append(logsumexp_safe(2 * logw))
    lse = _lse_pairwise(chunk_lse)
    lse2 = _lse_pairwise(chunk_sq)
    log_value = lse - math.log(draws)
    # delta method: se(log mean w) = sd(w) / (sqrt(N) mean(w))
    mean_sq_ratio = math.exp(lse2 - 2 * lse) * draws  # E[w^2] / E[w]^2
    var_ratio = max(mean_sq_ratio - 1.0, 0.0)
    se = math.sqrt(var_ratio / draws)
    return IntegralEstimate(log_value, se, draws, accepted / draws)


def logsumexp_safe(a):
    a = np.asarray(a)
    top = np.max(a)
    if not np.isfinite(top):
        return -np.inf
    return float(top + np.log(np.sum(np.exp(a - top))))


def smooth_h(omega):
    """``-log det`` part of the objective; the trace and penalty terms are linear."""
    return -cholesky(omega).log_det()


def fd_hessian(omega, index, step=1e-4):
    """Central second differences of ``-log det`` over the coordinates in ``index``."""
    omega = np.asarray(omega, dtype=float)
    basis = []
    for i, j in index.pairs:
        e = np.zeros_like(omega)
        e[i, j] = e[j, i] = 1.0
        basis.append(e)
    k = len(basis)
    out = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            ea, eb = step * basis[a], step * basis[b]
            val = (
                smooth_h(omega + ea + eb)
                - smooth_h(omega + ea - eb)
                - smooth_h(omega - ea + eb)
                + smooth_h(omega - ea - eb)
            ) / (4 * step * step)
            out[a, b] = out[b, a] = val
    return HessianMatrix(index, out)


def hellinger_sq(omega1, omega2):
    """Squared Hellinger distance between ``N(0, omega1^-1)`` and ``N(0, omega2^-1)``.

    Uses the eigenvalues ``d`` of ``omega1^{-1/2} omega2 omega1^{-1/2}``; the
    value is twice ``1 - prod d^{-1/4} / sqrt(prod (1 + 1/d)/2)``.
    """
    a = as_symmetric(omega1)
    b = as_symmetric(omega2)
    cholesky(a)
    cholesky(b)
    d = eigh(b, a, eigvals_only=True)
    log_ratio = -0.25 * np.sum(np.log(d)) - 0.5 * np.sum(np.log(0.5 * (1.0 + 1.0 / d)))
    return float(-2.0 * np.expm1(log_ratio))


def taylor_remainder(omega, delta, index):
    """Second-order Taylor remainder of the penalised objective at ``omega``.

    Linear terms (trace and penalty, away from sign changes) are removed
    exactly by the gradient term, so this is the remainder of ``-log det``.
    """
    w = cholesky(omega).inverse()
    x = index.vec(delta)
    grad = -index.mult * w[index.rows, index.cols]
    hess = hessian_at(omega, index).entries
    return smooth_h(omega + delta) - smooth_h(omega) - float(grad @ x) - 0.5 * float(x @ hess @ x)
