"""Laplace-approximated log posterior scores of graph structures.

For a graph with free index set ``V`` (diagonals plus edges, ``k = #V``), the
unnormalised log posterior is approximated by

    log C + (-n/2) h(Omega*) + (k/2) log(4 pi / n) - (1/2) log det H(Omega*)

where ``Omega*`` is the graphical lasso solution restricted to the graph,
``h`` is the penalised objective with ``rho = lambda / n`` and ``H`` is the
Hessian of ``-log det`` over the free coordinates. The ``4 pi / n`` comes
from the Gaussian integral of ``exp(-(n/4) u'Hu)``.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .errors import EmptyModelSet, NotPositiveDefinite, SolverDiverged
from .glasso import DEFAULT_MAX_ITER, DEFAULT_TOL, GlassoProblem, restricted_hessian, solve, zero_set
from .graphmodel import FreeIndexSet, Graph
from .matrixcore import as_symmetric, cholesky
from .priors import log_prior as prior_mass

DUPLICATE_ATOL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER


@dataclass(frozen=True)
class HessianMatrix:
    index: FreeIndexSet
    entries: np.ndarray


@dataclass(frozen=True)
class ModelScore:
    """Decomposed log score of ``graph``.

    When the requested graph was non-regular, ``graph`` is its regular
    submodel, ``regular`` is False and ``reduced_from`` holds the request.
    """

    graph: Graph
    log_prior: float
    log_fit: float
    dims_term: float
    log_det_hessian: float
    total: float
    regular: bool = True
    reduced_from: Optional[Graph] = None
    omega_star: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "edges": self.graph.to_list(),
            "total": self.total,
            "log_prior": self.log_prior,
            "log_fit": self.log_fit,
            "dims_term": self.dims_term,
            "log_det_hessian": self.log_det_hessian,
            "regular": self.regular,
            "reduced_from": None if self.reduced_from is None else self.reduced_from.to_list(),
        }


def h_value(omega, sigma_hat, lam, n, g):
    """Penalised negative log-likelihood per observation, for ``omega`` supported on ``g``."""
    omega = np.asarray(omega, dtype=float)
    off = ~(g.adjacency() | np.eye(g.p, dtype=bool))
    if np.any(omega[off] != 0):
        raise ValueError("omega has non-zero entries outside the graph")
    chol = cholesky(omega)
    rho = lam / n
    iu = tuple(np.array(g.edges, dtype=np.intp).T) if g.edges else (np.array([], int), np.array([], int))
    return (
        -chol.log_det()
        + float(np.sum(np.asarray(sigma_hat) * omega))
        + 2.0 * rho * float(np.sum(np.abs(omega[iu])))
        + rho * float(np.trace(omega))
    )


def hessian_at(omega, index):
    w = cholesky(omega).inverse()
    return HessianMatrix(index, restricted_hessian(w, index))


def laplace_dims_term(k, n):
    return 0.5 * k * math.log(4.0 * math.pi / n)


def _solve_regular(g, s, rho, solver_cfg, init):
    sol = solve(GlassoProblem(s, rho, g), solver_cfg.tol, solver_cfg.max_iter, init)
    if not sol.converged:
        raise SolverDiverged(f"glasso did not converge on {g.n_edges}-edge graph (kkt={sol.kkt_residual:.2e})")
    zeros = zero_set(sol, g)
    if not zeros:
        return g, sol
    return _solve_regular(g.without(zeros), s, rho, solver_cfg, sol.omega_star)


def score_model(g, sigma_hat, n, prior, solver_cfg=None, init=None):
    """Laplace log score of ``g``; non-regular graphs are scored as their regular submodel."""
    s = as_symmetric(sigma_hat)
    if s.shape[0] != g.p:
        raise ValueError(f"sigma_hat is {s.shape[0]}x{s.shape[0]} but graph has p={g.p}")
    if n < 2:
        raise ValueError("n must be >= 2")
    solver_cfg = solver_cfg or SolverConfig()
    rho = prior.lam / n
    final, sol = _solve_regular(g, s, rho, solver_cfg, init)
    omega = sol.omega_star
    idx = FreeIndexSet.of(final)
    hess = hessian_at(omega, idx).entries
    try:
        log_det_h = cholesky(hess).log_det()
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite("restricted Hessian is not positive definite", exc.pivot) from exc
    lp = prior_mass(prior, final).log_c_gamma
    log_fit = -0.5 * n * sol.objective
    dims = laplace_dims_term(len(idx), n)
    return ModelScore(
        graph=final,
        log_prior=lp,
        log_fit=log_fit,
        dims_term=dims,
        log_det_hessian=log_det_h,
        total=lp + log_fit + dims - 0.5 * log_det_h,
        regular=final == g,
        reduced_from=None if final == g else g,
        omega_star=omega,
    )


@dataclass(frozen=True)
class RankedModel:
    graph: Graph
    probability: float
    score: ModelScore


@dataclass(frozen=True)
class PosteriorSummary:
    models: tuple
    edge_inclusion: dict
    median_model: Graph
    visited_count: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def p(self):
        return self.median_model.p

    def probability_of(self, g):
        for m in self.models:
            if m.graph == g:
                return m.probability
        return 0.0

    def to_dict(self, max_models=None):
        models = self.models if max_models is None else self.models[:max_models]
        return {
            "models": [dict(m.score.to_dict(), probability=m.probability) for m in models],
            "n_models": len(self.models),
            "edge_inclusion": {f"{i + 1}-{j + 1}": v for (i, j), v in sorted(self.edge_inclusion.items())},
            "median_probability_model": self.median_model.to_list(),
            "visited_count": self.visited_count,
            "diagnostics": self.diagnostics,
        }


def _dedupe(scores):
    seen = {}
    for sc in scores:
        prev = seen.get(sc.graph)
        if prev is None:
            seen[sc.graph] = sc
            continue
        if math.isfinite(prev.total) or math.isfinite(sc.total):
            tol = DUPLICATE_ATOL * max(1.0, abs(prev.total))
            if not abs(prev.total - sc.total) <= tol:
                raise AssertionError(
                    f"duplicate graph scored inconsistently: {prev.total!r} vs {sc.total!r}"
                )
        if sc.regular and not prev.regular:
            seen[sc.graph] = sc
    return list(seen.values())


def normalize(scores, visited_count=None, diagnostics=None):
    """Posterior model probabilities, edge inclusion and median model.

    Entries are keyed by the graph actually scored, so a reduced non-regular
    request is merged into its regular submodel and carries no mass of its
    own.
    """
    scores = list(scores)
    unique = [sc for sc in _dedupe(scores) if math.isfinite(sc.total)]
    if not unique:
        raise EmptyModelSet("no finite-scored regular models to normalise")
    p = unique[0].graph.p
    totals = np.array([sc.total for sc in unique])
    probs = np.exp(totals - logsumexp(totals))
    order = sorted(range(len(unique)), key=lambda k: (-probs[k], unique[k].graph.n_edges, unique[k].graph.edges))
    models = tuple(RankedModel(unique[k].graph, float(probs[k]), unique[k]) for k in order)
    incl = {(i, j): 0.0 for i in range(p) for j in range(i + 1, p)}
    for m in models:
        for e in m.graph.edges:
            incl[e] += m.probability
    incl = {e: min(1.0, v) for e, v in incl.items()}
    median = Graph(p, tuple(e for e, v in incl.items() if v > 0.5))
    return PosteriorSummary(
        models=models,
        edge_inclusion=incl,
        median_model=median,
        visited_count=len(scores) if visited_count is None else visited_count,
        diagnostics=dict(diagnostics or {}),
    )
