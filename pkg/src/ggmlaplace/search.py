"""Search over graph space.

Small problems are enumerated exactly. Larger ones use a Metropolis walk
over single-edge toggles, with scores of every distinct model it touches
renormalised at the end; chain visit frequencies are not used.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import NotPositiveDefinite, TooLarge
from .glasso import GlassoProblem, solve
from .graphmodel import ENUMERATION_LIMIT, Graph, enumerate_all, n_pairs
from .matrixcore import as_symmetric, cholesky
from .score import SolverConfig, normalize, score_model

log = logging.getLogger(__name__)

EXACT_DEFAULT_LIMIT = 20


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "auto"
    max_edges: Optional[int] = None
    steps: Optional[int] = None
    restarts: int = 3
    seed: int = 0
    temperature: float = 1.0
    workers: int = 1
    progress_every: int = 1000

    def __post_init__(self):
        if self.mode not in ("auto", "exact", "stochastic"):
            raise ValueError(f"unknown search mode {self.mode!r}")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def resolved_mode(self, p):
        if self.mode != "auto":
            return self.mode
        return "exact" if n_pairs(p) <= EXACT_DEFAULT_LIMIT else "stochastic"

    def resolved_steps(self, p):
        return self.steps if self.steps is not None else 200 * max(n_pairs(p), 1)

    def to_dict(self):
        return {
            "mode": self.mode,
            "max_edges": self.max_edges,
            "steps": self.steps,
            "restarts": self.restarts,
            "seed": self.seed,
            "temperature": self.temperature,
        }


def _max_edges(cfg, prior, p):
    cap = prior.max_edges(p)
    return cap if cfg.max_edges is None else min(cap, cfg.max_edges)


def _strip(sc):
    return replace(sc, omega_star=None)


def search_exact(data_cov, n, prior, cfg=SearchConfig(), solver_cfg=None):
    """Score every graph within the edge cap and normalise."""
    s = as_symmetric(data_cov)
    p = s.shape[0]
    if n_pairs(p) > ENUMERATION_LIMIT:
        raise TooLarge(f"exact search needs p(p-1)/2 <= {ENUMERATION_LIMIT}")
    cap = _max_edges(cfg, prior, p)
    scores = [_strip(score_model(g, s, n, prior, solver_cfg)) for g in enumerate_all(p, cap)]
    regular = sum(sc.regular for sc in scores)
    return normalize(
        scores,
        visited_count=len(scores),
        diagnostics={"mode": "exact", "max_edges": cap, "scored": len(scores), "regular_requests": regular},
    )


class _Walker:
    """One Metropolis chain with its own score cache."""

    def __init__(self, s, n, prior, solver_cfg, cap, temperature, rng, tag):
        self.s, self.n, self.prior = s, n, prior
        self.rho = prior.lam / n
        self.solver_cfg = solver_cfg
        self.cap = cap
        self.temperature = temperature
        self.rng = rng
        self.tag = tag
        self.p = s.shape[0]
        self.pairs = [(i, j) for i in range(self.p) for j in range(i + 1, self.p)]
        self.scores = {}  # regular graph -> ModelScore
        self.redirect = {}  # requested graph -> regular graph
        self.solves = 0
        self.proposed = 0
        self.moves = 0
        self.accepted = 0

    def score(self, g, init=None):
        """Score of ``g`` (reduced if non-regular) plus the solution matrix."""
        target = self.redirect.get(g)
        if target is not None and target in self.scores:
            return self.scores[target], None
        sc = score_model(g, self.s, self.n, self.prior, self.solver_cfg, init)
        self.solves += 1
        self.redirect[g] = sc.graph
        if sc.graph not in self.scores:
            self.scores[sc.graph] = replace(sc, regular=True, reduced_from=None, omega_star=None)
        return self.scores[sc.graph], sc.omega_star

    def state_omega(self, g, omega):
        if omega is not None:
            return omega
        sc = score_model(g, self.s, self.n, self.prior, self.solver_cfg)
        return sc.omega_star

    def run(self, start, steps, progress_every):
        cur_sc, omega = self.score(start)
        cur = cur_sc.graph
        omega = self.state_omega(cur, omega)
        w = cholesky(omega).inverse()
        m = len(self.pairs)
        for step in range(1, steps + 1):
            e = self.pairs[int(self.rng.integers(m))]
            u = float(self.rng.random())
            self.proposed += 1
            adding = e not in cur
            if adding and cur.n_edges >= self.cap:
                continue
            prop = cur.toggle(e)
            if adding and prop not in self.redirect and abs(w[e] - self.s[e]) <= self.rho:
                # zero stays optimal for the new edge: same solution, reduces to cur
                self.redirect[prop] = cur
            if adding:
                init = omega
            else:
                init = omega.copy()
                init[e] = init[e[::-1]] = 0.0
            new_sc, new_omega = self.score(prop, init)
            if new_sc.graph == cur or not math.isfinite(new_sc.total):
                continue
            self.moves += 1
            log_ratio = (new_sc.total - cur_sc.total) / self.temperature
            if log_ratio >= 0 or u < math.exp(log_ratio):
                self.accepted += 1
                cur, cur_sc = new_sc.graph, new_sc
                omega = self.state_omega(cur, new_omega)
                w = cholesky(omega).inverse()
            if progress_every and step % progress_every == 0:
                log.info(
                    "restart %d step %d/%d: current %d edges, total %.3f, %d models, acceptance %.3f",
                    self.tag, step, steps, cur.n_edges, cur_sc.total, len(self.scores),
                    self.accepted / max(self.moves, 1),
                )
        return self


def _glasso_support(s, rho, cap):
    sol = solve(GlassoProblem(s, rho))
    g = Graph.from_adjacency(sol.omega_star, tol=0.0)
    return g if g.n_edges <= cap else Graph.empty(s.shape[0])


def _random_graph(p, k, rng):
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    pick = rng.choice(len(pairs), size=min(k, len(pairs)), replace=False)
    return Graph(p, tuple(pairs[int(t)] for t in sorted(pick)))


def search_stochastic(data_cov, n, prior, cfg=SearchConfig(), solver_cfg=None):
    """Metropolis add/delete search; deterministic for a given ``cfg.seed``.

    Restarts run on independent child streams of ``cfg.seed`` and may run on
    ``cfg.workers`` threads; results are merged in restart order, so the
    output does not depend on the worker count.
    """
    s = as_symmetric(data_cov)
    p = s.shape[0]
    solver_cfg = solver_cfg or SolverConfig()
    cap = _max_edges(cfg, prior, p)
    steps = cfg.resolved_steps(p)
    rho = prior.lam / n
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    try:
        glasso_start = _glasso_support(s, rho, cap)
    except NotPositiveDefinite:
        glasso_start = Graph.empty(p)

    def run(r):
        rng = np.random.default_rng(seeds[r])
        if r == 0:
            start = glasso_start
        elif r == 1:
            start = Graph.empty(p)
        else:
            start = _random_graph(p, min(cap, glasso_start.n_edges), rng)
        walker = _Walker(s, n, prior, solver_cfg, cap, cfg.temperature, rng, r)
        return walker.run(start, steps, cfg.progress_every)

    if cfg.workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            walkers = list(pool.map(run, range(cfg.restarts)))
    else:
        walkers = [run(r) for r in range(cfg.restarts)]

    merged = []
    for wk in walkers:
        merged.extend(wk.scores[g] for g in sorted(wk.scores, key=lambda g: (g.n_edges, g.edges)))
    proposed = sum(wk.proposed for wk in walkers)
    moves = sum(wk.moves for wk in walkers)
    accepted = sum(wk.accepted for wk in walkers)
    summary = normalize(
        merged,
        visited_count=len({sc.graph for sc in merged}),
        diagnostics={
            "mode": "stochastic",
            "max_edges": cap,
            "steps": steps,
            "restarts": cfg.restarts,
            "temperature": cfg.temperature,
            "proposed": proposed,
            "moves": moves,
            "accepted": accepted,
            "acceptance_rate": accepted / moves if moves else 0.0,
            "solves": sum(wk.solves for wk in walkers),
        },
    )
    return summary


def search(data_cov, n, prior, cfg=SearchConfig(), solver_cfg=None):
    p = np.shape(data_cov)[0]
    if cfg.resolved_mode(p) == "exact":
        return search_exact(data_cov, n, prior, cfg, solver_cfg)
    return search_stochastic(data_cov, n, prior, cfg, solver_cfg)
