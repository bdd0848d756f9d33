"""Prior mass on graph structures.

Edges are i.i.d. Bernoulli(q), conditioned on the edge count not exceeding
either a fixed cap ``r_bar`` or a random cap ``R`` with a super-exponential
tail. The log mass reported here also carries the ``(lambda/2)^(p + #edges)``
normalisation of the Laplace/exponential entry prior, so that it is the log
of the model-dependent part of the joint normalising constant. The
``(2 pi)^(np/2)`` likelihood factor is common to all graphs and dropped.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.special import logsumexp

from .graphmodel import n_pairs

DEFAULT_Q = 0.4
DEFAULT_RHO = 0.5


@dataclass(frozen=True)
class HardCap:
    r_bar: int

    def __post_init__(self):
        if self.r_bar < 0:
            raise ValueError("r_bar must be >= 0")

    kind = "hard"


@dataclass(frozen=True)
class Hierarchical:
    """Random cap with ``P(R = m) ∝ exp(-a2 m log m)`` for ``m >= 1``.

    ``a1`` is the scale in the tail condition ``P(R > a1 m) <= exp(-a2 m log m)``;
    the law above meets it for any ``a1 >= 1``, so ``a1`` only has to be
    recorded.
    """

    a1: float = 1.0
    a2: float = 1.0

    def __post_init__(self):
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("a1 and a2 must be positive")

    kind = "hierarchical"


@dataclass(frozen=True)
class GraphPrior:
    q: float
    lam: float
    truncation: Union[HardCap, Hierarchical]

    def __post_init__(self):
        if not 0 < self.q < 0.5:
            raise ValueError(f"q must lie in (0, 1/2), got {self.q}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @classmethod
    def from_rho(cls, n, rho=DEFAULT_RHO, q=DEFAULT_Q, truncation=None, p=None):
        """Prior with ``lambda = n * rho``; the cap defaults to :func:`default_rbar`."""
        if truncation is None:
            if p is None:
                raise ValueError("p is needed to choose a default r_bar")
            truncation = HardCap(default_rbar(n, p, p))
        return cls(q=q, lam=n * rho, truncation=truncation)

    def max_edges(self, p):
        if isinstance(self.truncation, HardCap):
            return min(self.truncation.r_bar, n_pairs(p))
        return n_pairs(p)

    def to_dict(self):
        t = self.truncation
        trunc = {"kind": t.kind}
        if isinstance(t, HardCap):
            trunc["r_bar"] = t.r_bar
        else:
            trunc.update(a1=t.a1, a2=t.a2, law="P(R=m) ∝ exp(-a2 m log m), m >= 1")
        return {"q": self.q, "lambda": self.lam, "truncation": trunc}


@dataclass(frozen=True)
class LogPriorMass:
    log_gamma_prior: float
    log_c_gamma: float

    @property
    def in_support(self):
        return math.isfinite(self.log_c_gamma)


@lru_cache(maxsize=256)
def _cap_tail(a2, m_max):
    """``log P(R >= m)`` for ``m = 0..m_max`` under the default cap law."""
    if m_max < 1:
        return np.zeros(m_max + 1)
    m = np.arange(1, m_max + 1, dtype=float)
    logw = -a2 * m * np.log(m)
    tail = np.empty(m_max + 1)
    tail[0] = 0.0
    rev = np.logaddexp.accumulate(logw[::-1])[::-1]
    tail[1:] = np.minimum(rev - logsumexp(logw), 0.0)
    tail[1] = 0.0  # the law starts at m = 1
    return tail


def log_beta(prior, p, n_edges):
    t = prior.truncation
    if isinstance(t, HardCap):
        return 0.0 if n_edges <= t.r_bar else -math.inf
    m_max = n_pairs(p)
    if n_edges > m_max:
        return -math.inf
    return float(_cap_tail(t.a2, m_max)[n_edges])


def log_prior(prior, g):
    k, m = g.n_edges, n_pairs(g.p)
    beta = log_beta(prior, g.p, k)
    if not math.isfinite(beta):
        return LogPriorMass(-math.inf, -math.inf)
    kernel = k * math.log(prior.q) + (m - k) * math.log1p(-prior.q) + beta
    return LogPriorMass(kernel, kernel + (g.p + k) * math.log(prior.lam / 2.0))


def default_rbar(n, p, s_guess):
    """Edge cap ``ceil(2 (p + s) log p / log n)``, at most ``p(p-1)/2``."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    if p < 2:
        return 0
    if n < 2:
        return n_pairs(p)
    r = math.ceil(2.0 * (p + s_guess) * math.log(p) / math.log(n) - 1e-12)
    return int(min(r, n_pairs(p)))
