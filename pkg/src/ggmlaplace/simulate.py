"""Ground-truth precision models, Gaussian sampling and recovery metrics."""

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .glasso import GlassoProblem, solve
from .graphmodel import Graph, n_pairs
from .matrixcore import cholesky
from .search import SearchConfig, search

FAMILIES = ("AR1", "AR2", "Star", "Circle")
GL_THRESHOLD = 1e-8


@dataclass(frozen=True)
class TruthSpec:
    family: str
    p: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        need = 3 if self.family in ("AR2", "Circle") else 2
        if self.p < need:
            raise ValueError(f"{self.family} needs p >= {need}")


@dataclass(frozen=True)
class Truth:
    sigma: Optional[np.ndarray]
    omega: np.ndarray
    graph: Graph


def truth_matrices(spec):
    p = spec.p
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    sigma = None
    if spec.family == "AR1":
        sigma = 0.7**lag
        omega = cholesky(sigma).inverse()
        omega[lag > 1] = 0.0
    elif spec.family == "AR2":
        omega = np.select([lag == 0, lag == 1, lag == 2], [1.0, 0.5, 0.25], 0.0)
    elif spec.family == "Star":
        omega = np.eye(p)
        omega[0, 1:] = omega[1:, 0] = 0.1
    else:
        omega = np.select([lag == 0, lag == 1], [2.0, 1.0], 0.0)
        omega[0, p - 1] = omega[p - 1, 0] = 0.9
    cholesky(omega)
    return Truth(sigma, omega, Graph.from_adjacency(omega))


def sample(omega, n, seed):
    """``n`` rows from ``N(0, omega^{-1})``."""
    cov = cholesky(omega).inverse()
    lower = cholesky(cov).lower
    z = np.random.default_rng(seed).standard_normal((n, lower.shape[0]))
    return z @ lower.T


def sample_covariance(x):
    x = np.asarray(x, dtype=float)
    return x.T @ x / x.shape[0]


@dataclass(frozen=True)
class RecoveryMetrics:
    sp: float
    se: float
    mcc: float
    tp: int
    tn: int
    fp: int
    fn: int


def _ratio(a, b):
    return a / b if b else 0.0


def metrics(estimated, truth):
    if estimated.p != truth.p:
        raise ValueError("graphs have different vertex counts")
    est, tru = estimated.edge_set, truth.edge_set
    tp = len(est & tru)
    fp = len(est - tru)
    fn = len(tru - est)
    tn = n_pairs(truth.p) - tp - fp - fn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return RecoveryMetrics(_ratio(tn, tn + fp), _ratio(tp, tp + fn), mcc, tp, tn, fp, fn)


def glasso_graph(sigma_hat, rho):
    sol = solve(GlassoProblem(sigma_hat, rho))
    return Graph.from_adjacency(sol.omega_star, tol=GL_THRESHOLD)


@dataclass(frozen=True)
class StudyRow:
    family: str
    p: int
    n: int
    reps: int
    mpp: dict
    gl: dict

    COLUMNS = (
        "family", "p", "n", "reps",
        "sp_mean", "sp_se", "se_mean", "se_se", "mcc_mean", "mcc_se",
        "gl_sp_mean", "gl_sp_se", "gl_se_mean", "gl_se_se", "gl_mcc_mean", "gl_mcc_se",
    )

    def as_record(self):
        rec = {"family": self.family, "p": self.p, "n": self.n, "reps": self.reps}
        for prefix, table in (("", self.mpp), ("gl_", self.gl)):
            for name in ("sp", "se", "mcc"):
                rec[f"{prefix}{name}_mean"], rec[f"{prefix}{name}_se"] = table[name]
        return rec


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def run_study(spec, n, reps, prior, search_cfg=SearchConfig(), seed=0, solver_cfg=None, on_rep=None):
    """Replicate sample -> covariance -> search -> median model -> metrics.

    Replication ``r`` draws data with seed ``seed + r`` and searches with the
    same seed. Returns a :class:`StudyRow` with (mean, standard error) pairs
    for the median probability model and, for comparison, the plain glasso
    support.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    truth = truth_matrices(spec)
    rho = prior.lam / n
    mpp, gl = [], []
    for r in range(reps):
        x = sample(truth.omega, n, seed + r)
        s = sample_covariance(x)
        cfg = SearchConfig(**{**search_cfg.__dict__, "seed": seed + r})
        summary = search(s, n, prior, cfg, solver_cfg)
        mpp.append(metrics(summary.median_model, truth.graph))
        gl.append(metrics(glasso_graph(s, rho), truth.graph))
        if on_rep is not None:
            on_rep(r, mpp[-1], gl[-1])

    def table(rows):
        return {name: _mean_se([getattr(m, name) for m in rows]) for name in ("sp", "se", "mcc")}

    return StudyRow(spec.family, spec.p, n, reps, table(mpp), table(gl))


def study_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=StudyRow.COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        rec = row.as_record()
        writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in rec.items()})
    return buf.getvalue()
