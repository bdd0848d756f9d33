"""Command line entry point: ``ggmlaplace fit | score | simulate``.

Exit codes: 0 success, 1 bad configuration, 2 bad input data, 3 numerical
failure. Diagnostics and progress go to standard error; results go to
standard output or the ``--out`` target.
"""

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import (
    DataError,
    GGMError,
    InvalidPenalty,
    NonNumeric,
    ParseError,
    TooFewRows,
    ZeroVariance,
)
from .graphmodel import format_edge_list, parse_edge_list
from .priors import DEFAULT_Q, DEFAULT_RHO, GraphPrior, HardCap, Hierarchical, default_rbar
from .score import SolverConfig, score_model
from .search import SearchConfig, search
from .simulate import FAMILIES, TruthSpec, run_study, study_csv

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("ggmlaplace")


class ConfigError(GGMError):
    pass


# ----------------------------------------------------------------- ingestion


def read_csv(path, header=False):
    """Numeric matrix from a CSV file; row and column numbers in errors are 1-based."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text", None, None) from exc
    first = 2 if header else 1
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise TooFewRows(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        line = r + first
        if len(row) != width:
            raise ParseError(f"row {line} has {len(row)} fields, expected {width}", line, None)
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumeric(f"row {line}, column {c + 1}: {cell.strip()!r} is not a number", line, c + 1) from None
            if not math.isfinite(v):
                raise NonNumeric(f"row {line}, column {c + 1}: non-finite value", line, c + 1)
            out[r, c] = v
    return out


def preprocess(x, log_returns=False, standardize=False):
    """Optional log returns (one row fewer) then optional column standardisation."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise TooFewRows(f"need at least 2 rows, got {x.shape[0]}")
    if log_returns:
        if np.any(x <= 0):
            raise DataError("log returns need strictly positive prices")
        x = np.diff(np.log(x), axis=0)
    if standardize:
        x = x - x.mean(axis=0)
        sd = np.sqrt(np.mean(x * x, axis=0))
        bad = np.flatnonzero(sd <= 1e-12 * (1.0 + np.max(np.abs(x), initial=0.0)))
        if bad.size:
            cols = ", ".join(str(c + 1) for c in bad)
            raise ZeroVariance(f"column(s) {cols} have zero variance and cannot be standardised")
        x = x / sd
    return x


def ingest(path, log_returns=False, standardize=False, header=False):
    """Processed data matrix and its second-moment matrix ``X'X / n``."""
    x = preprocess(read_csv(path, header), log_returns, standardize)
    return x, x.T @ x / x.shape[0]


# --------------------------------------------------------------------- config


@dataclass
class RunConfig:
    rho: float = DEFAULT_RHO
    q: float = DEFAULT_Q
    rbar: Optional[int] = None
    truncation: str = "hard"
    a1: float = 1.0
    a2: float = 1.0
    search: str = "auto"
    steps: Optional[int] = None
    restarts: int = 3
    max_edges: Optional[int] = None
    temperature: float = 1.0
    seed: int = 0
    workers: int = 1
    standardize: bool = False
    log_returns: bool = False
    header: bool = False
    input: Optional[str] = None
    output: Optional[str] = None

    def validate(self):
        if not (isinstance(self.rho, (int, float)) and self.rho > 0):
            raise ConfigError(f"rho must be positive, got {self.rho!r}")
        if self.truncation not in ("hard", "hierarchical"):
            raise ConfigError(f"unknown truncation {self.truncation!r}")
        try:
            self.prior(2, 2)
            self.search_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def prior(self, n, p):
        if self.truncation == "hierarchical":
            trunc = Hierarchical(a1=self.a1, a2=self.a2)
        else:
            trunc = HardCap(default_rbar(n, p, p) if self.rbar is None else self.rbar)
        return GraphPrior.from_rho(n, self.rho, self.q, trunc)

    def search_config(self):
        return SearchConfig(
            mode=self.search,
            max_edges=self.max_edges,
            steps=self.steps,
            restarts=self.restarts,
            seed=self.seed,
            temperature=self.temperature,
            workers=self.workers,
        )

    def echo(self):
        """Settings that determine the result; worker count and paths to outputs are left out."""
        return {
            "rho": self.rho,
            "q": self.q,
            "rbar": self.rbar,
            "truncation": self.truncation,
            "a1": self.a1 if self.truncation == "hierarchical" else None,
            "a2": self.a2 if self.truncation == "hierarchical" else None,
            "search": self.search,
            "steps": self.steps,
            "restarts": self.restarts,
            "max_edges": self.max_edges,
            "temperature": self.temperature,
            "seed": self.seed,
            "standardize": self.standardize,
            "log_returns": self.log_returns,
            "header": self.header,
            "input": self.input,
        }


_CONFIG_KEYS = set(RunConfig.__dataclass_fields__)
_TRUNCATION_KEYS = {"kind": "truncation", "r_bar": "rbar", "a1": "a1", "a2": "a2"}


def _flatten_truncation(raw):
    """Accept ``"truncation": {"kind": ..., "r_bar" | "a1", "a2": ...}`` blocks."""
    block = raw.get("truncation")
    if not isinstance(block, dict):
        return raw
    unknown = set(block) - set(_TRUNCATION_KEYS)
    if unknown:
        raise ConfigError(f"unknown truncation keys: {', '.join(sorted(unknown))}")
    flat = {k: v for k, v in raw.items() if k != "truncation"}
    for key, target in _TRUNCATION_KEYS.items():
        if key in block:
            flat[target] = block[key]
    return flat


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    raw = _flatten_truncation(raw)
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return raw


def build_config(args):
    """Config file values, overridden by flags given on the command line."""
    values = load_config(args.config) if args.config else {}
    for key in _CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            values[key] = v
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


# ------------------------------------------------------------------- commands


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_fit(cfg, max_models=50):
    x, s = ingest(cfg.input, cfg.log_returns, cfg.standardize, cfg.header)
    n, p = x.shape
    if n < 2:
        raise TooFewRows(f"need at least 2 observations after preprocessing, got {n}")
    prior = cfg.prior(n, p)
    summary = search(s, n, prior, cfg.search_config())
    report = summary.to_dict(max_models=max_models)
    report.update(
        config=cfg.echo(),
        prior=prior.to_dict(),
        data={"n": n, "p": p},
        version=__version__,
    )
    edges = format_edge_list(summary.median_model)
    if cfg.output is None:
        sys.stdout.write(_dump(report))
        return EXIT_OK
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(_dump(report), encoding="utf-8")
    (out / "median.edges").write_text(edges, encoding="utf-8")
    return EXIT_OK


def cmd_score(cfg, graph_path):
    x, s = ingest(cfg.input, cfg.log_returns, cfg.standardize, cfg.header)
    n, p = x.shape
    if n < 2:
        raise TooFewRows(f"need at least 2 observations after preprocessing, got {n}")
    try:
        g = parse_edge_list(Path(graph_path).read_text(encoding="utf-8"), p)
    except OSError as exc:
        raise DataError(f"cannot read graph file: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"bad edge list: {exc}") from exc
    prior = cfg.prior(n, p)
    sc = score_model(g, s, n, prior, SolverConfig())
    report = {
        "score": sc.to_dict(),
        "requested": g.to_list(),
        "config": cfg.echo(),
        "prior": prior.to_dict(),
        "data": {"n": n, "p": p},
        "version": __version__,
    }
    _write(_dump(report), cfg.output)
    return EXIT_OK


def cmd_simulate(cfg, family, p, n, reps):
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    if n < 2:
        raise ConfigError("n must be >= 2")
    try:
        spec = TruthSpec(family, p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    prior = cfg.prior(n, p)

    def progress(r, mpp, gl):
        log.info("replication %d/%d: mcc %.3f (glasso %.3f)", r + 1, reps, mpp.mcc, gl.mcc)

    row = run_study(spec, n, reps, prior, cfg.search_config(), seed=cfg.seed, on_rep=progress)
    _write(study_csv([row]), cfg.output)
    return EXIT_OK


# ------------------------------------------------------------------- parsing


def _common(ap):
    ap.add_argument("--config", help="JSON file with default settings; flags override it")
    ap.add_argument("--rho", type=float, help=f"penalty per observation, lambda = n * rho (default {DEFAULT_RHO})")
    ap.add_argument("--q", type=float, help=f"prior edge probability, in (0, 1/2) (default {DEFAULT_Q})")
    ap.add_argument("--rbar", type=int, help="hard cap on the number of edges (default from n and p)")
    ap.add_argument("--truncation", choices=["hard", "hierarchical"], help="edge-count truncation law")
    ap.add_argument("--a2", type=float, help="tail rate of the hierarchical cap")
    ap.add_argument("--search", choices=["auto", "exact", "stochastic"], help="search mode (default auto)")
    ap.add_argument("--steps", type=int, help="steps per restart of the stochastic search")
    ap.add_argument("--restarts", type=int, help="independent restarts (default 3)")
    ap.add_argument("--max-edges", dest="max_edges", type=int, help="never visit graphs with more edges")
    ap.add_argument("--temperature", type=float, help="Metropolis temperature (default 1)")
    ap.add_argument("--seed", type=int, help="random seed (default 0)")
    ap.add_argument("--workers", type=int, help="threads for restarts; does not change results")
    ap.add_argument("--out", dest="output", help="output target (directory for fit, file otherwise)")
    ap.add_argument("-q", "--quiet", action="store_true", help="no progress messages")


def _data(ap):
    ap.add_argument("input", help="CSV file, one observation per row")
    ap.add_argument("--header", action="store_true", default=None, help="first CSV row is a header")
    ap.add_argument("--standardize", action="store_true", default=None, help="centre and scale each column")
    ap.add_argument("--log-returns", dest="log_returns", action="store_true", default=None,
                    help="replace prices by log returns first")


def build_parser():
    ap = argparse.ArgumentParser(prog="ggmlaplace", description="Laplace posterior structure learning for Gaussian graphical models.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="search graph space and report the median probability model")
    _data(fit)
    _common(fit)
    fit.add_argument("--max-models", dest="max_models", type=int, default=50, help="models listed in the report")

    sc = sub.add_parser("score", help="Laplace score of one graph")
    _data(sc)
    sc.add_argument("--graph", required=True, help="edge list file, one 'i j' pair per line, 1-based")
    _common(sc)

    sim = sub.add_parser("simulate", help="recovery study on synthetic data, CSV out")
    sim.add_argument("--family", choices=FAMILIES, required=True)
    sim.add_argument("--p", dest="dim", type=int, required=True, help="number of variables")
    sim.add_argument("--n", dest="nobs", type=int, required=True, help="observations per replication")
    sim.add_argument("--reps", type=int, default=20)
    _common(sim)
    return ap


def run(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = build_config(args)
        if args.command == "fit":
            return cmd_fit(cfg, args.max_models)
        if args.command == "score":
            return cmd_score(cfg, args.graph)
        return cmd_simulate(cfg, args.family, args.dim, args.nobs, args.reps)
    except (ConfigError, InvalidPenalty) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GGMError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
