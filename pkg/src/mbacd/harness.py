"""Experiment grids: build a problem, run method x sampling x tau x seed, write CSV.

Config files are flat ``key = value`` text, one key per line, ``#`` starts a
comment. List values are comma separated. Keys:

==================  =====================================================
problem             ``quadratic``, ``synthetic:<1-5>``, ``logistic`` or ``svm-dual``
n                   dimension for synthetic problems / toy data columns
m                   toy data rows for logistic / svm-dual without ``data``
problem-seed        seed for problem generation (default 0)
matrix              text matrix file for ``quadratic``
data                LibSVM file for ``logistic`` / ``svm-dual``
dims                ``m,n`` override for the LibSVM shape
rescale             ``yes`` to corrupt rows/columns with U[0,1] factors
lambda-mode         ``mean-diag``, ``max-diag-over-10`` or ``explicit``
lambda              value used with ``lambda-mode = explicit``
smoothness          ``exact`` or ``diag:<factor>`` (``diag:sqrt-n`` allowed)
methods             subset of ``cd, acd``
samplings           sampling variants (``tau-nice``, ``indep-acd``, ...)
taus                expected minibatch sizes
seeds               solver seeds
budget-epochs       work budget per run (default 100)
eps                 absolute gap target
eps-rel             gap target relative to the gap at zero
every               checkpoint cadence in epochs (default 1)
eso                 ``auto`` (plain for CD, accelerated for ACD), ``accelerated``,
                    ``plain``, ``closed`` or ``tau-nice``
speedup-gap         absolute gap for the speedup table (defaults to the eps target)
timing              ``yes`` to fill the wall_ms column (breaks byte-identical reruns)
workers             parallel grid cells (default 1)
==================  =====================================================
"""
import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import median
from typing import Optional

import numpy as np

from . import dataio, linalg, problems
from .eso import build_eso
from .sampling import Variant, build_law
from .solvers import SolverError, SolverTrace, acd_run, cd_run

log = logging.getLogger(__name__)

CSV_HEADER = ["iter", "epochs", "coord_evals", "f", "gap", "potential", "wall_ms"]


class ConfigError(ValueError):
    pass


@dataclass
class ProblemSpec:
    kind: str = "synthetic:3"
    n: int = 100
    m: int = 200
    seed: int = 0
    matrix: Optional[str] = None
    data: Optional[str] = None
    dims: Optional[tuple] = None
    rescale: bool = False
    lambda_mode: str = "default"
    lam: Optional[float] = None
    smoothness: str = "exact"


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    methods: tuple = ("acd",)
    samplings: tuple = ("tau-nice",)
    taus: tuple = (1,)
    seeds: tuple = (0,)
    budget_epochs: float = 100.0
    eps: Optional[float] = None
    eps_rel: Optional[float] = None
    every: float = 1.0
    eso: str = "auto"
    speedup_gap: Optional[float] = None
    timing: bool = False
    workers: int = 1
    out: Optional[str] = None

    def validate(self, n=None):
        if not self.taus or not self.seeds:
            raise ConfigError("taus and seeds must be non-empty")
        for meth in self.methods:
            if meth not in ("cd", "acd"):
                raise ConfigError(f"unknown method {meth!r}")
        for s in self.samplings:
            Variant.parse(s)
        if n is not None:
            bad = [t for t in self.taus if not 1 <= t <= n]
            if bad:
                raise ConfigError(f"tau values {bad} outside [1, {n}]")


def _bool(s):
    return str(s).strip().lower() in ("1", "yes", "true", "on")


def _list(s, conv=str):
    return tuple(conv(x.strip()) for x in str(s).split(",") if x.strip())


def _num(s):
    x = float(s)
    return int(x) if x.is_integer() else x


_PROBLEM_KEYS = {
    "problem": ("kind", str),
    "n": ("n", int),
    "m": ("m", int),
    "problem-seed": ("seed", int),
    "matrix": ("matrix", str),
    "data": ("data", str),
    "dims": ("dims", lambda s: _list(s, int)),
    "rescale": ("rescale", _bool),
    "lambda-mode": ("lambda_mode", str),
    "lambda": ("lam", float),
    "smoothness": ("smoothness", str),
}
_GRID_KEYS = {
    "methods": ("methods", lambda s: _list(s, str.lower)),
    "samplings": ("samplings", _list),
    "taus": ("taus", lambda s: _list(s, _num)),
    "seeds": ("seeds", lambda s: _list(s, int)),
    "budget-epochs": ("budget_epochs", float),
    "eps": ("eps", float),
    "eps-rel": ("eps_rel", float),
    "every": ("every", float),
    "eso": ("eso", str),
    "speedup-gap": ("speedup_gap", float),
    "timing": ("timing", _bool),
    "workers": ("workers", int),
    "out": ("out", str),
}


def parse_config(text, source="<config>"):
    pspec, grid = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        table, target = (_PROBLEM_KEYS, pspec) if key in _PROBLEM_KEYS else (_GRID_KEYS, grid)
        if key not in table:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        name, conv = table[key]
        try:
            target[name] = conv(value)
        except ValueError as err:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {err}") from None
    cfg = ExperimentConfig(problem=ProblemSpec(**pspec), **grid)
    cfg.validate()
    return cfg


def load_config(path):
    return parse_config(Path(path).read_text(), source=str(path))


def _data_matrix(spec):
    if spec.data:
        ds = dataio.parse_libsvm(spec.data, dims=spec.dims)
    else:
        ds = dataio.make_toy_dataset(spec.m, spec.n, spec.seed)
    A = dataio.to_dense(ds)
    if spec.rescale:
        A = problems.rescale_corrupt(A, np.random.default_rng(spec.seed + 1))
    return A, ds.labels


def resolve_lambda(spec, default_mode, diag):
    """Regularization from ``lambda-mode`` and the data part of the smoothness diagonal."""
    mode = default_mode if spec.lambda_mode == "default" else spec.lambda_mode
    if mode == "explicit":
        if spec.lam is None:
            raise ConfigError("lambda-mode = explicit needs a lambda value")
        return spec.lam
    if mode == "mean-diag":
        return float(np.mean(diag))
    if mode == "max-diag-over-10":
        return float(np.max(diag)) / 10
    raise ConfigError(f"unknown lambda-mode {mode!r}")


def build_problem(spec):
    """Materialize a :class:`ProblemSpec` into an oracle."""
    kind = spec.kind.lower()
    if kind.startswith("synthetic:"):
        prob = problems.synthetic_generator(int(kind.split(":", 1)[1]), spec.n, spec.seed)
    elif kind == "quadratic":
        if not spec.matrix:
            raise ConfigError("problem = quadratic needs a matrix file")
        M = linalg.read_matrix(spec.matrix)
        b = np.random.default_rng(spec.seed).standard_normal(M.shape[0])
        prob = problems.quadratic_problem(M, b)
    elif kind in ("logistic", "svm-dual"):
        A, labels = _data_matrix(spec)
        if kind == "logistic":
            lam = resolve_lambda(spec, "mean-diag", np.sum(A * A, axis=0) / (4 * A.shape[0]))
            prob = problems.logistic_problem(A, labels, lam)
        else:
            lam = resolve_lambda(spec, "max-diag-over-10", np.sum(A * A, axis=1))
            # dual variables index examples: pass features x examples
            prob = problems.svm_dual_problem(A.T, labels, lam)
    else:
        raise ConfigError(f"unknown problem type {spec.kind!r}")

    if spec.smoothness != "exact":
        if not spec.smoothness.startswith("diag:"):
            raise ConfigError(f"smoothness must be 'exact' or 'diag:<factor>', got {spec.smoothness!r}")
        factor = spec.smoothness.split(":", 1)[1]
        factor = math.sqrt(prob.n) if factor == "sqrt-n" else float(factor)
        prob = prob.with_estimated_smoothness(factor)
    return prob


def resolve_eso_mode(method, mode):
    if mode == "auto":
        return "plain" if method == "cd" else "accelerated"
    return mode


def run_cell(problem, method, sampling, tau, seed, cfg):
    """Run one grid cell; failures come back as an aborted trace."""
    variant = Variant.parse(sampling)
    meta = {"method": method, "variant": variant.value, "tau": tau, "seed": seed}
    try:
        law = build_law(variant, problem.smoothness, tau)
        eso = build_eso(law, problem.smoothness, resolve_eso_mode(method, cfg.eso))
        eps = cfg.eps
        if cfg.eps_rel is not None and problem.fstar is not None:
            x0 = problem.projection(np.zeros(problem.n)) if problem.projection else np.zeros(problem.n)
            eps = cfg.eps_rel * (problem.value(x0) - problem.fstar)
        kwargs = dict(eps=eps, every=cfg.every, timing=cfg.timing, project=problem.projection is not None)
        rng = np.random.default_rng(seed)
        if method == "cd":
            trace = cd_run(problem, law, eso, cfg.budget_epochs, rng, **kwargs)
        else:
            trace = acd_run(problem, law, eso, problem.sigma, cfg.budget_epochs, rng, **kwargs)
    except (SolverError, ValueError, ArithmeticError) as err:
        trace = getattr(err, "trace", None) or SolverTrace()
        trace.status = f"aborted: {err}"
        log.warning("cell %s aborted: %s", meta, err)
    trace.meta.update(meta)
    trace.meta["problem"] = problem.name
    trace.meta["smoothness_exact"] = problem.smoothness_exact
    trace.meta["experimental"] = trace.experimental
    return trace


def grid_cells(cfg):
    return [
        (method, sampling, tau, seed)
        for method in cfg.methods
        for sampling in cfg.samplings
        for tau in cfg.taus
        for seed in cfg.seeds
    ]


def _run_cell_star(args):
    return run_cell(*args)


def run_grid(cfg, problem=None, workers=None):
    """One trace per (method, sampling, tau, seed), in grid order."""
    problem = build_problem(cfg.problem) if problem is None else problem
    cfg.validate(problem.n)
    cells = grid_cells(cfg)
    workers = cfg.workers if workers is None else workers
    jobs = [(problem, *cell, cfg) for cell in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell_star, jobs))
    return [run_cell(*job) for job in jobs]


def speedup_table(traces, target_gap):
    """Median epochs/iterations to ``target_gap`` per (method, variant, tau).

    ``speedup`` is the ratio of median iterations at tau = 1 to median
    iterations at tau for the same method and sampling. Entries whose median
    run never reached the target are marked ``"unreached"``.
    """
    groups = {}
    for tr in traces:
        key = (tr.meta["method"], tr.meta["variant"], tr.meta["tau"])
        ck = tr.first_reaching(target_gap)
        hit = (ck.epochs, ck.iter) if ck else (math.inf, math.inf)
        groups.setdefault(key, []).append(hit)
    rows = []
    base = {}
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2])):
        hits = groups[key]
        ep = median(h[0] for h in hits)
        it = median(h[1] for h in hits)
        row = {"method": key[0], "variant": key[1], "tau": key[2]}
        if math.isinf(ep):
            row.update(median_epochs="unreached", median_iters="unreached", speedup="unreached")
        else:
            row.update(median_epochs=ep, median_iters=it, speedup=None)
            if key[2] == 1:
                base[key[:2]] = it
        rows.append(row)
    for row in rows:
        if row["speedup"] is None:
            b = base.get((row["method"], row["variant"]))
            row["speedup"] = b / row["median_iters"] if b is not None else "NA"
    return rows


def _fmt(x):
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def emit_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ck in trace.checkpoints:
            w.writerow(
                [ck.iter, _fmt(ck.epochs), ck.coord_evals, _fmt(ck.f), _fmt(ck.gap), _fmt(ck.potential), _fmt(ck.wall_ms)]
            )


def read_csv(path):
    """Parse a trace CSV back into a list of checkpoint dicts (``None`` for NA)."""

    def conv(name, s):
        if s == "NA":
            return None
        return int(s) if name in ("iter", "coord_evals") else float(s)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [{k: conv(k, row[k]) for k in CSV_HEADER} for row in reader]


def trace_filename(meta):
    return f"{meta['method']}_{meta['variant']}_tau{_fmt(meta['tau'])}_seed{meta['seed']}.csv"


SUMMARY_FIELDS = [
    "file", "problem", "method", "variant", "tau", "seed", "status", "n", "expected_size",
    "eso_mode", "c", "v_min", "v_max", "p_min", "p_max", "delta", "n_clipped", "theta",
    "sigma_w", "smoothness_exact", "experimental", "final_gap",
]


def write_outputs(traces, out_dir, target_gap=None):
    """Write one CSV per trace plus ``summary.csv`` (and ``speedup.csv``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for tr in traces:
        name = trace_filename(tr.meta)
        emit_csv(tr, out / name)
        final = tr.checkpoints[-1].gap if tr.checkpoints else None
        row = {k: tr.meta.get(k) for k in SUMMARY_FIELDS}
        row.update(file=name, status=tr.status, final_gap=final)
        rows.append(row)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(v) for k, v in row.items()})
    if target_gap is not None:
        table = speedup_table(traces, target_gap)
        with open(out / "speedup.csv", "w", newline="") as fh:
            fields = ["method", "variant", "tau", "median_epochs", "median_iters", "speedup"]
            w = csv.DictWriter(fh, fields, lineterminator="\n")
            w.writeheader()
            for row in table:
                w.writerow({k: _cell(v) for k, v in row.items()})
    return rows


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "yes" if v else "no"
    return _fmt(v)


def run_bench(cfg, out_dir, workers=None):
    problem = build_problem(cfg.problem)
    traces = run_grid(cfg, problem=problem, workers=workers)
    target = cfg.speedup_gap
    if target is None:
        target = cfg.eps
    if target is None and cfg.eps_rel is not None and problem.fstar is not None:
        x0 = np.zeros(problem.n)
        target = cfg.eps_rel * (problem.value(x0) - problem.fstar)
    write_outputs(traces, out_dir, target)
    (Path(out_dir) / "config.json").write_text(json.dumps(asdict(cfg), indent=2, default=str) + "\n")
    return traces
