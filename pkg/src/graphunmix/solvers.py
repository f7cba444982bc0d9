"""NMF and graph-regularized NMF by multiplicative updates.

The data matrix ``X`` (bands x pixels) is factored as ``X ~ U @ V.T`` with
endmembers ``U`` (bands x P) and abundances ``V`` (pixels x P). The graph
term penalizes differences between abundance rows of linked pixels::

    O(U, V) = ||X - U V^T||_F^2 + lam * Tr(V^T L V),   L = D - W

With ``lam = 0`` and no graph this is plain Euclidean NMF.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import Laplacian, regularizer_value
from .spectral_data import check_data_matrix, load_matrix, save_matrix

DEFAULT_GNMF_LAMBDA = 100.0


class SolverDivergence(FloatingPointError):
    """Non-finite values appeared in the factors."""

    def __init__(self, iteration):
        super().__init__(f"non-finite factor values at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverOptions:
    p_endmembers: int
    lam: float = 0.0
    max_iter: int = 1000
    rel_tol: float = 1e-6
    seed: int = 0
    asc: bool = True
    epsilon_guard: float = 1e-12

    def __post_init__(self):
        if int(self.p_endmembers) != self.p_endmembers or self.p_endmembers < 1:
            raise ValueError("p_endmembers must be a positive integer")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise ValueError("max_iter must be a nonnegative integer")
        if not self.rel_tol >= 0:
            raise ValueError("rel_tol must be nonnegative")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        if not self.epsilon_guard > 0:
            raise ValueError("epsilon_guard must be positive")


@dataclass
class Factorization:
    U: np.ndarray
    V: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False


def objective_nmf(X, U, V) -> float:
    """Squared Frobenius reconstruction error ``||X - U V^T||^2``."""
    X, U, V = (np.asarray(a, dtype=float) for a in (X, U, V))
    if U.shape[0] != X.shape[0] or V.shape[0] != X.shape[1] or U.shape[1] != V.shape[1]:
        raise ValueError(f"shape mismatch: X {X.shape}, U {U.shape}, V {V.shape}")
    R = X - U @ V.T
    return float(np.sum(R * R))


def objective_gnmf(X, U, V, lap: Laplacian | None, lam: float) -> float:
    value = objective_nmf(X, U, V)
    if lam == 0 or lap is None:
        if lam != 0:
            raise ValueError("a Laplacian is required when lambda > 0")
        return value
    return value + lam * regularizer_value(V, lap)


def asc_normalize(V, return_count: bool = False):
    """Scale each abundance row to unit sum; all-zero rows become uniform."""
    V = np.asarray(V, dtype=float)
    s = V.sum(axis=1, keepdims=True)
    zero = s[:, 0] <= 0
    out = V / np.where(zero[:, None], 1.0, s)
    out[zero] = 1.0 / V.shape[1]
    if return_count:
        return out, int(zero.sum())
    return out


def init_factors(L: int, N: int, P: int, seed: int):
    """Random factors with entries in (0, 1]; ``V`` rows are sum-normalized."""
    if P > min(L, N):
        raise ValueError(f"P={P} exceeds min(L, N)={min(L, N)}")
    rng = np.random.default_rng(seed)
    # 1 - U[0,1) lies in (0,1]
    U = 1.0 - rng.random((L, P))
    V = 1.0 - rng.random((N, P))
    return U, asc_normalize(V)


def gnmf_step(X, U, V, W=None, D=None, lam=0.0, eps=1e-12):
    """One multiplicative sweep: ``U`` first, then ``V`` using the new ``U``.

    ``W`` is the sparse graph weight matrix and ``D`` its degree vector; both
    may be ``None`` when ``lam == 0``.
    """
    XV = X @ V
    U = U * XV / (U @ (V.T @ V) + eps)
    num = X.T @ U
    den = V @ (U.T @ U)
    if lam:
        num = num + lam * (W @ V)
        den = den + lam * (D[:, None] * V)
    V = V * num / (den + eps)
    return U, V


def solve(X, lap: Laplacian | None, opts: SolverOptions, init=None, callback=None) -> Factorization:
    """Run multiplicative updates until the relative objective change drops
    below ``opts.rel_tol`` or ``opts.max_iter`` sweeps have been made.

    When ``opts.asc`` is set the abundance rows are renormalized after every
    sweep, and the objective is recorded after that renormalization. Plain
    NMF is ``lam == 0``. ``init`` optionally supplies starting ``(U, V)``.
    ``callback(iteration, U, V)``, if given, sees the factors after each sweep.
    """
    X = check_data_matrix(X)
    L, N = X.shape
    if opts.lam > 0:
        if lap is None:
            raise ValueError("lambda > 0 requires a graph Laplacian")
        if lap.n != N:
            raise ValueError(f"graph has {lap.n} nodes but X has {N} pixels")
        W, D = lap.weights, lap.degree
    else:
        W = D = None
        lap = None

    if init is None:
        U, V = init_factors(L, N, opts.p_endmembers, opts.seed)
    else:
        U, V = (np.array(a, dtype=float) for a in init)
        if U.shape != (L, opts.p_endmembers) or V.shape != (N, opts.p_endmembers):
            raise ValueError("initial factors do not match X and p_endmembers")
        if opts.asc:
            V = asc_normalize(V)

    trace = []
    prev = objective_gnmf(X, U, V, lap, opts.lam)
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        U, V = gnmf_step(X, U, V, W, D, opts.lam, opts.epsilon_guard)
        if opts.asc:
            V = asc_normalize(V)
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise SolverDivergence(it)
        if callback is not None:
            callback(it, U, V)
        obj = objective_gnmf(X, U, V, lap, opts.lam)
        trace.append(obj)
        if abs(prev - obj) < opts.rel_tol * abs(prev):
            converged = True
            break
        prev = obj
    return Factorization(U, V, trace, it if opts.max_iter else 0, converged)


def save_factorization(out_dir, fact: Factorization, run_info: dict) -> None:
    """Write ``U.f64m``, ``V.f64m``, ``trace.csv`` and ``run.json``."""
    os.makedirs(out_dir, exist_ok=True)
    save_matrix(os.path.join(out_dir, "U.f64m"), fact.U)
    save_matrix(os.path.join(out_dir, "V.f64m"), fact.V)
    with open(os.path.join(out_dir, "trace.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective"])
        for i, v in enumerate(fact.objective_trace, start=1):
            w.writerow([i, repr(float(v))])
    doc = dict(run_info)
    doc.update(iterations_run=fact.iterations_run, converged=fact.converged)
    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_factorization(run_dir):
    """Return ``(Factorization, run_info)`` from a run directory."""
    U = load_matrix(os.path.join(run_dir, "U.f64m"))
    V = load_matrix(os.path.join(run_dir, "V.f64m"))
    info = {}
    info_path = os.path.join(run_dir, "run.json")
    if os.path.exists(info_path):
        with open(info_path, encoding="utf-8") as fh:
            info = json.load(fh)
    trace = []
    trace_path = os.path.join(run_dir, "trace.csv")
    if os.path.exists(trace_path):
        with open(trace_path, newline="", encoding="utf-8") as fh:
            trace = [float(r[1]) for r in list(csv.reader(fh))[1:]]
    fact = Factorization(U, V, trace, int(info.get("iterations_run", len(trace))),
                         bool(info.get("converged", False)))
    return fact, info


def options_to_json(opts: SolverOptions) -> dict:
    d = asdict(opts)
    d["lambda"] = d.pop("lam")
    return d
