"""Multivariate Hawkes ground truth: simulation by thinning and binning.

The process has intensity

    lambda_i(t) = mu_i + sum_j w_ij * sum_{t_k < t, node_k = j} beta * exp(-beta (t - t_k))

so ``W = [w_ij]`` is exactly the branching matrix (expected children at node i
per event at node j) and stability is ``spectral_radius(W) < 1``. Simulation
uses Ogata-style thinning with an O(N)-per-candidate incremental state, run
through a chunked kernel (compiled or pure backend, bit-identical) fed by a
counter-based Philox uniform stream.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .backend import run_chunk

__all__ = [
    "StabilityError",
    "HawkesModel",
    "EventSequence",
    "SpikeCountMatrix",
    "ThinningState",
    "simulate_thinning",
    "bin_events",
    "stationary_intensity",
    "spectral_radius",
    "rescale_to_stable",
    "events_to_csv",
    "events_from_csv",
    "counts_to_csv",
    "counts_from_csv",
]

_CHUNK_PAIRS = 4096


class StabilityError(ValueError):
    """The branching matrix is not sub-critical (or the system is singular)."""


def spectral_radius(W: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Dominant eigenvalue modulus of a nonnegative square matrix.

    Power iteration (converges within ``tol`` for nonnegative matrices);
    falls back to a dense eigendecomposition when the iteration stalls.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("spectral_radius expects a square matrix")
    n = W.shape[0]
    if n == 0 or not W.any():
        return 0.0
    v = np.full(n, 1.0 / np.sqrt(n))
    rho = 0.0
    for _ in range(max_iter):
        w = W @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # nilpotent: all eigenvalues zero
            return 0.0
        v_new = w / norm
        rho_new = float(v_new @ (W @ v_new))
        if abs(rho_new - rho) <= tol * max(1.0, abs(rho_new)):
            return abs(rho_new)
        rho = rho_new
        v = v_new
    return float(np.max(np.abs(np.linalg.eigvals(W))))


def rescale_to_stable(W: np.ndarray, target_rho: float) -> np.ndarray:
    """Rescale ``W`` so its spectral radius equals ``target_rho``.

    The zero matrix is returned unchanged (its radius is already 0).
    """
    if not 0.0 < target_rho < 1.0:
        raise ValueError("target_rho must lie in (0, 1)")
    W = np.asarray(W, dtype=np.float64)
    rho = spectral_radius(W)
    if rho == 0.0:
        return W.copy()
    return W * (target_rho / rho)


@dataclass(frozen=True)
class HawkesModel:
    """Baselines ``mu`` (events/time), branching matrix ``W``, decay ``beta``.

    ``adjacency`` masks the allowed edges; ``W`` must vanish outside it.
    """

    mu: np.ndarray
    W: np.ndarray
    beta: float
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        W = np.ascontiguousarray(self.W, dtype=np.float64)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "W", W)
        if mu.ndim != 1 or W.shape != (mu.size, mu.size):
            raise ValueError("mu must be (N,) and W (N, N)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if np.any(mu < 0) or np.any(W < 0):
            raise ValueError("mu and W must be nonnegative")
        adj = self.adjacency
        if adj is None:
            adj = W > 0
        adj = np.ascontiguousarray(adj, dtype=bool)
        if adj.shape != W.shape:
            raise ValueError("adjacency shape mismatch")
        if np.any(W[~adj] != 0):
            raise ValueError("W has weight outside the adjacency mask")
        object.__setattr__(self, "adjacency", adj)
        rho = spectral_radius(W)
        if rho >= 1.0:
            raise StabilityError(f"spectral radius {rho:.4f} >= 1")

    @property
    def n_nodes(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class EventSequence:
    """Timestamped events ``(t, node)`` sorted by time on ``[0, horizon]``."""

    times: np.ndarray
    nodes: np.ndarray
    n_nodes: int
    horizon: float

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        nodes = np.ascontiguousarray(self.nodes, dtype=np.int64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nodes", nodes)
        if times.shape != nodes.shape or times.ndim != 1:
            raise ValueError("times and nodes must be matching 1-D arrays")
        if times.size and (np.any(np.diff(times) < 0)):
            raise ValueError("timestamps must be nondecreasing")
        if times.size and (times[0] < 0 or times[-1] > self.horizon):
            raise ValueError("timestamps outside [0, horizon]")
        if nodes.size and (nodes.min() < 0 or nodes.max() >= self.n_nodes):
            raise ValueError("node index out of range")

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class SpikeCountMatrix:
    """Per-node, per-interval counts, shape (N, T), bins of width ``bin_width``."""

    counts: np.ndarray
    bin_width: float
    t0: float = 0.0

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2:
            raise ValueError("counts must be (N, T)")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")

    @property
    def n_nodes(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]


@dataclass
class ThinningState:
    """Resumable simulation state (used by the MPC environment).

    ``S`` is the per-source excitation, ``integ`` the exact integral of S over
    the current window; ``rng`` owns the Philox uniform stream. The effective
    branching matrix may change between windows (edge interventions).
    """

    t: float
    S: np.ndarray
    rng: np.random.Generator
    integ: np.ndarray = field(init=False)

    def __post_init__(self):
        self.integ = np.zeros_like(self.S)

    @classmethod
    def fresh(cls, n_nodes: int, seed: int) -> "ThinningState":
        return cls(
            t=0.0,
            S=np.zeros(n_nodes),
            rng=np.random.Generator(np.random.Philox(seed)),
        )


def _run_window(mu: np.ndarray, W: np.ndarray, beta: float, t_end: float,
                state: ThinningState) -> tuple[np.ndarray, np.ndarray]:
    """Thinning over [state.t, t_end) under branching matrix ``W``."""
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    g = np.ascontiguousarray(W @ state.S)
    state.integ[:] = 0.0
    out_t = np.empty(_CHUNK_PAIRS, dtype=np.float64)
    out_n = np.empty(_CHUNK_PAIRS, dtype=np.int64)
    all_t: list[np.ndarray] = []
    all_n: list[np.ndarray] = []
    done = False
    while not done:
        u = state.rng.random((_CHUNK_PAIRS, 2))
        k, _, t_new, done = run_chunk(
            mu, W, beta, t_end, state.t, state.S, g, state.integ, u, out_t, out_n
        )
        state.t = t_new
        if k:
            all_t.append(out_t[:k].copy())
            all_n.append(out_n[:k].copy())
    if all_t:
        return np.concatenate(all_t), np.concatenate(all_n)
    return np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int64)


def simulate_thinning(model: HawkesModel, horizon: float, seed: int) -> EventSequence:
    """Draw one event sequence on [0, horizon); deterministic given ``seed``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rho = spectral_radius(model.W)
    if rho >= 1.0:
        raise StabilityError(f"unstable model: spectral radius {rho:.4f} >= 1")
    state = ThinningState.fresh(model.n_nodes, seed)
    times, nodes = _run_window(model.mu, model.W, model.beta, horizon, state)
    return EventSequence(times=times, nodes=nodes, n_nodes=model.n_nodes,
                         horizon=horizon)


def bin_events(seq: EventSequence, bin_width: float) -> SpikeCountMatrix:
    """Half-open binning: counts[n][i] = #{events of node n in [i*d, (i+1)*d)}.

    The window covers [0, horizon]; an event exactly at the final boundary is
    kept in the last bin so the total count is conserved.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    n_bins = max(1, int(np.ceil(seq.horizon / bin_width - 1e-12)))
    counts = np.zeros((seq.n_nodes, n_bins), dtype=np.int64)
    if len(seq):
        idx = np.floor(seq.times / bin_width).astype(np.int64)
        idx = np.minimum(idx, n_bins - 1)
        np.add.at(counts, (seq.nodes, idx), 1)
    return SpikeCountMatrix(counts=counts, bin_width=bin_width, t0=0.0)


def stationary_intensity(model: HawkesModel) -> np.ndarray:
    """Stationary mean intensity ``(I - W)^{-1} mu`` of a sub-critical model."""
    n = model.n_nodes
    try:
        return np.linalg.solve(np.eye(n) - model.W, model.mu)
    except np.linalg.LinAlgError as exc:
        raise StabilityError("singular (I - W): model at criticality") from exc


# serialization --------------------------------------------------------------

def events_to_csv(seq: EventSequence, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "node"])
        for t, n in zip(seq.times, seq.nodes):
            writer.writerow([repr(float(t)), int(n)])


def events_from_csv(path, n_nodes: int, horizon: float) -> EventSequence:
    times, nodes = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "node"]:
            raise ValueError(f"expected header t,node, got {header}")
        for row in reader:
            times.append(float(row[0]))
            nodes.append(int(row[1]))
    return EventSequence(times=np.asarray(times), nodes=np.asarray(nodes),
                         n_nodes=n_nodes, horizon=horizon)


def counts_to_csv(matrix: SpikeCountMatrix, path) -> None:
    """Rows = nodes, columns = bins; metadata goes to a JSON sidecar."""
    path = str(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in matrix.counts:
            writer.writerow([int(c) for c in row])
    sidecar = {
        "N": matrix.n_nodes,
        "T": matrix.n_bins,
        "bin_width": matrix.bin_width,
        "t0": matrix.t0,
    }
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def counts_from_csv(path) -> SpikeCountMatrix:
    path = str(path)
    counts = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    with open(path + ".json") as fh:
        meta = json.load(fh)
    if counts.shape != (meta["N"], meta["T"]):
        raise ValueError("counts shape does not match sidecar metadata")
    return SpikeCountMatrix(counts=counts, bin_width=meta["bin_width"],
                            t0=meta["t0"])
