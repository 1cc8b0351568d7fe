"""Truncated Fock-space numerics for k-photon couplings.

Finite N-state truncations of H = w a'a + g(a^k + a'^k) sx + d sz and of its
number-conserving counterpart H_JC = w a'a + g(a^k s+ + a'^k s-) + d sz, in
the interleaved basis |n, spin> -> index 2n + s (s = 0 down, s = 1 up).
The JC model block-diagonalizes exactly and serves as the trusted oracle;
the sx-coupled model is the object under study, where truncated spectra can
look plausible while failing to converge.

Eigensolves go through LAPACK's banded symmetric driver.  All classification
thresholds are artifact choices (flagged in the emitted summaries), not
derived quantities.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eig_banded


@dataclass(frozen=True)
class ModelParams:
    """k-photon order, coupling strength, mode frequency, level splitting."""

    k: int
    g: float
    omega: float
    delta: float

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        for name in ("g", "omega", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(math.isfinite(getattr(self, n)) for n in ("g", "omega", "delta")):
            raise ValueError("parameters must be finite")
        if self.g < 0:
            raise ValueError("coupling g must be nonnegative")
        if self.omega <= 0:
            raise ValueError("omega must be positive")


class BandedSymmetricMatrix:
    """Symmetric matrix stored by its upper bands.

    band[u + i - j, j] = A[i, j] for max(0, j-u) <= i <= j, the layout the
    LAPACK banded drivers consume directly.  Only the upper triangle is ever
    written, so symmetry of to_dense() is exact, not approximate.
    """

    __slots__ = ("dim", "u", "band")

    def __init__(self, dim: int, u: int):
        if dim < 1 or u < 0:
            raise ValueError("need dim >= 1 and bandwidth >= 0")
        self.dim = dim
        self.u = u
        self.band = np.zeros((u + 1, dim))

    def add(self, i: int, j: int, v: float) -> None:
        if not 0 <= i <= j < self.dim or j - i > self.u:
            raise IndexError(f"({i}, {j}) outside the stored band")
        self.band[self.u + i - j, j] += v

    def entry(self, i: int, j: int) -> float:
        if i > j:
            i, j = j, i
        if j - i > self.u:
            return 0.0
        return float(self.band[self.u + i - j, j])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for off in range(self.u + 1):
            d = np.diag(self.band[self.u - off, off:], k=off)
            out += d
            if off:
                out += d.T
        return out


def _ladder_weight(n: int, k: int) -> float:
    # sqrt(n!/(n-k)!) as a running product; no factorial overflow
    w = 1.0
    for t in range(k):
        w *= math.sqrt(n - t)
    return w


def build_hkp(params: ModelParams, N: int) -> BandedSymmetricMatrix:
    """Truncate the sx-coupled model to the first N Fock states (dim 2N).

    Diagonal: w*n - d on |n,down>, w*n + d on |n,up>.  The coupling flips
    spin and moves k photons: <n-k, 1-s| H |n, s> = g*sqrt(n!/(n-k)!).
    """
    k = params.k
    if N <= k:
        raise ValueError(f"need N > k, got N={N}, k={k}")
    m = BandedSymmetricMatrix(2 * N, 2 * k + 1)
    for n in range(N):
        m.add(2 * n, 2 * n, params.omega * n - params.delta)
        m.add(2 * n + 1, 2 * n + 1, params.omega * n + params.delta)
    for n in range(k, N):
        w = params.g * _ladder_weight(n, k)
        for s in (0, 1):
            m.add(2 * (n - k) + 1 - s, 2 * n + s, w)
    return m


def build_jck(params: ModelParams, N: int) -> BandedSymmetricMatrix:
    """Truncated number-conserving counterpart: couples |n+k,down> <-> |n,up> only."""
    k = params.k
    if N <= k:
        raise ValueError(f"need N > k, got N={N}, k={k}")
    m = BandedSymmetricMatrix(2 * N, 2 * k - 1)
    for n in range(N):
        m.add(2 * n, 2 * n, params.omega * n - params.delta)
        m.add(2 * n + 1, 2 * n + 1, params.omega * n + params.delta)
    for n in range(N - k):
        m.add(2 * n + 1, 2 * (n + k), params.g * _ladder_weight(n + k, k))
    return m


@dataclass(frozen=True)
class JCBlock:
    """One invariant 2x2 block over {|n+k,down>, |n,up>}."""

    n: int
    diag_down: float     # w(n+k) - d
    diag_up: float       # wn + d
    offdiag: float       # g sqrt((n+k)!/n!)

    @property
    def eigenvalues(self) -> tuple[float, float]:
        mean = (self.diag_down + self.diag_up) / 2
        r = math.hypot((self.diag_down - self.diag_up) / 2, self.offdiag)
        return (mean - r, mean + r)


def jc_blocks(params: ModelParams, n_max: int) -> list[JCBlock]:
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    k = params.k
    return [
        JCBlock(n,
                params.omega * (n + k) - params.delta,
                params.omega * n + params.delta,
                params.g * _ladder_weight(n + k, k))
        for n in range(n_max + 1)
    ]


def jck_exact_spectrum(params: ModelParams, n_max: int) -> list[float]:
    """Closed-form spectrum: block pairs for n <= n_max plus the k uncoupled
    spin-down levels w*n - d below the first block."""
    vals = [params.omega * n - params.delta for n in range(params.k)]
    for blk in jc_blocks(params, n_max):
        vals.extend(blk.eigenvalues)
    return sorted(vals)


def lowest_eigenvalues(M: BandedSymmetricMatrix, m: int) -> list[float]:
    """The m algebraically smallest eigenvalues, ascending."""
    if not 1 <= m <= M.dim:
        raise ValueError(f"need 1 <= m <= {M.dim}, got {m}")
    try:
        vals = eig_banded(M.band, lower=False, eigvals_only=True,
                          select="i", select_range=(0, m - 1))
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"banded eigensolver failed on dimension {M.dim}: {exc}") from exc
    return [float(v) for v in vals]


def displaced_oscillator_oracle(g: float, omega: float, m: int) -> list[float]:
    """Exact k=1, delta=0 levels: E_n = w*n - g^2/w, each doubly degenerate."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if m < 0:
        raise ValueError("m must be >= 0")
    shift = g * g / omega
    return [omega * (i // 2) - shift for i in range(m)]


# ---------------------------------------------------------------------------
# convergence sweeps

class Classification(enum.Enum):
    Convergent = "Convergent"
    Collapse = "Collapse"
    Divergent = "Divergent"
    Inconclusive = "Inconclusive"


@dataclass(frozen=True)
class SpectrumSweep:
    params: ModelParams
    N_list: tuple[int, ...]
    eigenvalues: tuple[tuple[float, ...], ...]   # per N, ascending, length m
    classification: Classification
    tol: float
    collapse_factor: float


def _thread_budget(jobs: int) -> int:
    env = os.environ.get("RABI_THREADS", "").strip()
    if env:
        budget = int(env)
        if budget < 1:
            raise ValueError("RABI_THREADS must be a positive integer")
    else:
        budget = os.cpu_count() or 1
    return max(1, min(budget, jobs))


def convergence_sweep(params: ModelParams, N_list, m: int = 10,
                      tol: float = 1e-6) -> SpectrumSweep:
    """Lowest-m spectra across truncation sizes, merged by N, classified."""
    sizes = [int(N) for N in N_list]
    if len(sizes) < 3:
        raise ValueError("need at least 3 truncation sizes")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("truncation sizes must be strictly increasing")
    if m < 2:
        raise ValueError("need m >= 2 for gap statistics")

    def job(N: int) -> tuple[float, ...]:
        return tuple(lowest_eigenvalues(build_hkp(params, N), m))

    with ThreadPoolExecutor(max_workers=_thread_budget(len(sizes))) as pool:
        rows = list(pool.map(job, sizes))
    for row in rows:
        if not all(math.isfinite(v) for v in row):
            raise RuntimeError("non-finite eigenvalue in sweep")
        if any(b < a for a, b in zip(row, row[1:])):
            raise RuntimeError("eigensolver returned an unsorted spectrum")
    sweep = SpectrumSweep(params, tuple(sizes), tuple(rows),
                          Classification.Inconclusive, tol, 10.0)
    return replace(sweep, classification=classify_convergence(sweep, tol))


def classify_convergence(sweep: SpectrumSweep, tol: float = 1e-6,
                         collapse_factor: float = 10.0) -> Classification:
    """Operational reading of the truncation behavior.

    Collapse: mean spacing of the m lowest shrinks by >= collapse_factor
    while E_min itself stays put (drift bounded by max(1, |E_min|)); checked
    first because accumulation above a stable bottom would otherwise pass
    the gap test below.
    Convergent: E_min gaps non-increasing and final gap below tol.
    Divergent: |E_min| grows monotonically and gaps never settled.
    Everything else: Inconclusive.  Thresholds are artifact choices.
    """
    if len(sweep.N_list) < 3:
        raise ValueError("need at least 3 truncation sizes")
    e = [row[0] for row in sweep.eigenvalues]
    spread = [(row[-1] - row[0]) / (len(row) - 1) for row in sweep.eigenvalues]
    slow_drift = abs(e[-1] - e[0]) <= max(1.0, abs(e[0]))
    if spread[0] > 0 and spread[-1] * collapse_factor <= spread[0] and slow_drift:
        return Classification.Collapse
    floor = 1e-12 * max(1.0, abs(e[0]))      # LAPACK noise snap
    gaps = [abs(b - a) for a, b in zip(e, e[1:])]
    gaps = [0.0 if g < floor else g for g in gaps]
    settles = (all(g2 <= g1 * (1 + 1e-9) + floor for g1, g2 in zip(gaps, gaps[1:]))
               and gaps[-1] < tol)
    if settles:
        return Classification.Convergent
    if all(abs(b) > abs(a) for a, b in zip(e, e[1:])):
        return Classification.Divergent
    return Classification.Inconclusive


# ---------------------------------------------------------------------------
# emitters

def _fmt(x: float) -> str:
    return "%.17g" % x


def sweep_csv(sweep: SpectrumSweep) -> str:
    p = sweep.params
    lines = ["k,g,omega,delta,N,index,eigenvalue"]
    for N, row in zip(sweep.N_list, sweep.eigenvalues):
        for idx, v in enumerate(row):
            lines.append(f"{p.k},{_fmt(p.g)},{_fmt(p.omega)},{_fmt(p.delta)},"
                         f"{N},{idx},{_fmt(v)}")
    return "\n".join(lines) + "\n"


def sweep_summary(sweep: SpectrumSweep) -> dict:
    p = sweep.params
    return {
        "params": {"k": p.k, "g": p.g, "omega": p.omega, "delta": p.delta},
        "N_list": list(sweep.N_list),
        "classification": sweep.classification.value,
        "E_min_series": [row[0] for row in sweep.eigenvalues],
        "thresholds": {"tol": sweep.tol,
                       "collapse_factor": sweep.collapse_factor,
                       "artifact_choice": True},
    }
