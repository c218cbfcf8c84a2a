"""Seating rules for the CRP, Pitman-Yor, Uniform and Powered CRP priors.

Every process is expressed through one pair of log-masses: a log-weight per
occupied table and a log-weight for opening a new table. Probabilities are
the softmax of those logs, so ``Powered(r=1)`` and ``CRP`` (or ``Powered(r=0)``
and ``Uniform``) go through exactly the same floating-point operations.

================  ====================  ====================
process           table k               new table
================  ====================  ====================
CRP               N_k                   alpha
PitmanYor         N_k - beta            alpha + beta * K
Uniform           1                     alpha
Powered           N_k ** r              alpha
================  ====================  ====================
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .exceptions import EnumerationTooLarge, InputError, ParameterDomainError

MAX_ENUMERATION_CUSTOMERS = 8


class ProcessKind(str, enum.Enum):
    CRP = "crp"
    PITMAN_YOR = "py"
    UNIFORM = "uniform"
    POWERED = "powered"


@dataclass(frozen=True)
class ProcessSpec:
    """Which seating process to use, with its parameters.

    ``beta`` is only read by Pitman-Yor and ``r`` only by the Powered CRP.
    """

    kind: ProcessKind
    alpha: float = 1.0
    beta: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterDomainError(f"alpha must be > 0, got {self.alpha}")
        if self.kind is ProcessKind.PITMAN_YOR and not 0 <= self.beta < 1:
            raise ParameterDomainError(f"Pitman-Yor discount must lie in [0, 1), got {self.beta}")
        if self.kind is ProcessKind.POWERED:
            if isinstance(self.r, complex) or not (math.isfinite(self.r) and self.r >= 0):
                raise ParameterDomainError(f"power r must be a finite real >= 0, got {self.r}")

    @classmethod
    def crp(cls, alpha=1.0):
        return cls(ProcessKind.CRP, alpha=alpha)

    @classmethod
    def pitman_yor(cls, alpha=1.0, beta=0.5):
        return cls(ProcessKind.PITMAN_YOR, alpha=alpha, beta=beta)

    @classmethod
    def uniform(cls, alpha=1.0):
        return cls(ProcessKind.UNIFORM, alpha=alpha)

    @classmethod
    def powered(cls, r, alpha=1.0):
        return cls(ProcessKind.POWERED, alpha=alpha, r=r)

    @property
    def power(self) -> float:
        """Exponent applied to table populations (1 for CRP/PY, 0 for Uniform)."""
        if self.kind is ProcessKind.POWERED:
            return float(self.r)
        if self.kind is ProcessKind.UNIFORM:
            return 0.0
        return 1.0

    @property
    def discount(self) -> float:
        return float(self.beta) if self.kind is ProcessKind.PITMAN_YOR else 0.0

    def label(self) -> str:
        if self.kind is ProcessKind.POWERED:
            return f"powered(r={self.r:g}, alpha={self.alpha:g})"
        if self.kind is ProcessKind.PITMAN_YOR:
            return f"py(alpha={self.alpha:g}, beta={self.beta:g})"
        return f"{self.kind.value}(alpha={self.alpha:g})"


@dataclass(frozen=True)
class SeatingState:
    """Occupied tables and the arrival history that produced them."""

    populations: tuple[int, ...] = ()
    history: tuple[int, ...] = ()

    def __post_init__(self):
        pops = tuple(int(p) for p in self.populations)
        hist = tuple(int(h) for h in self.history)
        object.__setattr__(self, "populations", pops)
        object.__setattr__(self, "history", hist)
        if any(p < 1 for p in pops):
            raise InputError("every occupied table needs at least one customer")
        if sum(pops) != len(hist):
            raise InputError("populations do not add up to the history length")
        counts = np.bincount(hist, minlength=len(pops)) if hist else np.zeros(len(pops), int)
        if len(counts) != len(pops) or tuple(counts) != pops:
            raise InputError("history does not reproduce the populations")

    @classmethod
    def empty(cls) -> "SeatingState":
        return cls()

    @classmethod
    def from_populations(cls, populations: Sequence[int]) -> "SeatingState":
        """Build a state whose history seats table 0 first, then table 1, ..."""
        hist = [k for k, p in enumerate(populations) for _ in range(int(p))]
        return cls(tuple(populations), tuple(hist))

    @property
    def n_customers(self) -> int:
        return len(self.history)

    @property
    def n_tables(self) -> int:
        return len(self.populations)

    def seat(self, table: int) -> "SeatingState":
        pops = list(self.populations)
        if table == len(pops):
            pops.append(1)
        elif 0 <= table < len(pops):
            pops[table] += 1
        else:
            raise InputError(f"table {table} is neither occupied nor the next new table")
        return SeatingState(tuple(pops), self.history + (table,))


def _log_masses(populations: np.ndarray, alpha: float, power, discount: float):
    n_tables = populations.shape[0]
    power = np.asarray(power, dtype=float)
    if np.any(power < 0) or not np.all(np.isfinite(power)):
        raise ParameterDomainError("table exponents must be finite and non-negative")
    shifted = populations - discount
    if np.any(shifted <= 0):
        raise ParameterDomainError("a table would receive non-positive seating mass")
    table_logs = power * np.log(shifted)
    new_log = math.log(alpha + discount * n_tables)
    return np.append(table_logs, new_log)


def seating_log_weights(populations, spec: ProcessSpec) -> np.ndarray:
    """Unnormalized log seating masses: one per occupied table, then the new table."""
    pops = np.asarray(populations, dtype=float).reshape(-1)
    return _log_masses(pops, spec.alpha, spec.power, spec.discount)


def powered_log_weights(populations, alpha: float, exponents) -> np.ndarray:
    """Powered masses with a separate exponent per table.

    ``exponents`` may be a scalar or one value per table; ``alpha`` is the
    new-table mass.
    """
    pops = np.asarray(populations, dtype=float).reshape(-1)
    if not alpha > 0:
        raise ParameterDomainError(f"alpha must be > 0, got {alpha}")
    return _log_masses(pops, alpha, np.broadcast_to(exponents, pops.shape), 0.0)


def normalize_log_weights(log_w: np.ndarray) -> np.ndarray:
    w = np.exp(log_w - np.max(log_w))
    return w / w.sum()


def predictive_probs(state: SeatingState | Sequence[int], spec: ProcessSpec) -> np.ndarray:
    """Probability that the next customer joins each table (last entry: a new one)."""
    pops = state.populations if isinstance(state, SeatingState) else state
    return normalize_log_weights(seating_log_weights(pops, spec))


def step(state: SeatingState, spec: ProcessSpec, rng: np.random.Generator):
    """Seat one more customer. Returns ``(new_state, chosen_table)``."""
    probs = predictive_probs(state, spec)
    table = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    table = min(table, len(probs) - 1)
    return state.seat(table), table


def geometric_checkpoints(n: int) -> np.ndarray:
    """1, 2, 4, ... up to ``n``, with ``n`` itself always included."""
    if n < 1:
        raise InputError("need at least one customer")
    pts = [1 << i for i in range(n.bit_length()) if (1 << i) <= n]
    if pts[-1] != n:
        pts.append(n)
    return np.asarray(pts, dtype=np.int64)


def log_checkpoints(n: int, per_decade: int = 10) -> np.ndarray:
    """Integer checkpoints at 10**(j/per_decade) up to ``n``, ``n`` included.

    Exact powers of ten are always on the grid.
    """
    if n < 1:
        raise InputError("need at least one customer")
    steps = np.arange(0, int(math.floor(per_decade * math.log10(n) + 1e-9)) + 1)
    grid = np.unique(np.round(10.0 ** (steps / per_decade)))
    grid = grid[(grid >= 1) & (grid <= n)].astype(np.int64)
    if grid[-1] != n:
        grid = np.append(grid, n)
    return grid


def _check_checkpoints(checkpoints, n: int) -> np.ndarray:
    if checkpoints is None:
        return geometric_checkpoints(n)
    raw = np.asarray(checkpoints).reshape(-1)
    if raw.size and not np.all(raw == np.round(raw)):
        raise InputError("checkpoints must be integers")
    cps = raw.astype(np.int64)
    if cps.size == 0:
        raise InputError("empty checkpoint list")
    if np.any(cps < 1) or np.any(cps > n):
        raise InputError(f"checkpoints must lie in [1, {n}]")
    return np.unique(cps)    # sorted, duplicates dropped


def run_stream(seed: int, run_index: int = 0) -> np.random.Generator:
    """Private random stream of run ``run_index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(run_index,)))


@dataclass
class Trajectory:
    """Table count and sum of powered populations recorded along one run."""

    checkpoints: np.ndarray
    k: np.ndarray
    sum_nkr: np.ndarray
    final_state: SeatingState = field(repr=False)
    seed: int
    run_index: int = 0

    @property
    def k_over_n(self) -> list[tuple[int, int]]:
        return list(zip(self.checkpoints.tolist(), self.k.tolist()))

    @property
    def sum_nkr_over_n(self) -> list[tuple[int, float]]:
        return list(zip(self.checkpoints.tolist(), self.sum_nkr.tolist()))


def _log_scale(spec: ProcessSpec, n: int) -> float:
    # keeps the largest table mass near 1; see _kernels
    return spec.power * math.log(max(n, 1)) if spec.power > 0 else 0.0


def run_process(spec: ProcessSpec, n_customers: int, checkpoints=None, seed: int = 0,
                run_index: int = 0) -> Trajectory:
    """Seat ``n_customers`` customers into an empty restaurant.

    The run is a deterministic function of ``(spec, n_customers, seed,
    run_index)``; checkpoints only select what gets recorded.
    """
    if n_customers < 1:
        raise InputError("n_customers must be >= 1")
    cps = _check_checkpoints(checkpoints, n_customers)
    u = run_stream(seed, run_index).random(n_customers)
    history, pops, k_at, lsum = _kernels.seat_run(
        u, spec.power, float(spec.alpha), spec.discount, _log_scale(spec, n_customers), cps)
    state = SeatingState.__new__(SeatingState)
    # bypass validation: the kernel output is consistent by construction
    object.__setattr__(state, "populations", tuple(pops.tolist()))
    object.__setattr__(state, "history", tuple(history.tolist()))
    return Trajectory(cps, k_at, np.exp(lsum), state, seed, run_index)


def run_ensemble(spec: ProcessSpec, n_customers: int, n_runs: int, seed: int = 0,
                 checkpoints=None) -> list[Trajectory]:
    """Independent runs sharing a master seed; run i uses stream (seed, i)."""
    return [run_process(spec, n_customers, checkpoints, seed, i) for i in range(n_runs)]


def mean_tables_final(spec: ProcessSpec, n_customers: int, n_runs: int, seed: int = 0):
    """Monte-Carlo mean and standard error of K after ``n_customers`` customers.

    Built for many tiny runs: all uniforms come from the single stream
    ``run_stream(seed, 0)`` as an (n_runs, n_customers) block, so run i here
    is *not* the same draw as ``run_process(..., run_index=i)``.
    """
    if n_customers < 1 or n_runs < 2:
        raise InputError("need n_customers >= 1 and n_runs >= 2")
    u = run_stream(seed, 0).random((n_runs, n_customers))
    ks = _kernels.final_tables(u, spec.power, float(spec.alpha), spec.discount,
                               _log_scale(spec, n_customers)).astype(float)
    return ks.mean(), ks.std(ddof=1) / math.sqrt(n_runs)


def exact_expected_k(spec: ProcessSpec, n_customers: int) -> float:
    """E[K] after ``n_customers`` arrivals, by summing over every seating sequence."""
    if n_customers < 0:
        raise InputError("n_customers must be >= 0")
    if n_customers > MAX_ENUMERATION_CUSTOMERS:
        raise EnumerationTooLarge(
            f"exhaustive enumeration is limited to {MAX_ENUMERATION_CUSTOMERS} customers")

    def walk(pops: tuple[int, ...], remaining: int) -> float:
        if remaining == 0:
            return float(len(pops))
        probs = predictive_probs(pops, spec)
        total = 0.0
        for k, p in enumerate(probs):
            nxt = pops[:k] + (pops[k] + 1,) + pops[k + 1:] if k < len(pops) else pops + (1,)
            total += p * walk(nxt, remaining - 1)
        return total

    return walk((), n_customers)
