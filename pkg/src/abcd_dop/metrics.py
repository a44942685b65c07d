"""Offline error bookkeeping."""
from __future__ import annotations

import csv
from typing import Iterable, TextIO

import numpy as np

TRACE_HEADER = ["eval", "env", "best_fitness", "optimum", "current_error", "offline_error"]


class TraceError(RuntimeError):
    pass


class RunTrace:
    """Per-evaluation log of best-so-far, optimum and running offline error.

    Records are appended one at a time or in blocks that share an
    environment; at most ``ne`` records are accepted.
    """

    _COLUMNS = ("env", "best", "optimum", "error", "offline")

    def __init__(self, ne: int):
        if ne < 1:
            raise TraceError("budget must be >= 1")
        self.ne = ne
        self.n = 0
        cap = min(ne, 1 << 16)
        self.env = np.zeros(cap, dtype=np.int64)
        self.best = np.zeros(cap)
        self.optimum = np.zeros(cap)
        self.error = np.zeros(cap)
        self.offline = np.zeros(cap)
        self._mean = 0.0

    def _reserve(self, k: int) -> None:
        need = self.n + k
        if need > self.ne:
            raise TraceError("trace is full")
        cap = len(self.env)
        if need <= cap:
            return
        cap = min(self.ne, max(need, 2 * cap))
        for name in self._COLUMNS:
            old = getattr(self, name)
            new = np.zeros(cap, dtype=old.dtype)
            new[: self.n] = old[: self.n]
            setattr(self, name, new)

    def __len__(self) -> int:
        return self.n

    def record_evaluation(self, best_fitness: float, optimum: float, env: int,
                          eval_index: int | None = None) -> None:
        n = self.n
        if eval_index is not None and eval_index != n + 1:
            raise TraceError(f"out-of-order record {eval_index}, expected {n + 1}")
        self._reserve(1)
        err = abs(optimum - best_fitness)
        self._mean += (err - self._mean) / (n + 1)
        self.env[n] = env
        self.best[n] = best_fitness
        self.optimum[n] = optimum
        self.error[n] = err
        self.offline[n] = self._mean
        self.n = n + 1

    def record_block(self, best_fitness: np.ndarray, optimum: float, env: int) -> None:
        """Append several records from one environment.

        The running mean is advanced as ``m0 + cumsum(e - m0) / n`` which is the
        closed form of the one-at-a-time incremental update.
        """
        k = len(best_fitness)
        self._reserve(k)
        n0 = self.n
        err = np.abs(optimum - np.asarray(best_fitness, dtype=float))
        m0 = self._mean
        counts = np.arange(n0 + 1, n0 + k + 1, dtype=float)
        means = m0 + np.cumsum(err - m0) / counts
        sl = slice(n0, n0 + k)
        self.env[sl] = env
        self.best[sl] = best_fitness
        self.optimum[sl] = optimum
        self.error[sl] = err
        self.offline[sl] = means
        self._mean = float(means[-1]) if k else m0
        self.n = n0 + k

    @property
    def offline_error(self) -> float:
        return self._mean

    def env_counts(self) -> dict[int, int]:
        """N(e): evaluations spent in each environment."""
        envs, counts = np.unique(self.env[: self.n], return_counts=True)
        return {int(e): int(c) for e, c in zip(envs, counts)}

    def rows(self, every: int = 1):
        idx = np.arange(every - 1, self.n, every)
        for i in idx:
            yield (int(i) + 1, int(self.env[i]), self.best[i], self.optimum[i],
                   self.error[i], self.offline[i])

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for n, e, b, o, c, m in self.rows():
            w.writerow([n, e, repr(float(b)), repr(float(o)), repr(float(c)), repr(float(m))])


def record_evaluation(trace: RunTrace, best_fitness: float, optimum: float, env: int) -> RunTrace:
    trace.record_evaluation(best_fitness, optimum, env)
    return trace


def final_offline_error(trace: RunTrace) -> float:
    if trace.n == 0:
        raise TraceError("empty trace has no offline error")
    return float(trace.offline[trace.n - 1])


def aggregate_runs(errors: Iterable[float]) -> tuple[float, float]:
    """Sample mean and (n-1) standard deviation; std is 0 for a single value."""
    values = np.asarray(list(errors), dtype=float)
    if values.size == 0:
        raise ValueError("cannot aggregate an empty set of runs")
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return mean, std


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.2f}({std:.2f})"

