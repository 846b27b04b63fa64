"""Discrete-event simulation of parallel workers with configurable
compute-time models, plus the closed-form step-count model used to compare
asynchronous and synchronous execution for a fixed wall-clock budget.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass

import numpy as np

from .ledger import DelayLedger, LedgerError


class SpeedModelError(ValueError):
    """Invalid speed-model configuration."""


@dataclass(frozen=True)
class FixedSpeeds:
    """Worker m takes exactly seconds[m-1] per gradient, every time."""

    seconds: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seconds", tuple(float(s) for s in self.seconds))
        if not self.seconds:
            raise SpeedModelError("need at least one worker speed")
        if any(not math.isfinite(s) or s <= 0 for s in self.seconds):
            raise SpeedModelError(f"compute times must be positive and finite: {self.seconds}")

    @property
    def num_workers(self) -> int:
        return len(self.seconds)

    def samplers(self):
        return [lambda s=s: s for s in self.seconds]


@dataclass(frozen=True)
class RandomSpeeds:
    """Worker m draws an independent compute time for every gradient.

    distribution "exponential": mean means[m-1].
    distribution "lognormal": mean means[m-1], log-space shape sigma.
    Each worker uses its own seed substream so traces are reproducible
    regardless of interleaving.
    """

    distribution: str
    means: tuple[float, ...]
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(s) for s in self.means))
        if self.distribution not in ("exponential", "lognormal"):
            raise SpeedModelError(f"unknown distribution {self.distribution!r}")
        if not self.means:
            raise SpeedModelError("need at least one worker mean")
        if any(not math.isfinite(s) or s <= 0 for s in self.means):
            raise SpeedModelError(f"mean compute times must be positive and finite: {self.means}")
        if self.distribution == "lognormal" and self.sigma <= 0:
            raise SpeedModelError("lognormal shape sigma must be positive")

    @property
    def num_workers(self) -> int:
        return len(self.means)

    def samplers(self):
        draws = []
        for m, mean in enumerate(self.means, start=1):
            rng = np.random.default_rng([self.seed, m])
            if self.distribution == "exponential":
                draws.append(lambda rng=rng, mean=mean: rng.exponential(mean))
            else:
                # shift the log-space location so the distribution mean is `mean`
                mu_log = math.log(mean) - 0.5 * self.sigma**2
                draws.append(
                    lambda rng=rng, mu=mu_log, sg=self.sigma: rng.lognormal(mu, sg)
                )
        return draws


@dataclass(frozen=True)
class StragglerSpeeds:
    """All workers take `base` seconds except one, slowed by `slowdown`."""

    base: float
    straggler: int
    slowdown: float
    num_workers: int
    seed: int = 0

    def __post_init__(self):
        if self.num_workers < 1:
            raise SpeedModelError("need at least one worker")
        if not 1 <= self.straggler <= self.num_workers:
            raise SpeedModelError(
                f"straggler id {self.straggler} out of range 1..{self.num_workers}"
            )
        if not math.isfinite(self.base) or self.base <= 0:
            raise SpeedModelError("base compute time must be positive and finite")
        if not math.isfinite(self.slowdown) or self.slowdown < 1:
            raise SpeedModelError("slowdown factor must be >= 1")

    @property
    def seconds(self) -> tuple[float, ...]:
        return tuple(
            self.base * self.slowdown if m == self.straggler else self.base
            for m in range(1, self.num_workers + 1)
        )

    def samplers(self):
        return [lambda s=s: s for s in self.seconds]


SpeedModel = FixedSpeeds | RandomSpeeds | StragglerSpeeds


@dataclass
class ArrivalTrace:
    """Arrival order of gradients: one row per update iteration k = 1..K.

    workers[k-1] is the arriving worker id, taus[k-1] its gradient's delay,
    times[k-1] the arrival wall-clock time (non-decreasing).
    """

    workers: np.ndarray
    taus: np.ndarray
    times: np.ndarray
    num_workers: int

    def __post_init__(self):
        self.workers = np.asarray(self.workers, dtype=np.int64)
        self.taus = np.asarray(self.taus, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.float64)
        if not (len(self.workers) == len(self.taus) == len(self.times)):
            raise LedgerError("trace columns have mismatched lengths")
        if len(self.times) and np.any(np.diff(self.times) < 0):
            raise LedgerError("arrival times must be non-decreasing")
        self.validate()

    @property
    def horizon(self) -> int:
        return len(self.workers)

    def validate(self) -> DelayLedger:
        """Replay through a fresh ledger; raises if the tau column is wrong."""
        ledger = DelayLedger(self.num_workers)
        for i, worker in enumerate(self.workers):
            _, tau = ledger.record_arrival(int(worker))
            if tau != self.taus[i]:
                raise LedgerError(
                    f"trace row {i + 1}: recorded delay {self.taus[i]} "
                    f"but ledger replay gives {tau}"
                )
        return ledger

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "worker", "tau", "time"])
            for i in range(self.horizon):
                writer.writerow(
                    [i + 1, int(self.workers[i]), int(self.taus[i]),
                     repr(float(self.times[i]))]
                )

    @classmethod
    def read_csv(cls, path, num_workers: int | None = None) -> "ArrivalTrace":
        workers, taus, times = [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"k", "worker", "tau", "time"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise LedgerError(f"trace csv must have columns {sorted(required)}")
            for row in reader:
                workers.append(int(row["worker"]))
                taus.append(int(row["tau"]))
                times.append(float(row["time"]))
        if num_workers is None:
            num_workers = max(workers) if workers else 1
        return cls(np.array(workers), np.array(taus), np.array(times), num_workers)


def simulate_trace(model: SpeedModel, horizon: int) -> ArrivalTrace:
    """Run the event loop for `horizon` arrivals under a speed model.

    All workers start computing at t=0. Finish-time ties are broken toward
    the lowest worker index (exact binary64 comparison). Deterministic for
    a given (model, seed, horizon).
    """
    if horizon < 0:
        raise LedgerError(f"horizon must be >= 0, got {horizon}")
    draws = model.samplers()
    m_count = model.num_workers
    heap = [(draws[m - 1](), m) for m in range(1, m_count + 1)]
    heapq.heapify(heap)
    ledger = DelayLedger(m_count)
    workers = np.empty(horizon, dtype=np.int64)
    taus = np.empty(horizon, dtype=np.int64)
    times = np.empty(horizon, dtype=np.float64)
    for i in range(horizon):
        t, m = heapq.heappop(heap)
        _, tau = ledger.record_arrival(m)
        workers[i] = m
        taus[i] = tau
        times[i] = t
        heapq.heappush(heap, (t + draws[m - 1](), m))
    return ArrivalTrace(workers, taus, times, m_count)


def trace_from_workers(worker_ids, num_workers: int | None = None) -> ArrivalTrace:
    """Adversarial trace: an explicit arrival order with synthetic unit times."""
    worker_ids = [int(w) for w in worker_ids]
    if num_workers is None:
        if not worker_ids:
            raise LedgerError("cannot infer worker count from an empty sequence")
        num_workers = max(worker_ids)
    ledger = DelayLedger(num_workers)
    taus = [ledger.record_arrival(w)[1] for w in worker_ids]
    times = np.arange(1, len(worker_ids) + 1, dtype=np.float64)
    return ArrivalTrace(np.array(worker_ids), np.array(taus), times, num_workers)


def steps_in_time(seconds, duration: float) -> tuple[int, int]:
    """Gradient-step counts reachable in `duration` seconds of wall time.

    Returns (async_steps, sync_steps): asynchronously every worker
    contributes floor(S / s_m) updates; lockstep synchronous execution is
    paced by the slowest worker, floor(S / max s_m) rounds.
    """
    seconds = [float(s) for s in seconds]
    if not seconds:
        raise SpeedModelError("need at least one worker speed")
    if any(not math.isfinite(s) or s <= 0 for s in seconds):
        raise SpeedModelError(f"compute times must be positive and finite: {seconds}")
    if duration < 0 or not math.isfinite(duration):
        raise SpeedModelError(f"duration must be finite and >= 0, got {duration}")
    async_steps = sum(int(duration // s) for s in seconds)
    sync_steps = min(int(duration // s) for s in seconds)
    return async_steps, sync_steps


def speedup_factor(seconds) -> float:
    """Ideal async-over-sync throughput ratio: mean of s_max / s_m. Always >= 1."""
    seconds = [float(s) for s in seconds]
    if not seconds:
        raise SpeedModelError("need at least one worker speed")
    if any(not math.isfinite(s) or s <= 0 for s in seconds):
        raise SpeedModelError(f"compute times must be positive and finite: {seconds}")
    s_max = max(seconds)
    return sum(s_max / s for s in seconds) / len(seconds)
