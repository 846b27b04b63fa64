"""Per-worker dispatch and arrival bookkeeping for delayed-gradient runs.

The ledger tracks, for every worker, the iteration at which its in-flight
gradient was dispatched, and derives the delay of each arriving gradient.
It is driven externally (by a trace replay or a live executor) and never
models wall-clock time itself.
"""

from __future__ import annotations

import csv


class LedgerError(ValueError):
    """Contract violation in delay bookkeeping (bad worker id or state)."""


class DelayLedger:
    """Arrival bookkeeping for a pool of workers numbered 1..M.

    Every worker starts with an in-flight gradient dispatched at iteration 0.
    Each recorded arrival consumes that gradient, takes the next global
    iteration index, and immediately re-dispatches the worker at it. The
    delay of an arrival at iteration k by worker m is k minus the iteration
    at which m was last dispatched.
    """

    def __init__(self, num_workers: int):
        if num_workers < 1:
            raise LedgerError(f"need at least one worker, got {num_workers}")
        self.num_workers = num_workers
        self.dispatch_iter = [0] * num_workers
        self.arrival_count = 0
        # one row per arrival: (k, worker, iteration the gradient was dispatched at)
        self.history: list[tuple[int, int, int]] = []

    def _check_worker(self, worker: int) -> None:
        if not isinstance(worker, int) or not 1 <= worker <= self.num_workers:
            raise LedgerError(
                f"unknown worker id {worker!r} (valid ids are 1..{self.num_workers})"
            )

    def record_arrival(self, worker: int) -> tuple[int, int]:
        """Consume the worker's in-flight gradient. Returns (k, delay)."""
        self._check_worker(worker)
        dispatched = self.dispatch_iter[worker - 1]
        k = self.arrival_count + 1
        self.arrival_count = k
        self.history.append((k, worker, dispatched))
        self.dispatch_iter[worker - 1] = k
        return k, k - dispatched

    def tau_of_inflight(self, worker: int, k: int) -> int:
        """Delay the worker's in-flight gradient would have if it arrived at k."""
        self._check_worker(worker)
        if k < 1:
            raise LedgerError(f"iteration index must be >= 1, got {k}")
        return k - self.dispatch_iter[worker - 1]

    def tau_terminal(self, worker: int, horizon: int) -> int:
        """Delay used to price a gradient still in flight when the run ends.

        Clamped below at 1 so the implied stepsize stays finite even for a
        gradient dispatched at the final iteration.
        """
        self._check_worker(worker)
        return max(1, horizon - self.dispatch_iter[worker - 1])

    # ------------------------------------------------------------------
    # structural invariants

    def delay_budget_ok(self) -> bool:
        """Check the delay budget on every prefix of the arrival history.

        For each horizon K', the delays of the first K'-1 arrivals plus the
        current delays of all M in-flight gradients must not exceed K'M:
        each of the M workers contributes each iteration index to at most
        one delay count.
        """
        return self.delay_budget_slack() >= 0

    def delay_budget_slack(self) -> int:
        """Minimum of K'M - (delay budget lhs) over all prefixes K'."""
        m_count = self.num_workers
        state_sum = 0  # sum over workers of their dispatch iteration
        done_sum = 0   # sum of delays of arrivals already applied
        slack = None
        for k, _worker, dispatched in self.history:
            inflight_sum = k * m_count - state_sum
            margin = k * m_count - (done_sum + inflight_sum)
            slack = margin if slack is None else min(slack, margin)
            done_sum += k - dispatched
            state_sum += k - dispatched
        # one horizon past the last arrival: lhs grows by M, rhs by M
        k = self.arrival_count + 1
        inflight_sum = k * m_count - state_sum
        margin = k * m_count - (done_sum + inflight_sum)
        slack = margin if slack is None else min(slack, margin)
        return slack

    def long_delay_count_ok(self) -> bool:
        """At most min(K/3, max(K - 3M, 0)) arrivals in any prefix of length K
        may carry a delay larger than 3M."""
        m3 = 3 * self.num_workers
        long_count = 0
        for k, worker, dispatched in self.history:
            if k - dispatched > m3:
                long_count += 1
            if long_count > min(k / 3, max(k - m3, 0)):
                return False
        return True

    # ------------------------------------------------------------------
    # serialization

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "worker", "prev", "tau"])
            for k, worker, dispatched in self.history:
                writer.writerow([k, worker, dispatched, k - dispatched])

    @classmethod
    def replay(cls, workers, num_workers: int | None = None) -> "DelayLedger":
        """Rebuild a ledger from a sequence of arriving worker ids."""
        workers = list(workers)
        if num_workers is None:
            if not workers:
                raise LedgerError("cannot infer worker count from an empty sequence")
            num_workers = max(workers)
        ledger = cls(num_workers)
        for worker in workers:
            ledger.record_arrival(worker)
        return ledger
