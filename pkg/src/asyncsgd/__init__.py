"""Deterministic simulator and analysis toolkit for SGD under arbitrary
gradient delays: delay bookkeeping, event-driven worker schedules,
delay-adaptive stepsize rules, synthetic objectives with known constants,
replayable optimizer loops and virtual-iterate diagnostics."""

from .ledger import DelayLedger, LedgerError
from .optimizers import DivergedError, RunRecord, run_async, run_live, run_minibatch, worker_streams
from .problems import (BoundedNonconvex, HeterogeneousQuadratics, LeastSquares,
                       ProblemError, bounded_nonconvex, heterogeneous_quadratics,
                       least_squares, least_squares_from_csv)
from .scheduler import (ArrivalTrace, FixedSpeeds, RandomSpeeds, SpeedModelError,
                        StragglerSpeeds, simulate_trace, speedup_factor, steps_in_time,
                        trace_from_workers)
from .schedules import (DEFAULT_OUTPUT_RULE, OUTPUT_RULES, AdaptiveConvex,
                        AdaptiveHeterogeneous, AdaptiveNonconvex,
                        AdaptiveStronglyConvex, ConstantStep, ConstLipschitz,
                        LipschitzSmooth, ProblemConstants, ScheduleError,
                        StepSchedule, expected_sampled_metric,
                        log_weighted_stepsize_sum, make_schedule, output_weights,
                        select_output)
from .virtual import DiagnosticsError, VirtualTrack, max_identity_residual, track

__version__ = "0.1.0"

__all__ = [
    "ArrivalTrace", "AdaptiveConvex", "AdaptiveHeterogeneous", "AdaptiveNonconvex",
    "AdaptiveStronglyConvex", "BoundedNonconvex", "ConstLipschitz", "ConstantStep",
    "DEFAULT_OUTPUT_RULE", "DelayLedger", "DiagnosticsError", "DivergedError",
    "FixedSpeeds", "HeterogeneousQuadratics", "LeastSquares", "LedgerError",
    "LipschitzSmooth", "OUTPUT_RULES", "ProblemConstants", "ProblemError",
    "RandomSpeeds", "RunRecord", "ScheduleError", "SpeedModelError", "StepSchedule",
    "StragglerSpeeds", "VirtualTrack", "bounded_nonconvex", "expected_sampled_metric",
    "heterogeneous_quadratics", "least_squares", "least_squares_from_csv",
    "log_weighted_stepsize_sum", "make_schedule", "max_identity_residual",
    "output_weights", "run_async", "run_live", "run_minibatch", "select_output",
    "simulate_trace", "speedup_factor", "steps_in_time", "trace_from_workers",
    "track", "worker_streams",
]
