"""Two-state batch Markov modulated Poisson processes, BMMPP_2(K).

Descriptors, canonical forms, the moments characterization, simulation,
sequential moment fitting, likelihood and EM, counting probabilities and the
BMMPP/M/1 queue length at departures.
"""
from .canonical import (
    CanonicalMap2, canonical_to_mmpp, mmpp_from_moments, mmpp_to_canonical,
    moments_to_canonical, moments_to_model, polish_d0, solve_batch_split,
)
from .counting import (
    CountDistribution, count_distribution, count_distribution_size_k, count_variance,
    palm_mean,
)
from .descriptors import (
    DescriptorReport, MomentSet, batch_moments, batch_pmf, cov_corr_TB, describe, eta,
    moment_set, rho_B, rho_T, stationary_vectors, time_moments,
)
from .errors import (
    BmmppError, ConvergenceError, DegenerateError, InfeasibleMomentsError,
    InvalidModelError, ReducibleModelError, TruncationError, UnstableQueueError,
)
from .fit import (
    EmpiricalMoments, FitConfig, FitResult, compare_reports, empirical_descriptors,
    empirical_moments, fit, fit_moments,
)
from .likelihood import em_fit, loglik
from .model import (
    EXAMPLE_K2, EXAMPLE_K4, BmmppModel, MmppModel, ProbParam, check, embedded_mmpp,
    from_prob_params, load_model, make_iid_batch, normalize_state_order, save_model,
    size_k_mmpp, sub_bmmpp2, to_prob_params, validate,
)
from .queue import (
    QueueLengthDist, QueueSpec, queue_length_at_departures, simulate_queue,
    traffic_intensity,
)
from .simulate import (
    ModelBounds, RngSpec, Trace, read_trace_csv, sample_random_model, simulate_trace,
    write_trace_csv,
)
from .traceio import (
    RawPacketTrace, aggregate_format1, aggregate_format2, read_raw_trace, summary_stats,
    synthetic_packet_trace,
)

__version__ = "0.1.0"
