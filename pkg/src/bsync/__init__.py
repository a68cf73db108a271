"""Counting and uniform sampling of executions of barrier-synchronization
processes, working on the causal control graph instead of the state space."""

from .process import (
    Act, New, Par, Stop, Sync, Term, STOP,
    DuplicateLabelError, LimitExceededError, ParseError, ProcessError,
    UnboundBarrierError, ValidationReport, EnumerationResult,
    action_labels, enumerate_executions, format_process, is_terminated,
    parse_process, size, step, sync_barrier, validate, wait_barrier,
)
from .ctg import (
    BarrierNode, ControlGraph, Poset,
    CyclicInputError, DeadlockedGraphError, DuplicateNodeError, GraphError,
    NotTransitivelyReducedError,
    build_ctg, eliminate_barrier, encode_poset, format_edge_list,
    graph_union, has_deadlock, parse_edge_list, prefix_node, to_dot,
    to_poset, transitive_reduction,
)
from .poly import Bound, MissingVariableError, Polynomial, as_bound, horner
from .decompose import (
    DecompStep, FormulaTree, GreedyStrategy, IntegrationStep, Leaf,
    NonIntegerVolumeError, RandomStrategy, Split,
    applicable_rules, count_executions, decompose, is_bit_decomposable,
    leaves, tree_from_json, tree_to_json, tree_to_json_text, volume,
)
from .sample import (
    NumericalFailureError, TieDetectedError,
    choose_branch, rank_to_execution, sample_execution, sample_point,
)
from .subclasses import (
    InvalidParametersError, NotForkJoinError, NotPromiseError,
    SPAtom, SPPar, SPSeq, SPTree,
    fj_count, fj_sample, fj_term_of_shape, gen_arch, gen_fork_join,
    gen_fork_join_instance, gen_fork_join_shape, is_arch, is_fork_join,
    is_promise_process, sp_covering, sp_labels, sp_par, sp_seq, sp_size,
    sp_tree,
)
from .oracle import (
    TooLargeError, UnknownOutcomeError,
    brute_force_extensions, brute_force_sampler, chi_square_uniformity,
    is_linear_extension, mcmc_sampler,
)
from .bench import BenchReport, BenchSpec, bench_run

__version__ = "0.1.0"
