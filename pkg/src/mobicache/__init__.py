"""Cache storage allocation for coded content across small-cell helper
stations under Markov user mobility: an exact branch-and-bound optimum, a
greedy knapsack approximation, an uncoded baseline, and exact / Monte Carlo
delivery-failure evaluators, all cross-checked by brute-force oracles."""

from .allocation import (
    Allocation,
    DownloadSchedule,
    EvalReport,
    check_feasible,
    download_schedule,
    failure_probability_exact,
    failure_probability_mc,
)
from .aca import (
    KnapsackInstance,
    Material,
    aca_allocate,
    expected_weight,
    hua_allocate,
    knapsack_lp_oracle,
)
from .auxchain import (
    AuxChain,
    bound_value,
    build_aux_chain,
    expected_weight_via_chain,
    stationary_distribution,
)
from .errors import InstanceTooLargeError, InternalConsistencyError
from .lp import LpProblem, LpSolution, solve_lp
from .model import (
    Catalog,
    HelperSet,
    MobilityModel,
    RequestModel,
    TraceLog,
    TraceRecord,
    build_zipf_mandelbrot,
    estimate_from_trace,
    generate_trace,
    synthetic_mobility,
    uniform_request_model,
)
from .oca import BnbOptions, GapReport, MipProblem, build_mip, solve_branch_and_bound
from .verification import run_verification
from .walks import (
    ContactValueTable,
    Walk,
    contact_value_oracle,
    contact_value_table,
    enumerate_walks,
    first_passage,
    walk_probability,
)

__all__ = [
    "Allocation",
    "AuxChain",
    "BnbOptions",
    "Catalog",
    "ContactValueTable",
    "DownloadSchedule",
    "EvalReport",
    "GapReport",
    "HelperSet",
    "InstanceTooLargeError",
    "InternalConsistencyError",
    "KnapsackInstance",
    "LpProblem",
    "LpSolution",
    "Material",
    "MipProblem",
    "MobilityModel",
    "RequestModel",
    "TraceLog",
    "TraceRecord",
    "Walk",
    "aca_allocate",
    "bound_value",
    "build_aux_chain",
    "build_mip",
    "build_zipf_mandelbrot",
    "check_feasible",
    "contact_value_oracle",
    "contact_value_table",
    "download_schedule",
    "enumerate_walks",
    "estimate_from_trace",
    "expected_weight",
    "expected_weight_via_chain",
    "failure_probability_exact",
    "failure_probability_mc",
    "first_passage",
    "generate_trace",
    "hua_allocate",
    "knapsack_lp_oracle",
    "run_verification",
    "solve_branch_and_bound",
    "solve_lp",
    "stationary_distribution",
    "synthetic_mobility",
    "uniform_request_model",
    "walk_probability",
]

__version__ = "0.1.0"
