"""Acceptance suite: every release criterion at its stated tolerance, one
printed pass/fail line per criterion. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import time

import numpy as np
import pytest

from mobicache.aca import (
    aca_allocate,
    expected_weight,
    greedy_fill,
    helper_knapsack,
    hua_allocate,
)
from mobicache.allocation import (
    download_schedule,
    failure_probability_exact,
    failure_probability_mc,
)
from mobicache.auxchain import (
    build_aux_chain,
    expected_weight_via_chain,
    stationary_distribution,
)
from mobicache.cli import ExperimentConfig, cmd_sweep, main
from mobicache.model import Catalog, HelperSet, MobilityModel, uniform_request_model
from mobicache.oca import build_mip, solve_branch_and_bound
from mobicache.verification import random_feasible_allocation, random_instance
from mobicache.walks import contact_value_oracle, contact_value_table


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    assert passed, f"{criterion}: {detail}"


def test_criterion_1_contact_value_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for trial in range(100):
        model, requests, _h, _c, d = random_instance(
            rng, n_max=4, d_max=4, files_max=3, sparse=(trial % 3 == 0)
        )
        table = contact_value_table(model, requests, d)
        oracle = contact_value_oracle(model, requests, d)
        worst = max(worst, float(np.abs(table.values - oracle.values).max()))
    elapsed = time.perf_counter() - start
    _report(
        "1 contact-value closed form vs exhaustive enumeration",
        worst <= 1e-12 and elapsed < 10.0,
        f"max error {worst:.3e} <= 1e-12, runtime {elapsed:.2f}s < 10s",
    )


def test_criterion_2_expected_weight_chain_equivalence():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        model, requests, helpers, catalog, d = random_instance(rng, n_max=3, d_max=3)
        alloc = random_feasible_allocation(rng, helpers, catalog)
        schedule = download_schedule(alloc, helpers, catalog, d)
        closed_form = expected_weight(schedule, contact_value_table(model, requests, d))
        for alpha in (0.25, 0.5, 0.75):
            chain = build_aux_chain(model, requests, d, alpha, schedule)
            worst = max(worst, abs(expected_weight_via_chain(chain, d) - closed_form))
    elapsed = time.perf_counter() - start
    _report(
        "2 expected weight vs auxiliary-chain oracle (alpha-invariant)",
        worst <= 1e-10 and elapsed < 30.0,
        f"max error {worst:.3e} <= 1e-10, runtime {elapsed:.2f}s < 30s",
    )


def test_criterion_3_stationary_root_mass_formula():
    rng = np.random.default_rng(303)
    worst_balance = 0.0
    worst_root = 0.0
    for _ in range(50):
        model, requests, helpers, catalog, d = random_instance(rng, n_max=3, d_max=3)
        alloc = random_feasible_allocation(rng, helpers, catalog)
        schedule = download_schedule(alloc, helpers, catalog, d)
        alpha = float(rng.choice([0.25, 0.5, 0.75, 1.0]))
        chain = build_aux_chain(model, requests, d, alpha, schedule)
        pi = stationary_distribution(chain)  # raises if piE != pi beyond 1e-10
        flow = np.zeros_like(pi)
        for src, dst, p in chain.edges:
            flow[dst] += pi[src] * p
        worst_balance = max(worst_balance, float(np.abs(flow - pi).max()))
        worst_root = max(worst_root, abs(pi[0] - 1.0 / (1.0 + alpha * d)))
    _report(
        "3 stationary distribution: balance residual and root mass",
        worst_balance <= 1e-10 and worst_root <= 1e-12,
        f"residual {worst_balance:.3e} <= 1e-10, |pi(0)-1/(1+ad)| {worst_root:.3e} <= 1e-12",
    )


def test_criterion_4_greedy_knapsack_optimality():
    from mobicache.aca import knapsack_lp_oracle

    rng = np.random.default_rng(404)
    worst = 0.0
    instances = 0
    while instances < 100:
        model, requests, helpers, catalog, d = random_instance(
            rng, n_max=3, d_max=4, files_max=6
        )
        values = contact_value_table(model, requests, d)
        for h in range(helpers.n):
            if instances >= 100:
                break
            instance = helper_knapsack(h, helpers, catalog, values)
            _placed, greedy_obj = greedy_fill(instance, catalog.num_files)
            worst = max(worst, abs(greedy_obj - knapsack_lp_oracle(instance)))
            instances += 1
    _report(
        "4 greedy fractional knapsack equals its LP optimum",
        worst <= 1e-9,
        f"max |greedy - lp| {worst:.3e} <= 1e-9 over {instances} instances",
    )


def test_criterion_5_exact_solver_optimality():
    start = time.perf_counter()
    # the desk instance: half-capacity caches leave repeat walks short
    model = MobilityModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]])
    requests = uniform_request_model([1.0], 2)
    catalog = Catalog([10])
    helpers = HelperSet([5, 5], [5, 5])
    mip = build_mip(model, requests, helpers, catalog, 2)
    _alloc, objective, _rep = solve_branch_and_bound(mip)
    desk_ok = abs(objective - 0.5) <= 1e-9

    rng = np.random.default_rng(505)
    worst_excess = 0.0
    for _ in range(25):
        model, requests, helpers, catalog, d = random_instance(
            rng, n_max=3, d_max=2, files_max=3
        )
        mip = build_mip(model, requests, helpers, catalog, d)
        _a, oca_obj, _r = solve_branch_and_bound(mip)
        values = contact_value_table(model, requests, d)
        rivals = [
            aca_allocate(helpers, catalog, values, d),
            hua_allocate(helpers, catalog, requests),
        ]
        rivals += [random_feasible_allocation(rng, helpers, catalog) for _ in range(1000)]
        best_rival = min(
            failure_probability_exact(a, model, requests, helpers, catalog, d).p_fail
            for a in rivals
        )
        worst_excess = max(worst_excess, oca_obj - best_rival)
    elapsed = time.perf_counter() - start
    _report(
        "5 exact solver: desk optimum 0.5 and dominance on random instances",
        desk_ok and worst_excess <= 1e-9 and elapsed < 300.0,
        f"desk objective {objective!r}, max excess over rivals {worst_excess:.3e} <= 1e-9, "
        f"runtime {elapsed:.1f}s < 300s",
    )


def test_criterion_6_evaluator_consistency():
    rng = np.random.default_rng(606)
    within = 0
    runs = 20
    for _ in range(runs):
        model, requests, helpers, catalog, d = random_instance(rng, n_max=3, d_max=3)
        alloc = random_feasible_allocation(rng, helpers, catalog)
        exact = failure_probability_exact(alloc, model, requests, helpers, catalog, d)
        mc = failure_probability_mc(
            alloc, model, requests, helpers, catalog, d,
            samples=100_000, seed=int(rng.integers(2**31)),
        )
        if abs(mc.p_fail - exact.p_fail) <= mc.ci_halfwidth_99 + 1e-12:
            within += 1
    _report(
        "6 exact and Monte Carlo evaluators agree within the 99% CI",
        within >= 19,
        f"{within}/{runs} runs inside the interval (need >= 19)",
    )


@pytest.fixture(scope="module")
def figure_trend_rows(tmp_path_factory):
    # synthetic stand-in: 20 helpers in 2-helper islands, 20 files of 30 MB,
    # slot budget half a file, deadline 3, catalog popularity shape 1 shift 10
    config = ExperimentConfig.from_dict({
        "n": 20,
        "d": 3,
        "slot_duration_s": 100,
        "catalog": {"num_files": 20, "file_size_bytes": 30_000_000},
        "helpers": {"slot_budget_bytes": 15_000_000, "cache_capacity_bytes": 0},
        "requests": {"zipf_shape": 1.0, "zipf_shift": 10.0},
        "mobility": {"synthetic": {"locality": 0.5, "cluster_size": 2}},
        "algorithms": ["hua", "aca", "oca"],
        "evaluation": {"method": "exact"},
        "sweep": {"axis": "cache_fraction", "values": [0.01, 0.02, 0.05, 0.10]},
    })
    out = tmp_path_factory.mktemp("sweep") / "figure_trends.csv"
    return cmd_sweep(config, out)


def test_criterion_7_figure_trends(figure_trend_rows):
    rows = figure_trend_rows
    series = {}
    for row in rows:
        series.setdefault(row["algorithm"], []).append(
            (row["axis_value"], row["p_fail"])
        )
    monotone = all(
        all(a[1] >= b[1] - 1e-12 for a, b in zip(points, points[1:]))
        for points in series.values()
    )
    by_value = {}
    for row in rows:
        by_value.setdefault(row["axis_value"], {})[row["algorithm"]] = row["p_fail"]
    coded_never_worse = all(
        point["aca"] <= point["hua"] + 1e-12 for point in by_value.values()
    )
    at_five = by_value[0.05]
    strict_gain = at_five["hua"] - at_five["aca"]
    improvement_pct = 100.0 * strict_gain / at_five["hua"] if at_five["hua"] > 0 else 0.0
    optimal_never_worse = all(
        point["oca"] <= min(point["aca"], point["hua"]) + 1e-9
        for point in by_value.values()
    )
    _report(
        "7 failure-probability trends across cache sizes",
        monotone and coded_never_worse and strict_gain > 1e-9 and optimal_never_worse,
        "non-increasing in cache fraction for hua/aca/oca; aca <= hua everywhere; "
        f"at 5% cache aca improves on hua by {strict_gain:.4f} ({improvement_pct:.1f}%, reported not asserted)",
    )


def test_criterion_8_command_determinism(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "n": 2, "d": 2, "slot_duration_s": 100,
        "catalog": {"num_files": 1, "file_size_bytes": 10},
        "helpers": {"slot_budget_bytes": 5, "cache_capacity_bytes": 5},
        "requests": {"zipf_shape": 1.0, "zipf_shift": 0.0},
        "mobility": {"synthetic": {"locality": 0.5, "cluster_size": 2}},
        "algorithms": ["hua", "aca", "oca"],
        "evaluation": {"method": "mc", "samples": 20_000, "seed": 11},
        "sweep": {"axis": "cache_fraction", "values": [0.5, 1.0]},
    }), encoding="utf-8")
    trace_path = tmp_path / "trace.csv"
    trace_path.write_text(
        "user_id,timestamp_s,helper_id\na,0.0,0\na,50.0,1\na,250.0,1\nb,10.0,1\n",
        encoding="utf-8",
    )

    pairs = []
    for rep in (1, 2):
        model_out = tmp_path / f"model{rep}.json"
        assert main(["estimate", "--trace", str(trace_path), "--slot-duration", "100",
                     "--n", "2", "--out", str(model_out)]) == 0
        alloc_outs = []
        for algorithm in ("hua", "aca", "oca"):
            out = tmp_path / f"{algorithm}{rep}.json"
            assert main(["allocate", "--config", str(config_path),
                         "--algorithm", algorithm, "--out", str(out)]) == 0
            alloc_outs.append(out)
        eval_out = tmp_path / f"eval{rep}.json"
        assert main(["evaluate", "--config", str(config_path),
                     "--allocation", str(alloc_outs[1]), "--out", str(eval_out)]) == 0
        sweep_out = tmp_path / f"sweep{rep}.csv"
        assert main(["sweep", "--config", str(config_path), "--out", str(sweep_out)]) == 0
        pairs.append([model_out, *alloc_outs, eval_out, sweep_out])

    identical = all(a.read_bytes() == b.read_bytes() for a, b in zip(*pairs))
    _report(
        "8 repeated commands produce byte-identical artifacts",
        identical,
        f"{len(pairs[0])} artifact kinds compared across two runs",
    )
