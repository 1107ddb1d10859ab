"""Brute-force cross-validation of the solver and the subsequence algebra."""

import pytest

from conftest import ORACLE_CASES, build_models
from maskcc.leakage import check_equivalence, linearize
from maskcc.model import SolutionView, check_solution
from maskcc.oracle import (
    OracleError,
    brute_force,
    compare_with_solver,
    enumerate_all,
    trace_msubseq,
    trace_subseq,
)
from maskcc.solver import SolveBudget, enumerate_solutions, solve


@pytest.fixture(scope="module")
def reports():
    out = {}
    for name, tgt, budget in ORACLE_CASES:
        base, secure, _ = build_models(name, tgt, budget)
        out[(name, tgt, budget)] = (
            base,
            secure,
            compare_with_solver(base, secure, op_bound=8, count_slack=0),
        )
    return out


def test_no_discrepancies_vs_solver(reports):
    for key, (_b, _s, rep) in reports.items():
        assert rep.discrepancies == [], (key, rep.discrepancies)


def test_xor_zero_overhead_confirmed_by_oracle(reports):
    for tgt in ("thumb-like", "mips-like"):
        rep = reports[("xor_p0", tgt, "none")][2]
        assert rep.insecure_optimum == rep.secure_optimum == 3


def test_oracle_full_budget_running_example():
    """Iterative deepening keeps the full copy budget tractable at the optimum."""
    base, secure, _ = build_models("xor_p0", "thumb-like", "full")
    opt_b, _ = brute_force(base, op_bound=8)
    opt_s, sols = brute_force(secure, op_bound=8)
    assert opt_b == opt_s == 3
    assert len(sols) == 1


def test_infeasible_model_has_zero_solutions():
    _, secure, _ = build_models("nohide", "thumb-like", "reg")
    opt, sols = brute_force(secure, op_bound=8, max_makespan=8)
    assert opt is None and sols == []


def test_op_bound_enforced():
    base, _, _ = build_models("spill_force", "mini", "full")
    with pytest.raises(OracleError):
        brute_force(base, op_bound=6)  # seven mandatory operations


def test_trace_subseq_on_plain_xor_solution():
    base, _, _ = build_models("xor_p0", "thumb-like", "full")
    from test_model import plain_solution, hiding_solution

    sol = plain_solution(base)
    assert trace_subseq(base, sol) == {(1, 6), (0, 8)}
    hiding = hiding_solution(base)
    pairs = trace_subseq(base, hiding)
    assert (4, 5) in pairs and (5, 6) in pairs
    assert trace_msubseq(base, sol) == set()


def test_subseq_characterization_across_oracle_solutions(reports):
    """Trace-walk pairs equal the live-range algebra on every solution."""
    total = 0
    for key, (base, secure, rep) in reports.items():
        for model, opt in (
            (base, rep.insecure_optimum),
            (secure, rep.secure_optimum),
        ):
            if opt is None:
                continue
            for sol in enumerate_all(model, opt, op_bound=8):
                v = SolutionView(model, sol)
                assert trace_subseq(model, sol) == v.subseq_pairs(), key
                assert trace_msubseq(model, sol) == v.msubseq_pairs(), key
                total += 1
    assert total > 50


def test_subseq_characterization_on_spill_solutions():
    """The same equivalence over solver-enumerated spill schedules."""
    for name in ("spill_force", "spill_sec"):
        base, secure, _ = build_models(name, "mini", "full")
        for model in (base, secure):
            out = solve(model, SolveBudget(seconds=120))
            if out.solution is None:
                continue
            sols, _ = enumerate_solutions(
                model, cap=40, makespan_cap=out.solution.objective
            )
            assert sols, name
            for sol in sols:
                v = SolutionView(model, sol)
                assert trace_subseq(model, sol) == v.subseq_pairs(), name
                assert trace_msubseq(model, sol) == v.msubseq_pairs(), name


def test_every_secure_oracle_solution_is_leak_free(reports):
    """Simulated equivalence holds for each enumerated secure solution."""
    for (name, tgt, budget), (base, secure, rep) in reports.items():
        if rep.secure_optimum is None:
            continue
        prog = secure.program
        secret_ids = [t.id for t, c in prog.inputs if str(c) == "secret"]
        if not secret_ids:
            continue
        pub = {t.id: 3 for t, c in prog.inputs if str(c) == "public"}
        s1 = {t: 0x0 for t in secret_ids}
        s2 = {t: 0xF for t in secret_ids}
        for sol in enumerate_all(secure, rep.secure_optimum, op_bound=8):
            h = linearize(secure, sol)
            v = check_equivalence(h, pub, (s1, s2))
            assert v.equivalent, (name, tgt, sol.to_dict())


def test_leaky_base_solutions_absent_from_secure_enumeration(reports):
    """Any base solution that simulates leaky never appears in the secure set."""
    found_leaky = 0
    for (name, tgt, budget), (base, secure, rep) in reports.items():
        if rep.insecure_optimum is None or rep.secure_optimum is None:
            continue
        prog = base.program
        secret_ids = [t.id for t, c in prog.inputs if str(c) == "secret"]
        if not secret_ids:
            continue
        pub = {t.id: 3 for t, c in prog.inputs if str(c) == "public"}
        s1 = {t: 0x0 for t in secret_ids}
        s2 = {t: 0xF for t in secret_ids}
        cap = max(rep.insecure_optimum, rep.secure_optimum)
        secure_keys = {s.sort_key() for s in enumerate_all(secure, cap, op_bound=8)}
        for sol in enumerate_all(base, cap, op_bound=8):
            h = linearize(base, sol)
            if not check_equivalence(h, pub, (s1, s2)).equivalent:
                found_leaky += 1
                assert sol.sort_key() not in secure_keys, (name, tgt)
    assert found_leaky > 0


def test_oracle_solutions_satisfy_model_checker(reports):
    """Oracle-generated solutions pass the model-side constraint evaluation."""
    for key, (base, secure, rep) in reports.items():
        for model, opt in (
            (base, rep.insecure_optimum),
            (secure, rep.secure_optimum),
        ):
            if opt is None:
                continue
            for sol in enumerate_all(model, opt, op_bound=8)[:20]:
                assert check_solution(model, sol) == [], key
