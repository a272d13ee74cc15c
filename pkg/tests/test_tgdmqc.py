"""Multiparty protocol: distribution correctness, routing, secrecy, ledger."""

import numpy as np
import pytest

from obliq.gates import (
    Program,
    compile_parity,
    identity_program,
    program_product,
    random_program,
    zero_round,
)
from obliq.harness import (
    assert_complexity_tgdmqc,
    audit_bell_uniformity,
    audit_query_uniformity,
)
from obliq.oracle import ideal_outcome_distribution, total_variation
from obliq.tgdmqc import (
    equation_audits,
    exhaustive_output_distribution,
    program_with_users,
    run_tgdmqc,
    sampled_output_distribution,
    user_name,
    verify_against_ideal,
)
from obliq.toqc import derive_t_queries


def random_rounds(n, m, seed):
    return random_program(n, m, np.random.default_rng(seed)).rounds


# -- correctness -----------------------------------------------------------------

def test_single_run_distribution_matches_ideal_per_branch():
    # per forced or sampled branch, the exact reconstructed distribution must
    # equal the ideal one; a few honest runs cover different branches
    w = random_program(2, 2, np.random.default_rng(0))
    rounds = random_rounds(2, 2, 1)
    ideal = ideal_outcome_distribution(program_with_users(w, rounds), 2)
    for seed in range(5):
        res = run_tgdmqc(w, rounds, 2, seed=seed)
        assert total_variation(res.output_distribution, ideal) < 1e-9


@pytest.mark.parametrize("n,m", [(1, 1), (1, 2), (2, 1)])
def test_exhaustive_branches_match_ideal(n, m):
    w = random_program(n, m, np.random.default_rng((n, m)))
    rounds = random_rounds(n, m, (n, m, 7))
    tv, dist, ideal = verify_against_ideal(w, rounds, 1, seed=3, exhaustive=True)
    assert tv < 1e-9


def test_identity_server_program_runs_user_program():
    # w = e leaves exactly the users' program: parity demo shape
    program, n_circ = compile_parity((1, 1))
    w = identity_program(program.n, program.m)
    ideal = ideal_outcome_distribution(program, n_circ)
    res = run_tgdmqc(w, program.rounds, n_circ, seed=4)
    assert total_variation(res.output_distribution, ideal) < 1e-9
    assert res.output_bits == (0,)


def test_identity_user_rounds_run_server_program():
    w = random_program(1, 2, np.random.default_rng(5))
    e = identity_program(1, 2)
    ideal = ideal_outcome_distribution(w, 1)
    dist, _, total = exhaustive_output_distribution(w, e.rounds, 1, seed=6)
    assert abs(total - 1.0) < 1e-12
    assert total_variation(dist, ideal) < 1e-9


def test_sampled_agreement_n3_m3():
    w = random_program(3, 3, np.random.default_rng(8))
    rounds = random_rounds(3, 3, 9)
    ideal = ideal_outcome_distribution(program_with_users(w, rounds), 1)
    dist = sampled_output_distribution(w, rounds, 1, seed=10, runs=2000)
    assert total_variation(dist, ideal) < 0.05


def test_zero_y_prime_cancels_round_phases():
    # y'_j = 0 zeroes the product program's round-j phase exponents
    w = random_program(1, 1, np.random.default_rng(11))
    rounds = (zero_round(1),)
    product = program_with_users(w, rounds)
    assert product.rounds[0].y == (0,)
    tv, _, _ = verify_against_ideal(w, rounds, 1, seed=12, exhaustive=True)
    assert tv < 1e-9


# -- parity demo --------------------------------------------------------------------

@pytest.mark.parametrize("l", [1, 2, 3])
def test_parity_demo_all_assignments(l):
    for assignment in range(1 << l):
        bits = [(assignment >> (l - 1 - i)) & 1 for i in range(l)]
        program, n_circ = compile_parity(bits)
        w = identity_program(program.n, program.m)
        res = run_tgdmqc(w, program.rounds, n_circ, seed=(l, assignment))
        want = sum(bits) % 2
        assert res.output_bits == (want,)
        assert res.output_distribution[want] == pytest.approx(1.0, abs=1e-9)


# -- wire accounting ------------------------------------------------------------------

@pytest.mark.parametrize("n,m,n_circ", [(1, 1, 1), (2, 2, 1), (2, 2, 2), (3, 2, 1)])
def test_ledger_matches_formulas(n, m, n_circ):
    w = random_program(n, m, np.random.default_rng((n, m, 1)))
    rounds = random_rounds(n, m, (n, m, 2))
    res = run_tgdmqc(w, rounds, n_circ, seed=(n, m))
    verdict = assert_complexity_tgdmqc(res.ledger, n, m, n_circ,
                                       transcript=res.transcript)
    assert verdict.ok, verdict.details
    ub, uq, db, dq = res.ledger.totals()
    assert (ub, uq) == ((4 * n * n + 16 * n) * m, 0)
    assert (db, dq) == (4 * n * m + n_circ, 0)


def test_ledger_spot_values():
    res = run_tgdmqc(random_program(2, 2, np.random.default_rng(3)),
                     random_rounds(2, 2, 4), 1, seed=13)
    assert res.ledger.download_bits == 17   # 4*2*2 + 1
    res = run_tgdmqc(random_program(1, 1, np.random.default_rng(5)),
                     random_rounds(1, 1, 6), 1, seed=14)
    assert res.ledger.upload_bits == 20     # (4 + 16) * 1


def test_no_qubits_anywhere_near_users():
    res = run_tgdmqc(random_program(2, 2, np.random.default_rng(7)),
                     random_rounds(2, 2, 8), 1, seed=15)
    for rec in res.transcript.records:
        assert rec.message.qubits == 0
    assert res.ledger.upload_qubits == 0
    assert res.ledger.download_qubits == 0


# -- routing ------------------------------------------------------------------------

def test_outcome_routing_table():
    m = 3
    res = run_tgdmqc(random_program(1, m, np.random.default_rng(9)),
                     random_rounds(1, m, 10), 1, seed=16)
    routes = {}
    for rec in res.transcript.records:
        msg = rec.message
        if msg.sender.startswith("server") and msg.parts and \
                msg.parts[0].name == "bell-x":
            routes[msg.step] = msg.receivers
    assert routes["step-2"] == (user_name(1),)
    assert routes["step-4"] == (user_name(1), user_name(2))
    for j in range(2, m + 1):
        assert routes[f"step-{4 * j - 2}"] == (user_name(j),)
        assert routes[f"step-{4 * j}"] == (user_name(j), user_name(j + 1))


def test_outcome_downloads_counted_once():
    # a two-recipient outcome message contributes its 2n bits once
    n, m = 2, 2
    res = run_tgdmqc(random_program(n, m, np.random.default_rng(11)),
                     random_rounds(n, m, 12), 1, seed=17)
    step4 = [r.message for r in res.transcript.records if r.message.step == "step-4"]
    assert len(step4) == 1
    assert step4[0].bits == 2 * n
    assert len(step4[0].receivers) == 2


def test_users_see_only_their_outcomes():
    m = 3
    res = run_tgdmqc(random_program(1, m, np.random.default_rng(13)),
                     random_rounds(1, m, 14), 1, seed=18)
    for j in range(1, m + 1):
        steps = {step for step, name, _ in res.views[user_name(j)].received}
        allowed = {f"step-{4 * j - 2}" if j > 1 else "step-2",
                   f"step-{4 * j}" if j > 1 else "step-4"}
        if j > 1:
            allowed.add(f"step-{4 * (j - 1)}")
        assert steps <= allowed, (j, steps)


# -- secrecy ------------------------------------------------------------------------

def test_query_uniformity_under_distinct_user_programs():
    verdict = audit_query_uniformity(equation_audits((1, 3, 1), (2, 6, 0)))
    assert verdict.ok, verdict.details


def test_coefficient_one_reduces_to_plain_equations():
    fresh = {0: (3, 1), 1: (6, 4)}
    shift, delta = (1, 0), (0, 1)
    assert derive_t_queries(fresh, shift, delta, coeff=(1, 1)) == \
        derive_t_queries(fresh, shift, delta)


def test_outcome_joint_independent_of_server_program():
    # exhaustive n=1, m=1: the joint law of everything users receive about
    # the teleports is uniform whatever w is
    rounds = random_rounds(1, 1, 15)
    joints = []
    for seed in (0, 1):
        w = random_program(1, 1, np.random.default_rng((16, seed)))
        _, joint, total = exhaustive_output_distribution(w, rounds, 1, seed=19)
        assert abs(total - 1.0) < 1e-12
        joints.append(joint)
    assert set(joints[0]) == set(joints[1])
    for plan in joints[0]:
        assert joints[0][plan] == pytest.approx(joints[1][plan], abs=1e-12)
        assert joints[0][plan] == pytest.approx(0.25 ** 2, abs=1e-12)


def test_branch_records_uniform():
    res = run_tgdmqc(random_program(2, 2, np.random.default_rng(17)),
                     random_rounds(2, 2, 18), 1, seed=20)
    assert audit_bell_uniformity(res.branch_records).ok


def test_shape_validation():
    w = random_program(2, 2, np.random.default_rng(19))
    with pytest.raises(ValueError):
        run_tgdmqc(w, random_rounds(2, 1, 20), 1, seed=0)
    with pytest.raises(ValueError):
        run_tgdmqc(w, random_rounds(1, 2, 21), 1, seed=0)
    with pytest.raises(ValueError):
        run_tgdmqc(w, random_rounds(2, 2, 22), 3, seed=0)


# -- reduction to single-user oblivious computation ------------------------------------

@pytest.mark.parametrize("n", [1, 2])
def test_oqc_reduction_via_split(n):
    # server holds (e, w2), the user side holds (w1', e): the run must
    # reproduce the basis-measurement law of W2(w2) W1(w1') |0...0>
    from obliq.gates import concat_programs, split_program

    rng = np.random.default_rng((23, n))
    m1, m2 = 1, 1
    w2 = random_program(n, m2, rng)
    w1p = random_program(n, m1, rng)
    e1 = identity_program(n, m1)
    e2 = identity_program(n, m2)
    server = concat_programs(e1, w2)
    users = concat_programs(w1p, e2)
    combined = concat_programs(w1p, w2)  # W2 after W1'
    ideal = ideal_outcome_distribution(combined, 1)
    dist, _, total = exhaustive_output_distribution(server, users.rounds, 1, seed=24)
    assert abs(total - 1.0) < 1e-12
    assert total_variation(dist, ideal) < 1e-9
    # self-check of the construction: product(server, users) == combined
    assert program_product(server, Program(n, users.rounds)) == combined
