import pytest

from el_mimic.kb import ExSub, RoleSub, Sub, SubConj, SubEx, parse_kb
from el_mimic.reasoner import (
    RuleId,
    UnsupportedQueryError,
    completion_set,
    dump_trace,
    entails,
    rule_counts,
    saturate,
)


def test_saturate_transitivity_in_one_step() -> None:
    trace = saturate(parse_kb("sig 3 1\nC1 < C2\nC2 < C3\n"))

    assert len(trace) == 1
    [derivation] = trace.steps[0]
    assert derivation.conclusion == Sub(1, 3)
    assert derivation.rule is RuleId.TRANSITIVITY
    assert derivation.premises == (Sub(1, 2), Sub(2, 3))


def test_saturate_role_hierarchy_in_one_step() -> None:
    trace = saturate(parse_kb("sig 2 2\nC1 < R1 . C2\nR1 < R2\n"))

    assert [d.conclusion for d in trace.steps[0]] == [SubEx(1, 2, 2)]
    assert trace.steps[0][0].rule is RuleId.ROLE_HIERARCHY
    assert len(trace) == 1


def test_saturate_five_axiom_example(five_axiom_kb, closure_oracle) -> None:
    trace = saturate(five_axiom_kb)

    assert trace.step_conclusions(1) == (Sub(1, 4), Sub(4, 5))
    assert trace.step_conclusions(2) == (Sub(1, 5), SubEx(1, 1, 1))
    assert len(trace) == 2
    assert completion_set(trace) == closure_oracle(five_axiom_kb)
    assert {Sub(1, 4), SubEx(1, 1, 1), Sub(1, 5)} <= completion_set(trace)


def test_saturate_empty_when_nothing_derivable() -> None:
    trace = saturate(parse_kb("sig 2 1\nC1 < C2\n"))

    assert len(trace) == 0
    assert completion_set(trace) == set()
    assert dump_trace(trace) == ""


def test_saturate_never_emits_reflexive_subsumption() -> None:
    trace = saturate(parse_kb("sig 2 1\nC1 < C2\nC2 < C1\n"))

    assert completion_set(trace) == set()


def test_saturate_rule_four_uses_implicit_reflexivity() -> None:
    trace = saturate(parse_kb("sig 3 1\nC1 < R1 . C2\nR1 . C2 < C3\n"))

    [derivation] = trace.steps[0]
    assert derivation.conclusion == Sub(1, 3)
    assert derivation.premises == (SubEx(1, 1, 2), ExSub(1, 2, 3))


def test_saturate_handles_concepts_without_subsumers() -> None:
    # C2 and C4 never appear on the left of a subsumption.
    kb = parse_kb("sig 5 1\nC1 < R1 . C2\nC3 & C4 < C5\nR1 . C4 < C5\n")

    trace = saturate(kb)

    assert len(trace) == 0
    assert not entails(kb, Sub(1, 5))


def test_saturate_conjunction_with_implicit_reflexivity() -> None:
    trace = saturate(parse_kb("sig 3 1\nC1 < C2\nC1 & C2 < C3\n"))

    [derivation] = trace.steps[0]
    assert derivation.conclusion == Sub(1, 3)
    assert derivation.rule is RuleId.CONJUNCTION
    assert derivation.premises == (Sub(1, 2), SubConj(1, 2, 3))


def test_saturate_matches_naive_closure_on_random_kbs(make_random_kb, closure_oracle) -> None:
    for seed in range(200):
        kb = make_random_kb(seed, axioms=5 + seed % 26, max_concepts=4 + seed % 17)

        assert completion_set(saturate(kb)) == closure_oracle(kb), f"seed {seed}"


def test_saturate_steps_only_hold_new_statements(make_random_kb) -> None:
    kb = make_random_kb(17, axioms=25)
    trace = saturate(kb)

    seen = set(kb.axioms)
    for step in range(1, len(trace) + 1):
        conclusions = trace.step_conclusions(step)
        assert conclusions
        assert not seen & set(conclusions)
        assert list(conclusions) == sorted(conclusions, key=str)
        seen.update(conclusions)


def test_saturate_is_monotone(make_random_kb) -> None:
    kb = make_random_kb(21, axioms=15)
    bigger = kb.extend([RoleSub(1, 2), Sub(1, 2)])

    assert completion_set(saturate(kb)) - set(bigger.axioms) <= (
        completion_set(saturate(bigger))
    )


def test_saturating_the_closure_yields_nothing_new(make_random_kb) -> None:
    kb = make_random_kb(5, axioms=20)

    closed = kb.extend(sorted(completion_set(saturate(kb)), key=str))

    assert len(saturate(closed)) == 0


def test_saturate_is_deterministic(make_random_kb) -> None:
    kb = make_random_kb(9, axioms=25)

    assert dump_trace(saturate(kb)) == dump_trace(saturate(kb))


@pytest.mark.parametrize(
    ("text", "query", "expected"),
    [
        ("sig 3 1\nC1 < C2\nC2 < C3\n", Sub(1, 3), True),
        ("sig 3 1\nC1 < C2\n", Sub(2, 1), False),
        ("sig 3 1\nC1 < C2\n", Sub(1, 2), True),
    ],
)
def test_entails(text: str, query: Sub, expected: bool) -> None:
    assert entails(parse_kb(text), query) is expected


def test_entails_five_axiom_example(five_axiom_kb) -> None:
    assert entails(five_axiom_kb, Sub(1, 5))


@pytest.mark.parametrize("query", [RoleSub(1, 2), SubConj(1, 2, 3), ExSub(1, 2, 3)])
def test_entails_rejects_role_and_left_hand_forms(query: object) -> None:
    kb = parse_kb("sig 3 2\nC1 < C2\n")

    with pytest.raises(UnsupportedQueryError):
        entails(kb, query)  # type: ignore[arg-type]


def test_dump_trace_format() -> None:
    trace = saturate(parse_kb("sig 3 1\nC1 < C2\nC2 < C3\n"))

    assert dump_trace(trace) == "step 1 | rule 1 | C1 < C3 <= C1 < C2; C2 < C3\n"


def test_rule_counts_tally_the_trace(five_axiom_kb) -> None:
    counts = rule_counts(saturate(five_axiom_kb))

    assert counts[RuleId.CONJUNCTION] == 1
    assert sum(counts.values()) == 4
