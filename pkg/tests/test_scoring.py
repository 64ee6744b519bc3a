import math
import random

import pytest
from hypothesis import given, strategies as st

from diagnostica.errors import ConfigError, FormatError, ValidationError
from diagnostica.scoring import (
    Case,
    Category,
    EvaluationReport,
    Finding,
    MappingTable,
    PruneOptions,
    SCALE,
    ScoreRule,
    ScoreRuleBase,
    Status,
    Thresholds,
    category_value,
    dump_cases,
    evaluate,
    find_misclassification_patterns,
    infer,
    learn_scores,
    load_cases,
    misclassified,
    phi_coefficient,
    prune,
    refine_perceptron,
    step_category,
)


def rule(attribute, diagnosis, category, value="yes", abnormal=True):
    return ScoreRule(Finding(attribute, value, abnormal), diagnosis, category)


def case(findings, diagnoses):
    return Case.of([Finding(a, "yes", abnormal=True) for a in findings],
                   diagnoses)


# ----------------------------------------------------------------------
# categories and the aggregation law


def test_four_equal_categories_reach_the_next_higher_one():
    positive = [Category.P1, Category.P2, Category.P3, Category.P4]
    negative = [Category.N1, Category.N2, Category.N3, Category.N4]
    for lower, higher in zip(positive, positive[1:]):
        assert 4 * category_value(lower) == category_value(higher)
    for lower, higher in zip(negative, negative[1:]):
        assert 4 * category_value(lower) == category_value(higher)


def test_category_values_are_symmetric():
    assert [category_value(c) for c in SCALE] == [
        -64, -16, -4, -1, 1, 4, 16, 64]


def test_step_category_crosses_zero_and_clamps():
    assert step_category(Category.N1, +1) is Category.P1
    assert step_category(Category.P1, -1) is Category.N1
    assert step_category(Category.P4, +1) is Category.P4
    assert step_category(Category.N4, -1) is Category.N4
    assert step_category(Category.P2, +1) is Category.P3


def test_threshold_status_bands():
    t = Thresholds()
    assert t.status(64) is Status.ESTABLISHED
    assert t.status(63) is Status.POSSIBLE
    assert t.status(16) is Status.POSSIBLE
    assert t.status(15) is Status.UNCLEAR
    assert t.status(-15) is Status.UNCLEAR
    assert t.status(-16) is Status.EXCLUDED
    with pytest.raises(ConfigError):
        Thresholds(possible_at=64, established_at=16)


def test_infer_totals_and_firing():
    rb = ScoreRuleBase([
        rule("f1", "d", Category.P3),
        rule("f2", "d", Category.P3),
        rule("f3", "d", Category.N2),
        rule("f1", "other", Category.P4),
    ])
    results = infer(rb, [Finding("f1", "yes"), Finding("f2", "yes"),
                         Finding("f3", "yes")])
    assert results["d"].total == 16 + 16 - 4
    assert results["d"].status is Status.POSSIBLE
    assert {r.finding.attribute for r in results["d"].fired} == {
        "f1", "f2", "f3"}
    assert results["other"].status is Status.ESTABLISHED


def test_four_p3_rules_establish():
    rb = ScoreRuleBase([rule(f"f{i}", "d", Category.P3) for i in range(4)])
    results = infer(rb, [Finding(f"f{i}", "yes") for i in range(4)])
    assert results["d"].total == 64
    assert results["d"].status is Status.ESTABLISHED


def test_rule_base_rejects_duplicate_pairs():
    with pytest.raises(ValidationError):
        ScoreRuleBase([rule("f1", "d", Category.P1),
                       rule("f1", "d", Category.P2)])


def test_rule_base_json_round_trip():
    rb = ScoreRuleBase([rule("f1", "d", Category.N2)],
                       Thresholds(possible_at=8, established_at=32))
    clone = ScoreRuleBase.from_json(rb.to_json())
    assert clone.rules == rb.rules
    assert clone.thresholds == rb.thresholds
    with pytest.raises(FormatError):
        ScoreRuleBase.from_json({"rules": [{"attribute": "a"}]})


# ----------------------------------------------------------------------
# phi and the mapping table


def test_phi_perfect_association():
    assert phi_coefficient(5, 0, 0, 5) == 1.0
    assert phi_coefficient(0, 5, 5, 0) == -1.0
    assert phi_coefficient(5, 5, 5, 5) == 0.0
    assert phi_coefficient(5, 5, 0, 0) is None  # empty margin


def test_mapping_table_brackets():
    table = MappingTable()
    assert table.positive_category(0.69) is Category.P1
    assert table.positive_category(0.7) is Category.P2
    assert table.positive_category(0.9) is Category.P3
    assert table.positive_category(1.0) is Category.P4
    assert table.positive_category(0.1) is Category.P1  # total: floor bracket
    assert table.negative_category(1.0) is Category.N4
    assert table.negative_category(0.6) is Category.N1


def test_mapping_table_validation():
    with pytest.raises(ConfigError):
        MappingTable(positive=((0.7, Category.P1), (0.5, Category.P2)))
    with pytest.raises(ConfigError):
        MappingTable(positive=((0.5, Category.N1),))


# ----------------------------------------------------------------------
# learning against direct 2x2 counts

PLANTED = {"s1": "d1", "s2": "d1", "s3": "d2", "s4": "d2",
           "s5": "d3", "s6": "d3"}
NOISE = ("s7", "s8")


def planted_cases(n=200, seed=13):
    """Deterministic implications: s-attribute present iff its diagnosis."""
    rng = random.Random(seed)
    cases = []
    for i in range(n):
        diagnosis = f"d{i % 3 + 1}"
        findings = [Finding(attr, "yes", abnormal=True)
                    for attr, d in PLANTED.items() if d == diagnosis]
        findings += [Finding(attr, "yes", abnormal=False)
                     for attr in NOISE if rng.random() < 0.5]
        cases.append(Case.of(findings, [diagnosis]))
    return cases


def expected_rules_by_counting(cases, tau=0.5, alpha=0.05):
    """Independent 2x2 walk over every (finding, diagnosis) pair."""
    keys = sorted({f.key for c in cases for f in c.findings})
    diagnoses = sorted({d for c in cases for d in c.diagnoses})
    expected = {}
    for key in keys:
        for diagnosis in diagnoses:
            a = b = c = d = 0
            for case_ in cases:
                has_f = key in case_.finding_keys()
                has_d = diagnosis in case_.diagnoses
                a += has_f and has_d
                b += has_f and not has_d
                c += not has_f and has_d
                d += not has_f and not has_d
            denominator = (a + b) * (c + d) * (a + c) * (b + d)
            if denominator == 0:
                continue
            phi = (a * d - b * c) / math.sqrt(denominator)
            if abs(phi) < tau:
                continue
            n = a + b + c + d
            chi2 = n * (a * d - b * c) ** 2 / denominator
            if math.erfc(math.sqrt(chi2 / 2)) >= alpha:
                continue
            expected[(key, diagnosis)] = phi
    return expected


def test_learner_recovers_planted_rules_and_skips_noise():
    cases = planted_cases()
    rb = learn_scores(cases, tau=0.5)
    learned = {((r.finding.attribute, r.finding.value), r.diagnosis):
               r.category for r in rb.rules}
    expected = expected_rules_by_counting(cases)
    assert set(learned) == set(expected)
    for attribute, diagnosis in PLANTED.items():
        key = ((attribute, "yes"), diagnosis)
        assert learned[key] is Category.P4  # precision 1.0
        assert expected[key] == pytest.approx(1.0)  # phi of an implication
    for attribute in NOISE:
        assert not any(k[0][0] == attribute for k in learned)


def test_learner_assigns_negative_category_to_anti_correlation():
    cases = [case(["f"], []) for _ in range(5)] + \
            [case([], ["d"]) for _ in range(5)]
    rb = learn_scores(cases, tau=0.5)
    (only,) = rb.rules
    assert only.category is Category.N4  # false positive rate 1.0


def test_learner_respects_tau_and_significance_gates():
    cases = planted_cases(n=6)  # tiny corpus: chi-square gate blocks
    assert learn_scores(cases, tau=0.5, significance=1e-6).rules == ()
    with pytest.raises(ConfigError):
        learn_scores([], tau=0.5)
    with pytest.raises(ConfigError):
        learn_scores(planted_cases(8), tau=1.5)


# ----------------------------------------------------------------------
# pruning


def test_prune_abnormality_drops_normal_findings():
    rb = ScoreRuleBase([
        rule("f1", "d", Category.P4, abnormal=True),
        rule("f2", "d", Category.P4, abnormal=False),
    ])
    pruned = prune(rb, PruneOptions(abnormality=True))
    assert [r.finding.attribute for r in pruned.rules] == ["f1"]


def test_prune_partition_requires_matching_classes():
    rb = ScoreRuleBase([
        rule("liver_value", "hepatitis", Category.P4),
        rule("kidney_value", "hepatitis", Category.P4),
        rule("unassigned", "hepatitis", Category.P4),
    ])
    pruned = prune(
        rb, PruneOptions(partition=True),
        attribute_classes={"liver_value": "liver",
                           "kidney_value": "kidney"},
        diagnosis_classes={"hepatitis": "liver"})
    assert {r.finding.attribute for r in pruned.rules} == {
        "liver_value", "unassigned"}


def test_prune_heuristic_drops_only_negative_diagnoses():
    rb = ScoreRuleBase([
        rule("f1", "doomed", Category.N2),
        rule("f2", "doomed", Category.N4),
        rule("f1", "kept", Category.N2),
        rule("f3", "kept", Category.P2),
    ])
    pruned = prune(rb, PruneOptions(heuristic=True))
    assert {r.diagnosis for r in pruned.rules} == {"kept"}
    assert len(pruned.rules) == 2


def test_prune_without_options_is_identity():
    rb = ScoreRuleBase([rule("f1", "d", Category.N2)])
    assert prune(rb, PruneOptions()).rules == rb.rules


# ----------------------------------------------------------------------
# perceptron refinement


def one_step_low_fixture():
    rb = ScoreRuleBase([rule("f", "d", Category.P3)])
    cases = [case(["f"], ["d"]) for _ in range(5)]
    return rb, cases


def test_refinement_fixes_one_step_miscalibration():
    rb, cases = one_step_low_fixture()
    refined, epochs = refine_perceptron(rb, cases, max_epochs=10)
    assert epochs <= 5
    (only,) = refined.rules
    assert only.category is Category.P4
    for c in cases:
        assert not misclassified(refined, c)
    # structure is untouched: same (finding, diagnosis) pairs
    assert [(r.finding.key, r.diagnosis) for r in refined.rules] == \
        [(r.finding.key, r.diagnosis) for r in rb.rules]


def test_refinement_steps_down_false_positives():
    rb = ScoreRuleBase([rule("f", "d", Category.P4)])
    cases = [case(["f"], []) for _ in range(3)]
    refined, epochs = refine_perceptron(rb, cases)
    (only,) = refined.rules
    assert only.category is Category.P3  # one step below established
    assert epochs == 2


def test_refinement_on_consistent_base_is_identity_in_one_epoch():
    rb = ScoreRuleBase([rule("f", "d", Category.P4)])
    refined, epochs = refine_perceptron(rb, [case(["f"], ["d"])])
    assert epochs == 1
    assert refined.rules == rb.rules


def test_refinement_survives_contradictory_cases():
    rb = ScoreRuleBase([rule("f", "d", Category.P4)])
    cases = [case(["f"], ["d"]), case(["f"], [])]
    refined, epochs = refine_perceptron(rb, cases, max_epochs=4)
    assert epochs == 4  # never converges, stops at the bound
    assert refined.rules[0].category in SCALE


def test_refinement_climbs_across_zero():
    rb = ScoreRuleBase([rule("f", "d", Category.N1)])
    refined, epochs = refine_perceptron(rb, [case(["f"], ["d"])],
                                        max_epochs=10)
    (only,) = refined.rules
    assert only.category is Category.P4
    assert epochs == 5  # N1 -> P1 -> P2 -> P3 -> P4, then one clean epoch


# ----------------------------------------------------------------------
# misclassification subgroups


def test_misclassification_patterns_locate_weak_region():
    rb = ScoreRuleBase([rule("f", "d", Category.P4)])
    cases = []
    for i in range(12):
        region = "north" if i % 2 else "south"
        findings = [Finding("region", region), Finding("f", "yes")]
        # the rule base believes f establishes d, but in the north it
        # never holds
        labels = ["d"] if region == "south" else []
        cases.append(Case.of(findings, labels))
    assert misclassified(rb, cases[1])
    assert not misclassified(rb, cases[0])
    results = find_misclassification_patterns(rb, cases, k=1, max_depth=1)
    (top,) = results
    assert [str(s) for s in top.pattern.selectors] == ["region=north"]


# ----------------------------------------------------------------------
# evaluation


def partitioned_cases(n_per_diagnosis=25):
    """Four diagnoses in two partition classes with cross-class noise."""
    diagnoses = {"d1": "liver", "d2": "liver", "d3": "kidney",
                 "d4": "kidney"}
    other = {"liver": "kidney", "kidney": "liver"}
    cases = []
    for d, klass in diagnoses.items():
        for _ in range(n_per_diagnosis):
            findings = [
                Finding(f"strong_{d}", "yes", abnormal=True),
                Finding(f"normal_{d}", "yes", abnormal=False),
                Finding(f"cross_{d}", "yes", abnormal=True),
            ]
            cases.append(Case.of(findings, [d]))
    attribute_classes = {}
    for d, klass in diagnoses.items():
        attribute_classes[f"strong_{d}"] = klass
        attribute_classes[f"normal_{d}"] = klass
        attribute_classes[f"cross_{d}"] = other[klass]
    return cases, attribute_classes, diagnoses


def test_sequential_folds_are_contiguous_blocks():
    cases = planted_cases(n=10)
    report = evaluate(cases, folds=5)
    assert isinstance(report, EvaluationReport)
    assert len(report.folds) == 5
    assert all(f.pairs == 2 * 3 for f in report.folds)
    with pytest.raises(ConfigError):
        evaluate(cases, folds=1)
    with pytest.raises(ConfigError):
        evaluate(cases, folds=11)


def test_pruning_shrinks_rules_without_costing_accuracy():
    cases, attribute_classes, diagnosis_classes = partitioned_cases()
    baseline = evaluate(cases, folds=5)
    pruned = evaluate(cases, folds=5,
                      prune_options=PruneOptions(abnormality=True,
                                                 partition=True,
                                                 heuristic=True),
                      attribute_classes=attribute_classes,
                      diagnosis_classes=diagnosis_classes)
    assert baseline.rules_per_diagnosis >= 3.0
    assert pruned.rules_per_diagnosis <= baseline.rules_per_diagnosis / 2
    assert pruned.accuracy >= baseline.accuracy * 0.9
    assert pruned.attribute_values < baseline.attribute_values


def test_perfect_generator_evaluates_perfectly():
    # tau = 0.6 keeps only the planted implications: with three balanced
    # classes, cross-pair phi sits right at -0.5 and would flip with the
    # fold boundaries
    report = evaluate(planted_cases(60), folds=6, tau=0.6)
    assert report.accuracy == 1.0
    assert report.rules_per_diagnosis == pytest.approx(2.0)
    assert report.categories_per_diagnosis == pytest.approx(1.0)


# ----------------------------------------------------------------------
# serialization


def test_cases_jsonl_round_trip():
    cases = planted_cases(6)
    text = dump_cases(cases)
    clone = load_cases(text)
    assert [c.finding_keys() for c in clone] == \
        [c.finding_keys() for c in cases]
    assert [c.diagnoses for c in clone] == [c.diagnoses for c in cases]
    # abnormal flags survive
    flags = {f.key: f.abnormal for c in clone for f in c.findings}
    assert flags[("s1", "yes")] is True
    assert flags[("s7", "yes")] is False


def test_load_cases_reports_malformed_lines():
    with pytest.raises(FormatError, match="line 2"):
        load_cases('{"findings": [], "diagnoses": []}\nnot json\n')
    with pytest.raises(FormatError):
        load_cases("")


# ----------------------------------------------------------------------
# scale-wide property: totals are order-consistent


@given(st.lists(st.sampled_from(SCALE), min_size=1, max_size=6))
def test_any_category_combination_yields_integer_totals(categories):
    rb = ScoreRuleBase([rule(f"f{i}", "d", c)
                        for i, c in enumerate(categories)])
    results = infer(rb, [Finding(f"f{i}", "yes")
                         for i in range(len(categories))])
    assert results["d"].total == sum(category_value(c) for c in categories)
    assert results["d"].status is Thresholds().status(results["d"].total)
