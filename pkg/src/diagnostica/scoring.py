"""Diagnostic scoring systems: symbolic categories, learning, refinement.

A scoring rule ties one finding (attribute = value) to one diagnosis
with a confirmation category from the symmetric eight-step scale
N4..N1, P1..P4.  Category values grow by a factor of four so that four
equal categories together reach exactly the next higher one; a total of
64 establishes a diagnosis, 16 makes it possible, -16 excludes it.

Rule bases can be learned from labeled cases via the phi coefficient on
2x2 contingency tables (gated by a chi-square significance test),
shrunk by knowledge-based pruning, and post-fitted by a perceptron-like
pass that moves miscalibrated rules one category step at a time.
"""

from __future__ import annotations

import enum
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

from . import mining
from .errors import ConfigError, FormatError, ValidationError
from .mining import MiningTask, RankedPattern, SubgroupStats, discover_top_k
from .tabular import MISSING, Dataset


class Category(enum.Enum):
    N4 = "N4"
    N3 = "N3"
    N2 = "N2"
    N1 = "N1"
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"


#: N4..P4 in ascending order; perceptron steps move along this scale.
SCALE: tuple[Category, ...] = tuple(Category)

CATEGORY_VALUES: Mapping[Category, int] = {
    Category.N4: -64, Category.N3: -16, Category.N2: -4, Category.N1: -1,
    Category.P1: 1, Category.P2: 4, Category.P3: 16, Category.P4: 64,
}


def category_value(category: Category) -> int:
    return CATEGORY_VALUES[category]


def step_category(category: Category, direction: int) -> Category:
    """One scale step up (+1) or down (-1), clamped at N4/P4.

    Between N1 and P1 the step crosses zero directly; there is no
    neutral category.
    """
    index = SCALE.index(category) + direction
    index = max(0, min(len(SCALE) - 1, index))
    return SCALE[index]


class Status(enum.Enum):
    ESTABLISHED = "established"
    POSSIBLE = "possible"
    UNCLEAR = "unclear"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class Finding:
    """One observed attribute value; identity ignores the abnormal flag."""

    attribute: str
    value: str
    abnormal: bool = field(default=False, compare=False)

    @property
    def key(self) -> tuple[str, str]:
        return (self.attribute, self.value)


@dataclass(frozen=True)
class Diagnosis:
    id: str
    partition_class: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Case:
    findings: frozenset[Finding]
    diagnoses: frozenset[str]

    @staticmethod
    def of(findings: Iterable[Finding], diagnoses: Iterable[str]) -> "Case":
        return Case(frozenset(findings), frozenset(diagnoses))

    def finding_keys(self) -> frozenset[tuple[str, str]]:
        return frozenset(f.key for f in self.findings)


@dataclass(frozen=True)
class ScoreRule:
    finding: Finding
    diagnosis: str
    category: Category


@dataclass(frozen=True)
class Thresholds:
    possible_at: int = 16
    established_at: int = 64

    def __post_init__(self):
        if not 0 < self.possible_at < self.established_at:
            raise ConfigError(
                "thresholds must satisfy 0 < possible_at < established_at")

    def status(self, total: int) -> Status:
        if total >= self.established_at:
            return Status.ESTABLISHED
        if total >= self.possible_at:
            return Status.POSSIBLE
        if total <= -self.possible_at:
            return Status.EXCLUDED
        return Status.UNCLEAR


@dataclass(frozen=True)
class InferenceResult:
    total: int
    status: Status
    fired: tuple[ScoreRule, ...]


class ScoreRuleBase:
    """Immutable set of scoring rules with shared status thresholds."""

    def __init__(self, rules: Iterable[ScoreRule],
                 thresholds: Thresholds = Thresholds()):
        self.rules: tuple[ScoreRule, ...] = tuple(rules)
        self.thresholds = thresholds
        seen = set()
        for rule in self.rules:
            key = (rule.finding.key, rule.diagnosis)
            if key in seen:
                raise ValidationError(
                    f"duplicate rule for finding {rule.finding.key} and "
                    f"diagnosis {rule.diagnosis!r}")
            seen.add(key)

    def diagnoses(self) -> tuple[str, ...]:
        return tuple(sorted({r.diagnosis for r in self.rules}))

    def rules_for(self, diagnosis: str) -> tuple[ScoreRule, ...]:
        return tuple(r for r in self.rules if r.diagnosis == diagnosis)

    def replace_categories(
            self, categories: Mapping[tuple[tuple[str, str], str], Category]
    ) -> "ScoreRuleBase":
        rules = [ScoreRule(r.finding, r.diagnosis,
                           categories.get((r.finding.key, r.diagnosis),
                                          r.category))
                 for r in self.rules]
        return ScoreRuleBase(rules, self.thresholds)

    # ------------------------------------------------------------------
    # JSON round trip

    def to_json(self) -> dict:
        return {
            "rules": [{
                "attribute": r.finding.attribute,
                "value": r.finding.value,
                "abnormal": r.finding.abnormal,
                "diagnosis": r.diagnosis,
                "category": r.category.value,
            } for r in self.rules],
            "thresholds": {
                "possible": self.thresholds.possible_at,
                "established": self.thresholds.established_at,
            },
        }

    @staticmethod
    def from_json(payload: dict) -> "ScoreRuleBase":
        try:
            thresholds = Thresholds(
                possible_at=payload["thresholds"]["possible"],
                established_at=payload["thresholds"]["established"])
            rules = [
                ScoreRule(Finding(raw["attribute"], raw["value"],
                                  bool(raw.get("abnormal", False))),
                          raw["diagnosis"], Category(raw["category"]))
                for raw in payload["rules"]]
        except (KeyError, TypeError, ValueError) as err:
            raise FormatError(f"malformed rule base: {err}") from None
        return ScoreRuleBase(rules, thresholds)


def infer(rule_base: ScoreRuleBase,
          findings: Iterable[Finding]) -> dict[str, InferenceResult]:
    """Scores and status for every diagnosis of the rule base."""
    present = {f.key for f in findings}
    totals: dict[str, int] = {d: 0 for d in rule_base.diagnoses()}
    fired: dict[str, list[ScoreRule]] = {d: [] for d in totals}
    for rule in rule_base.rules:
        if rule.finding.key in present:
            totals[rule.diagnosis] += category_value(rule.category)
            fired[rule.diagnosis].append(rule)
    return {d: InferenceResult(totals[d], rule_base.thresholds.status(
        totals[d]), tuple(fired[d])) for d in totals}


# ----------------------------------------------------------------------
# learning


@dataclass(frozen=True)
class MappingTable:
    """Maps rule precision (or false-positive rate) to a category.

    Each side lists ascending ``(threshold, category)`` steps; a value
    gets the category of the highest threshold it reaches and the first
    category below the first threshold, so the table is total.
    """

    positive: tuple[tuple[float, Category], ...] = (
        (0.5, Category.P1), (0.7, Category.P2),
        (0.85, Category.P3), (0.95, Category.P4))
    negative: tuple[tuple[float, Category], ...] = (
        (0.5, Category.N1), (0.7, Category.N2),
        (0.85, Category.N3), (0.95, Category.N4))

    def __post_init__(self):
        for side, sign in ((self.positive, 1), (self.negative, -1)):
            if not side:
                raise ConfigError("mapping table sides must be non-empty")
            thresholds = [t for t, _ in side]
            if sorted(set(thresholds)) != thresholds:
                raise ConfigError(
                    "mapping thresholds must be strictly increasing")
            for _, category in side:
                if sign * category_value(category) <= 0:
                    raise ConfigError(
                        f"category {category} on the wrong mapping side")

    @staticmethod
    def _lookup(side, value: float) -> Category:
        chosen = side[0][1]
        for threshold, category in side:
            if value >= threshold:
                chosen = category
        return chosen

    def positive_category(self, precision: float) -> Category:
        return self._lookup(self.positive, precision)

    def negative_category(self, false_positive_rate: float) -> Category:
        return self._lookup(self.negative, false_positive_rate)


def phi_coefficient(a: int, b: int, c: int, d: int) -> float | None:
    """Phi over the 2x2 table; ``None`` when a margin is empty."""
    denominator = (a + b) * (c + d) * (a + c) * (b + d)
    if denominator == 0:
        return None
    return (a * d - b * c) / math.sqrt(denominator)


def learn_scores(cases: Sequence[Case], tau: float = 0.5,
                 significance: float = 0.05,
                 mapping: MappingTable = MappingTable(),
                 thresholds: Thresholds = Thresholds()) -> ScoreRuleBase:
    """Learn one rule per sufficiently correlated (finding, diagnosis) pair.

    A pair qualifies when |phi| >= tau and its 2x2 chi-square test is
    significant at ``significance``.  Positive correlations map rule
    precision to a positive category, negative ones map the false
    positive rate to a negative category.
    """
    if not cases:
        raise ConfigError("learning needs at least one case")
    if not 0 <= tau <= 1:
        raise ConfigError("tau must lie in [0, 1]")
    finding_universe: dict[tuple[str, str], Finding] = {}
    for case in cases:
        for finding in case.findings:
            finding_universe.setdefault(finding.key, finding)
    diagnosis_universe = sorted({d for case in cases for d in case.diagnoses})

    n = len(cases)
    rules = []
    for key in sorted(finding_universe):
        with_f = [case for case in cases if key in case.finding_keys()]
        for diagnosis in diagnosis_universe:
            a = sum(1 for case in with_f if diagnosis in case.diagnoses)
            b = len(with_f) - a
            labeled = sum(1 for case in cases if diagnosis in case.diagnoses)
            c = labeled - a
            d = n - len(with_f) - c
            phi = phi_coefficient(a, b, c, d)
            if phi is None or abs(phi) < tau:
                continue
            stats = SubgroupStats(n_p=len(with_f), N=n, positives_p=a,
                                  positives_total=labeled)
            if mining.chi_square(stats)[1] >= significance:
                continue
            if phi > 0:
                category = mapping.positive_category(a / (a + b))
            else:
                category = mapping.negative_category(b / (b + d))
            rules.append(ScoreRule(finding_universe[key], diagnosis,
                                   category))
    return ScoreRuleBase(rules, thresholds)


# ----------------------------------------------------------------------
# pruning


@dataclass(frozen=True)
class PruneOptions:
    abnormality: bool = False
    partition: bool = False
    heuristic: bool = False


def prune(rule_base: ScoreRuleBase, options: PruneOptions,
          attribute_classes: Mapping[str, str] | None = None,
          diagnosis_classes: Mapping[str, str] | None = None
          ) -> ScoreRuleBase:
    """Drop rules contradicting domain knowledge.

    abnormality: only abnormal findings may carry rules.  partition:
    finding and diagnosis must sit in the same partition class when both
    classes are known.  heuristic: a diagnosis supported by exclusively
    negative categories loses all its rules.
    """
    attribute_classes = attribute_classes or {}
    diagnosis_classes = diagnosis_classes or {}
    kept = []
    for rule in rule_base.rules:
        if options.abnormality and not rule.finding.abnormal:
            continue
        if options.partition:
            finding_class = attribute_classes.get(rule.finding.attribute)
            diagnosis_class = diagnosis_classes.get(rule.diagnosis)
            if (finding_class is not None and diagnosis_class is not None
                    and finding_class != diagnosis_class):
                continue
        kept.append(rule)
    if options.heuristic:
        by_diagnosis: dict[str, list[ScoreRule]] = {}
        for rule in kept:
            by_diagnosis.setdefault(rule.diagnosis, []).append(rule)
        doomed = {d for d, rules in by_diagnosis.items()
                  if all(category_value(r.category) < 0 for r in rules)}
        kept = [r for r in kept if r.diagnosis not in doomed]
    return ScoreRuleBase(kept, rule_base.thresholds)


# ----------------------------------------------------------------------
# perceptron-style refinement


def refine_perceptron(rule_base: ScoreRuleBase, cases: Sequence[Case],
                      max_epochs: int = 10) -> tuple[ScoreRuleBase, int]:
    """Move fired rules one category step whenever a case disagrees.

    Cases are visited in order, diagnoses per case in id order; a false
    negative steps every fired rule of the diagnosis up, a false
    positive steps them down (clamped at N4/P4, crossing zero between
    N1 and P1).  Stops after the first epoch without changes.  Returns
    the refined rule base and the number of epochs run.
    """
    if max_epochs < 1:
        raise ConfigError("max_epochs must be >= 1")
    categories = {(r.finding.key, r.diagnosis): r.category
                  for r in rule_base.rules}
    current = rule_base
    epochs_used = 0
    for _ in range(max_epochs):
        epochs_used += 1
        changed = False
        for case in cases:
            results = infer(current, case.findings)
            labeled = set(case.diagnoses)
            established = {d for d, res in results.items()
                           if res.status is Status.ESTABLISHED}
            for diagnosis in sorted(labeled | established):
                if diagnosis not in results:
                    continue  # labeled diagnosis unknown to the rule base
                is_established = diagnosis in established
                if is_established == (diagnosis in labeled):
                    continue
                direction = 1 if diagnosis in labeled else -1
                for rule in results[diagnosis].fired:
                    key = (rule.finding.key, rule.diagnosis)
                    stepped = step_category(categories[key], direction)
                    if stepped is not categories[key]:
                        categories[key] = stepped
                        changed = True
            if changed:
                current = current.replace_categories(categories)
        if not changed:
            break
    return current, epochs_used


# ----------------------------------------------------------------------
# misclassification analysis


def misclassified(rule_base: ScoreRuleBase, case: Case) -> bool:
    """True when any labeled or established diagnosis disagrees."""
    results = infer(rule_base, case.findings)
    considered = set(case.diagnoses) | set(results)
    for diagnosis in considered:
        established = (diagnosis in results
                       and results[diagnosis].status is Status.ESTABLISHED)
        if established != (diagnosis in case.diagnoses):
            return True
    return False


def cases_to_dataset(cases: Sequence[Case],
                     labels: Sequence[bool]) -> Dataset:
    """One row per case, one nominal attribute per finding attribute."""
    attributes = sorted({f.attribute for case in cases
                         for f in case.findings})
    if not attributes:
        raise ConfigError("cases carry no findings to mine")
    columns: dict[str, list[str]] = {a: [] for a in attributes}
    for case in cases:
        by_attribute: dict[str, set[str]] = {}
        for finding in case.findings:
            by_attribute.setdefault(finding.attribute, set()).add(
                finding.value)
        for attribute in attributes:
            values = by_attribute.get(attribute)
            if values and len(values) == 1:
                columns[attribute].append(next(iter(values)))
            else:
                columns[attribute].append(MISSING)
    return Dataset(columns, dict.fromkeys(attributes, "nominal"),
                   binary_target=("misclassified", list(labels)))


def find_misclassification_patterns(
        rule_base: ScoreRuleBase, cases: Sequence[Case], k: int = 5,
        max_depth: int = 2, min_size: int = 1) -> list[RankedPattern]:
    """Top-k subgroups of cases the rule base gets wrong."""
    labels = [misclassified(rule_base, case) for case in cases]
    dataset = cases_to_dataset(cases, labels)
    task = MiningTask(dataset, mining.ps(), k=k, max_depth=max_depth,
                      min_size=min_size)
    return discover_top_k(task)


# ----------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class FoldMetrics:
    accuracy: float
    pairs: int
    rules_per_diagnosis: float
    rules_stddev: float
    attribute_values: int
    categories_per_diagnosis: float


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    rules_per_diagnosis: float
    rules_stddev: float
    attribute_values: float
    categories_per_diagnosis: float
    folds: tuple[FoldMetrics, ...]

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "rules_per_diagnosis": self.rules_per_diagnosis,
            "rules_stddev": self.rules_stddev,
            "attribute_values": self.attribute_values,
            "categories_per_diagnosis": self.categories_per_diagnosis,
            "folds": [vars(f) for f in self.folds],
        }


def evaluate(cases: Sequence[Case], folds: int = 10, tau: float = 0.5,
             significance: float = 0.05,
             prune_options: PruneOptions | None = None,
             attribute_classes: Mapping[str, str] | None = None,
             diagnosis_classes: Mapping[str, str] | None = None,
             refine_epochs: int = 0,
             thresholds: Thresholds = Thresholds()) -> EvaluationReport:
    """Sequential k-fold evaluation of the learning configuration.

    Folds are contiguous case blocks.  Accuracy counts, per test case
    and per diagnosis of the corpus, whether established-status matches
    the label; rule-base size metrics are averaged over folds.
    """
    if folds < 2:
        raise ConfigError("evaluation needs at least two folds")
    if folds > len(cases):
        raise ConfigError("more folds than cases")
    diagnosis_universe = sorted({d for case in cases for d in case.diagnoses})
    if not diagnosis_universe:
        raise ConfigError("no labeled diagnoses in the case corpus")

    bounds = [round(i * len(cases) / folds) for i in range(folds + 1)]
    fold_metrics = []
    hits = 0
    total_pairs = 0
    for i in range(folds):
        test = cases[bounds[i]:bounds[i + 1]]
        train = list(cases[:bounds[i]]) + list(cases[bounds[i + 1]:])
        rule_base = learn_scores(train, tau=tau, significance=significance,
                                 thresholds=thresholds)
        if prune_options is not None:
            rule_base = prune(rule_base, prune_options,
                              attribute_classes=attribute_classes,
                              diagnosis_classes=diagnosis_classes)
        if refine_epochs:
            rule_base, _ = refine_perceptron(rule_base, train,
                                             max_epochs=refine_epochs)
        fold_hits = 0
        for case in test:
            results = infer(rule_base, case.findings)
            for diagnosis in diagnosis_universe:
                established = (
                    diagnosis in results
                    and results[diagnosis].status is Status.ESTABLISHED)
                if established == (diagnosis in case.diagnoses):
                    fold_hits += 1
        pairs = len(test) * len(diagnosis_universe)
        per_diagnosis = [len(rule_base.rules_for(d))
                         for d in rule_base.diagnoses()] or [0]
        distinct_categories = [
            len({r.category for r in rule_base.rules_for(d)})
            for d in rule_base.diagnoses()] or [0]
        fold_metrics.append(FoldMetrics(
            accuracy=fold_hits / pairs if pairs else 1.0,
            pairs=pairs,
            rules_per_diagnosis=statistics.mean(per_diagnosis),
            rules_stddev=(statistics.pstdev(per_diagnosis)
                          if len(per_diagnosis) > 1 else 0.0),
            attribute_values=len({r.finding.key for r in rule_base.rules}),
            categories_per_diagnosis=statistics.mean(distinct_categories)))
        hits += fold_hits
        total_pairs += pairs

    return EvaluationReport(
        accuracy=hits / total_pairs,
        rules_per_diagnosis=statistics.mean(
            f.rules_per_diagnosis for f in fold_metrics),
        rules_stddev=statistics.mean(f.rules_stddev for f in fold_metrics),
        attribute_values=statistics.mean(
            f.attribute_values for f in fold_metrics),
        categories_per_diagnosis=statistics.mean(
            f.categories_per_diagnosis for f in fold_metrics),
        folds=tuple(fold_metrics))


# ----------------------------------------------------------------------
# case serialization (JSONL)


def load_cases(source: TextIO | Iterable[str] | str) -> list[Case]:
    """Parse one case per JSONL line."""
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source
    cases = []
    for index, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            payload = json.loads(line)
            findings = [Finding(f["attribute"], f["value"],
                                bool(f.get("abnormal", False)))
                        for f in payload["findings"]]
            diagnoses = [str(d) for d in payload["diagnoses"]]
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise FormatError(f"line {index}: malformed case: {err}") \
                from None
        cases.append(Case.of(findings, diagnoses))
    if not cases:
        raise FormatError("no cases in input")
    return cases


def dump_cases(cases: Iterable[Case]) -> str:
    lines = []
    for case in cases:
        lines.append(json.dumps({
            "findings": [{"attribute": f.attribute, "value": f.value,
                          "abnormal": f.abnormal}
                         for f in sorted(case.findings,
                                         key=lambda f: f.key)],
            "diagnoses": sorted(case.diagnoses),
        }))
    return "\n".join(lines) + "\n"
