"""Exact top-k subgroup discovery on nominal datasets.

Qualities come from the classic ``n_p^e * (share_p - share_0)`` family
(``e`` = 1 Piatetsky-Shapiro, 0.5 binomial, 0 relative gain), a
chi-square test statistic on the 2x2 contingency table, or a mean-shift
variant for numeric targets.  The search is a depth-first traversal of
the selector lattice with admissible optimistic-estimate pruning, so its
ranking is identical to exhaustive enumeration.

Share differences are computed with integer numerators, which keeps
``q = 0`` exact whenever a subgroup share equals the dataset share.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, SchemaError, UndefinedQualityError
from .tabular import Dataset, Pattern, Selector, cover_indices

PS = "ps"
BINOMIAL = "binomial"
GAIN = "gain"
CHI2 = "chi2"
MEAN = "mean"

#: measure kind -> exponent of the n_p^e factor (None: not share-based)
_EXPONENTS = {PS: 1.0, BINOMIAL: 0.5, GAIN: 0.0, MEAN: 1.0}


@dataclass(frozen=True)
class Measure:
    """Quality-measure selection plus measure-level parameters."""

    kind: str
    min_size: int = 1  # only consulted by gain

    def __post_init__(self):
        if self.kind not in (PS, BINOMIAL, GAIN, CHI2, MEAN):
            raise ConfigError(f"unknown quality measure {self.kind!r}")
        if self.min_size < 1:
            raise ConfigError("measure min_size must be >= 1")
        if self.kind == GAIN and self.min_size < 1:
            raise ConfigError("gain requires min_size >= 1")


def ps() -> Measure:
    return Measure(PS)


def binomial() -> Measure:
    return Measure(BINOMIAL)


def gain(min_size: int) -> Measure:
    if min_size < 1:
        raise ConfigError("gain requires min_size >= 1")
    return Measure(GAIN, min_size=min_size)


def chi_squared() -> Measure:
    return Measure(CHI2)


def mean_shift() -> Measure:
    return Measure(MEAN)


@dataclass(frozen=True)
class SubgroupStats:
    """Counts describing one subgroup against its dataset.

    For binary targets ``positives_p``/``positives_total`` are set; for
    numeric targets ``target_sum``/``target_total`` and ``max_target``
    are set.  Shares and means are derived, so constructing stats from
    integer counts keeps share differences exact.
    """

    n_p: int
    N: int
    positives_p: int | None = None
    positives_total: int | None = None
    target_sum: float | None = None
    target_total: float | None = None
    max_target: float | None = None

    @property
    def t_p(self) -> float:
        return self.positives_p / self.n_p

    @property
    def t_0(self) -> float:
        return self.positives_total / self.N

    @property
    def mu_p(self) -> float:
        return self.target_sum / self.n_p

    @property
    def mu_0(self) -> float:
        return self.target_total / self.N


def quality(stats: SubgroupStats, measure: Measure) -> float | None:
    """Quality of a subgroup; ``None`` marks a gain subgroup below min_size.

    Raises :class:`UndefinedQualityError` for an empty cover.
    """
    if stats.n_p < 1:
        raise UndefinedQualityError("quality needs a non-empty cover")
    if measure.kind == CHI2:
        return chi_square(stats)[0]
    if measure.kind == MEAN:
        if stats.target_sum is None or stats.target_total is None:
            raise ConfigError("mean-shift quality needs a numeric target")
        # n_p^1 * (mu_p - mu_0) with a common denominator for exact zeros
        return (stats.target_sum * stats.N
                - stats.n_p * stats.target_total) / stats.N
    if stats.positives_p is None or stats.positives_total is None:
        raise ConfigError(f"{measure.kind} quality needs a binary target")
    if measure.kind == GAIN and stats.n_p < measure.min_size:
        return None  # filtered out, not an error
    e = _EXPONENTS[measure.kind]
    # integer numerator of (t_p - t_0); zero share difference stays exact
    numerator = stats.positives_p * stats.N - stats.n_p * stats.positives_total
    if e == 1.0:
        return numerator / stats.N
    if e == 0.5:
        return math.sqrt(stats.n_p) * numerator / (stats.n_p * stats.N)
    return numerator / (stats.n_p * stats.N)


def chi_square(stats: SubgroupStats) -> tuple[float, float]:
    """Chi-square statistic and p-value of the 2x2 subgroup table.

    One degree of freedom; the p-value uses the closed form
    ``erfc(sqrt(stat / 2))``.  Any zero margin yields ``(0.0, 1.0)``.
    """
    if stats.n_p < 1:
        raise UndefinedQualityError("chi-square needs a non-empty cover")
    if stats.positives_p is None or stats.positives_total is None:
        raise ConfigError("chi-square needs a binary target")
    a = stats.positives_p
    b = stats.n_p - a
    c = stats.positives_total - a
    d = stats.N - stats.n_p - c
    r1, r2 = a + b, c + d
    c1, c2 = a + c, b + d
    if 0 in (r1, r2, c1, c2):
        return 0.0, 1.0
    statistic = stats.N * (a * d - b * c) ** 2 / (r1 * r2 * c1 * c2)
    return statistic, math.erfc(math.sqrt(statistic / 2.0))


def optimistic_estimate(stats: SubgroupStats, measure: Measure) -> float:
    """Admissible upper bound on the quality of all refinements.

    For the share-based family the best imaginable refinement keeps
    every positive row and drops the rest.  The bound is evaluated
    through :func:`quality` on that idealized subgroup rather than as
    ``positives_p^e * (1 - t_0)``: both spellings agree exactly in real
    arithmetic, but only the former is guaranteed to round to the same
    float as an achievable tying refinement, which the strict-less
    pruning test relies on.  The chi-square statistic never exceeds N,
    and a mean-shift refinement cannot beat moving every covered row to
    the dataset maximum.
    """
    if measure.kind == CHI2:
        return float(stats.N)
    if measure.kind == MEAN:
        return stats.n_p * max(0.0, stats.max_target - stats.mu_0)
    if measure.kind == GAIN and stats.n_p < measure.min_size:
        return -math.inf  # no refinement can reach the size floor
    if stats.positives_p == 0:
        # every refinement keeps t_p = 0; its quality never exceeds the
        # current one (and is negative for gain)
        return quality(stats, measure) if measure.kind == GAIN else 0.0
    ideal_n = stats.positives_p
    if measure.kind == GAIN:
        ideal_n = max(ideal_n, measure.min_size)
    ideal = SubgroupStats(n_p=ideal_n, N=stats.N,
                          positives_p=stats.positives_p,
                          positives_total=stats.positives_total)
    return quality(ideal, measure)


@dataclass(frozen=True)
class MiningTask:
    """Everything :func:`discover_top_k` needs to run one search."""

    dataset: Dataset
    measure: Measure
    k: int
    max_depth: int
    min_size: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_size < 1:
            raise ConfigError("min_size must be >= 1")
        numeric = self.measure.kind == MEAN
        if numeric and self.dataset.numeric_target_name is None:
            raise ConfigError("mean-shift mining needs a numeric target")
        if not numeric and self.dataset.binary_target_name is None:
            raise ConfigError(
                f"{self.measure.kind} mining needs a binary target")


@dataclass(frozen=True)
class RankedPattern:
    """One result row of a top-k search."""

    pattern: Pattern
    quality: float
    stats: SubgroupStats
    p_value: float | None = None

    def to_report(self) -> dict:
        report = {
            "selectors": [str(s) for s in self.pattern.selectors],
            "n_p": self.stats.n_p,
            "quality": self.quality,
        }
        if self.stats.positives_p is not None:
            report["t_p"] = self.stats.t_p
        if self.stats.target_sum is not None:
            report["mu_p"] = self.stats.mu_p
        if self.p_value is not None:
            report["p_value"] = self.p_value
        return report


def discover_top_k(task: MiningTask) -> list[RankedPattern]:
    """Exact top-k subgroups, ranked like exhaustive enumeration.

    Candidates are non-empty conjunctions of up to ``max_depth``
    selectors over distinct nominal attributes.  Results are sorted by
    quality descending with ties broken by shorter pattern first, then
    lexicographic (attribute, value) order.  Subgroups whose size falls
    below the floor (task ``min_size``, and the measure's own
    ``min_size`` for gain) never qualify; since size is anti-monotone,
    their refinements are pruned wholesale.
    """
    dataset = task.dataset
    measure = task.measure
    numeric = measure.kind == MEAN
    floor = max(task.min_size,
                measure.min_size if measure.kind == GAIN else 1)

    selectors: list[Selector] = []
    for attribute in sorted(dataset.nominal_attributes()):
        for value in dataset.domain(attribute):
            selectors.append(Selector(attribute, value))
    covers = [dataset.selector_cover(s) for s in selectors]

    if numeric:
        values = dataset.target_values()
        target_total = math.fsum(values)
        max_target = max(values)
        target_bits = None
    else:
        target_bits = dataset.target_bits()
        positives_total = target_bits.bit_count()

    def stats_for(bits: int) -> SubgroupStats:
        n_p = bits.bit_count()
        if numeric:
            covered = math.fsum(values[i] for i in cover_indices(bits))
            return SubgroupStats(n_p=n_p, N=dataset.N, target_sum=covered,
                                 target_total=target_total,
                                 max_target=max_target)
        return SubgroupStats(n_p=n_p, N=dataset.N,
                             positives_p=(bits & target_bits).bit_count(),
                             positives_total=positives_total)

    # pool of best-so-far, ordered by (-quality, length, selector key)
    pool: list[tuple[tuple, RankedPattern]] = []

    def worst_kept() -> float | None:
        if len(pool) < task.k:
            return None
        return -pool[-1][0][0]

    def consider(sels: tuple[Selector, ...], stats: SubgroupStats) -> None:
        if measure.kind == CHI2:
            q, p_value = chi_square(stats)
        else:
            q, p_value = quality(stats, measure), None
        if q is None:
            return
        ranked = RankedPattern(Pattern(sels), q, stats, p_value)
        key = (-q, len(sels), tuple((s.attribute, s.value) for s in sels))
        bisect.insort(pool, (key, ranked), key=lambda item: item[0])
        if len(pool) > task.k:
            pool.pop()

    def descend(start: int, sels: tuple[Selector, ...], bits: int) -> None:
        for i in range(start, len(selectors)):
            selector = selectors[i]
            if any(s.attribute == selector.attribute for s in sels):
                continue
            refined = bits & covers[i]
            n_p = refined.bit_count()
            if n_p < floor:
                continue  # size is anti-monotone: skip the whole subtree
            stats = stats_for(refined)
            consider(sels + (selector,), stats)
            if len(sels) + 1 < task.max_depth:
                worst = worst_kept()
                if worst is not None and \
                        optimistic_estimate(stats, measure) < worst:
                    continue  # no refinement can enter the pool
                descend(i + 1, sels + (selector,), refined)

    descend(0, (), dataset.full_cover)
    return [ranked for _, ranked in pool]
