"""Estimator-style facade over the mining, scoring and neural cores.

The domain modules keep their natural vocabulary (datasets, rule bases,
sessions); these wrappers adapt the three batch learners to the
``fit`` / ``predict`` / ``get_params`` convention so they drop into
pipelines, grid searches and cross-validation utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from . import mining, scoring, tabular
from .errors import ConfigError, NotFittedError, ValidationError
from .neural.fcn import FcnModel
from .neural.series import z_normalize_batch

_MEASURES = {
    "ps": mining.ps,
    "binomial": mining.binomial,
    "chi2": mining.chi_squared,
    "mean": mining.mean_shift,
}


def _resolve_measure(name: str, min_size: int) -> mining.Measure:
    if name == "gain":
        return mining.gain(min_size)
    try:
        return _MEASURES[name]()
    except KeyError:
        raise ConfigError(f"unknown measure {name!r}") from None


def _check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} must be fitted first")


def _as_object_matrix(X) -> np.ndarray:
    matrix = np.asarray(X, dtype=object)
    if matrix.ndim != 2:
        raise ValidationError("X must be a 2-d array-like")
    return matrix


class SubgroupMiner(TransformerMixin, BaseEstimator):
    """Top-k subgroup discovery as a transformer.

    ``fit`` mines the top patterns for the configured quality measure;
    ``transform`` maps rows to a boolean membership matrix with one
    column per discovered pattern.  Numeric feature columns are binned
    with edges learned during ``fit``.
    """

    def __init__(self, measure: str = "ps", k: int = 5, max_depth: int = 3,
                 min_size: int = 1, bins: int = 5,
                 strategy: str = tabular.EQUAL_WIDTH,
                 feature_names: tuple[str, ...] | None = None):
        self.measure = measure
        self.k = k
        self.max_depth = max_depth
        self.min_size = min_size
        self.bins = bins
        self.strategy = strategy
        self.feature_names = feature_names

    def _column_values(self, matrix: np.ndarray, index: int) -> list:
        return [cell for cell in matrix[:, index]]

    def _build_dataset(self, X, y=None) -> tabular.Dataset:
        matrix = _as_object_matrix(X)
        names = self.feature_names_in_
        columns: dict[str, list] = {}
        kinds: dict[str, str] = {}
        for index, name in enumerate(names):
            raw = self._column_values(matrix, index)
            if name in self.edges_:
                edges = self.edges_[name]
                columns[name] = [tabular.apply_edges(float(v), edges)
                                 for v in raw]
            else:
                columns[name] = [tabular.MISSING if v is None else str(v)
                                 for v in raw]
            kinds[name] = tabular.NOMINAL
        binary = numeric = None
        if y is not None:
            labels = list(y)
            if all(isinstance(v, (bool, np.bool_)) or v in (0, 1)
                   for v in labels):
                binary = ("target", [bool(v) for v in labels])
            else:
                numeric = ("target", [float(v) for v in labels])
        return tabular.Dataset(columns, kinds, binary_target=binary,
                               numeric_target=numeric)

    def fit(self, X, y):
        matrix = _as_object_matrix(X)
        if self.feature_names is not None:
            if len(self.feature_names) != matrix.shape[1]:
                raise ValidationError(
                    f"feature_names has {len(self.feature_names)} entries "
                    f"for {matrix.shape[1]} columns")
            names = tuple(self.feature_names)
        else:
            names = tuple(f"f{i}" for i in range(matrix.shape[1]))
        self.feature_names_in_ = names
        # numeric columns get fit-time bin edges
        self.edges_ = {}
        for index, name in enumerate(names):
            raw = self._column_values(matrix, index)
            if all(isinstance(v, (int, float, np.integer, np.floating))
                   and not isinstance(v, bool) for v in raw):
                self.edges_[name] = tabular.interval_edges(
                    [float(v) for v in raw], self.bins, self.strategy,
                    name=name)
        dataset = self._build_dataset(X, y)
        task = mining.MiningTask(
            dataset, _resolve_measure(self.measure, self.min_size),
            k=self.k, max_depth=self.max_depth, min_size=self.min_size)
        self.results_ = mining.discover_top_k(task)
        self.patterns_ = [r.pattern for r in self.results_]
        return self

    def transform(self, X) -> np.ndarray:
        _check_fitted(self, "results_")
        dataset = self._build_dataset(X)
        out = np.zeros((dataset.N, len(self.patterns_)), dtype=bool)
        for row_index, row in enumerate(dataset.rows()):
            for column_index, pattern in enumerate(self.patterns_):
                out[row_index, column_index] = all(
                    tabular.matches(s, row) for s in pattern.selectors)
        return out

    def report(self) -> list[dict]:
        _check_fitted(self, "results_")
        return [r.to_report() for r in self.results_]


class FcnClassifier(ClassifierMixin, BaseEstimator):
    """Binary anomaly classifier around the convolutional network.

    Rows are z-normalized independently; class 0 is anomalous.
    """

    def __init__(self, filters: tuple[int, int, int] = (32, 64, 32),
                 kernels: tuple[int, int, int] = (8, 5, 3),
                 strides: tuple[int, int, int] = (1, 1, 1),
                 epochs: int = 30, batch_size: int = 16,
                 learning_rate: float = 3e-3, seed: int = 0):
        self.filters = filters
        self.kernels = kernels
        self.strides = strides
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        series = z_normalize_batch(np.asarray(X, dtype=np.float64))
        labels = np.asarray(y, dtype=np.int64)
        self.model_ = FcnModel(series.shape[1], filters=self.filters,
                               kernels=self.kernels, strides=self.strides,
                               seed=self.seed)
        self.history_ = self.model_.train(
            series, labels, epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate)
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        _check_fitted(self, "model_")
        series = z_normalize_batch(np.asarray(X, dtype=np.float64))
        return self.model_.predict_proba(series)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)


class ScoreSystemLearner(BaseEstimator):
    """Score-rule learning over diagnosis cases.

    ``fit`` takes a sequence of :class:`~diagnostica.scoring.Case`
    objects (their diagnoses are the labels); ``predict`` returns the
    established diagnoses per case, ``score`` the pooled per-diagnosis
    accuracy that the fold evaluation uses.
    """

    def __init__(self, tau: float = 0.5, significance: float = 0.05,
                 prune_abnormality: bool = False,
                 prune_partition: bool = False,
                 prune_heuristic: bool = False,
                 attribute_classes: dict | None = None,
                 diagnosis_classes: dict | None = None,
                 refine_epochs: int = 0):
        self.tau = tau
        self.significance = significance
        self.prune_abnormality = prune_abnormality
        self.prune_partition = prune_partition
        self.prune_heuristic = prune_heuristic
        self.attribute_classes = attribute_classes
        self.diagnosis_classes = diagnosis_classes
        self.refine_epochs = refine_epochs

    def fit(self, X, y=None):
        cases = list(X)
        rule_base = scoring.learn_scores(cases, tau=self.tau,
                                         significance=self.significance)
        options = scoring.PruneOptions(
            abnormality=self.prune_abnormality,
            partition=self.prune_partition,
            heuristic=self.prune_heuristic)
        if self.prune_abnormality or self.prune_partition or \
                self.prune_heuristic:
            rule_base = scoring.prune(
                rule_base, options,
                attribute_classes=self.attribute_classes,
                diagnosis_classes=self.diagnosis_classes)
        self.epochs_used_ = 0
        if self.refine_epochs:
            rule_base, self.epochs_used_ = scoring.refine_perceptron(
                rule_base, cases, max_epochs=self.refine_epochs)
        self.rule_base_ = rule_base
        return self

    def predict(self, X) -> list[set[str]]:
        _check_fitted(self, "rule_base_")
        out = []
        for case in X:
            results = scoring.infer(self.rule_base_, case.findings)
            out.append({diagnosis for diagnosis, result in results.items()
                        if result.status is scoring.Status.ESTABLISHED})
        return out

    def score(self, X, y=None) -> float:
        _check_fitted(self, "rule_base_")
        cases = list(X)
        universe = self.rule_base_.diagnoses()
        if not universe or not cases:
            return 0.0
        predicted = self.predict(cases)
        hits = total = 0
        for case, established in zip(cases, predicted):
            labels = set(case.diagnoses)
            for diagnosis in universe:
                total += 1
                hits += (diagnosis in established) == \
                    (diagnosis in labels)
        return hits / total
