"""Guided diagnosis sessions as an explicit state machine.

A session walks a fixed circuit: read trouble codes, pull the suspect
components for each code from the knowledge graph, classify suspects
one by one (oscilloscope recordings through the neural classifier,
everything else through manual inspection), then expand the suspicion
frontier along ``affected_by`` edges until no unexamined component is
implicated.  The machine finishes by deriving root-cause-first fault
paths and persisting the whole session into the knowledge graph.

States that need external input (trouble codes, an oscillogram, a
manual verdict) pause the machine; everything else advances
automatically.  Transition legality is a module-level table so the
machine can never wander off the circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ProtocolError, ValidationError
from .kg import DTC_PATTERN, KnowledgeGraph
from .neural.cam import GRAD_CAM, compute_heatmap
from .neural.fcn import FcnModel
from .neural.series import z_normalize

READ_DTCS = "READ_DTCS"
RETRIEVE_KNOWLEDGE = "RETRIEVE_KNOWLEDGE"
SELECT_COMPONENT = "SELECT_COMPONENT"
RECORD_OSCILLOGRAM = "RECORD_OSCILLOGRAM"
CLASSIFY = "CLASSIFY"
AWAIT_MANUAL_RESULTS = "AWAIT_MANUAL_RESULTS"
EVALUATE = "EVALUATE"
ROOT_CAUSE_ANALYSIS = "ROOT_CAUSE_ANALYSIS"
SENSOR_HYPOTHESIS = "SENSOR_HYPOTHESIS"
FINALIZE = "FINALIZE"
DONE = "DONE"

STATES = (READ_DTCS, RETRIEVE_KNOWLEDGE, SELECT_COMPONENT,
          RECORD_OSCILLOGRAM, CLASSIFY, AWAIT_MANUAL_RESULTS, EVALUATE,
          ROOT_CAUSE_ANALYSIS, SENSOR_HYPOTHESIS, FINALIZE, DONE)

#: every transition the machine is allowed to take
TRANSITIONS: dict[str, frozenset] = {
    READ_DTCS: frozenset({RETRIEVE_KNOWLEDGE}),
    RETRIEVE_KNOWLEDGE: frozenset({SELECT_COMPONENT}),
    SELECT_COMPONENT: frozenset({RECORD_OSCILLOGRAM,
                                 AWAIT_MANUAL_RESULTS, EVALUATE}),
    RECORD_OSCILLOGRAM: frozenset({CLASSIFY}),
    CLASSIFY: frozenset({SELECT_COMPONENT}),
    AWAIT_MANUAL_RESULTS: frozenset({SELECT_COMPONENT}),
    EVALUATE: frozenset({ROOT_CAUSE_ANALYSIS, SENSOR_HYPOTHESIS}),
    ROOT_CAUSE_ANALYSIS: frozenset({SELECT_COMPONENT, FINALIZE}),
    SENSOR_HYPOTHESIS: frozenset({FINALIZE}),
    FINALIZE: frozenset({DONE}),
    DONE: frozenset(),
}

#: states that wait for input instead of advancing on their own
WAITING_STATES = frozenset({READ_DTCS, RECORD_OSCILLOGRAM,
                            AWAIT_MANUAL_RESULTS, DONE})


@dataclass
class ComponentResult:
    component: str
    anomaly: bool
    method: str  # "oscillogram" or "manual"
    classification_id: str
    uncertainty: float | None = None
    heatmap_id: str | None = None

    def to_json(self) -> dict:
        return {"component": self.component, "anomaly": self.anomaly,
                "method": self.method,
                "classification_id": self.classification_id,
                "uncertainty": self.uncertainty,
                "heatmap_id": self.heatmap_id}


@dataclass
class SessionReport:
    vin: str
    dtcs: list[str] = field(default_factory=list)
    results: list[ComponentResult] = field(default_factory=list)
    fault_paths: list[dict] = field(default_factory=list)
    sensor_hypothesis: bool = False
    warnings: list[str] = field(default_factory=list)
    log_id: str | None = None

    @property
    def anomalous(self) -> list[str]:
        return [r.component for r in self.results if r.anomaly]

    def to_json(self) -> dict:
        return {"vin": self.vin, "dtcs": list(self.dtcs),
                "results": [r.to_json() for r in self.results],
                "anomalous": self.anomalous,
                "fault_paths": list(self.fault_paths),
                "sensor_hypothesis": self.sensor_hypothesis,
                "warnings": list(self.warnings),
                "log_id": self.log_id}


def build_fault_paths(kg: KnowledgeGraph, anomalous) -> list[dict]:
    """Root-cause-first paths through the anomalous subgraph.

    ``affected_by`` points from a symptom component to its cause, so
    paths run against those edges: a root is an anomalous component not
    affected by any other anomalous one.  Rootless remainders are
    cycles; they are walked once starting at the lexicographically
    smallest member and flagged.
    """
    anomalous = set(anomalous)
    affects: dict[str, list[str]] = {name: [] for name in anomalous}
    causes: dict[str, list[str]] = {name: [] for name in anomalous}
    for name in sorted(anomalous):
        for cause in kg.query_affected_by(name):
            if cause in anomalous:
                affects[cause].append(name)
                causes[name].append(cause)
    paths: list[dict] = []
    covered: set[str] = set()

    def walk(start: str, forced_cycle: bool) -> None:
        def descend(node: str, trail: list[str]) -> None:
            onward = [n for n in sorted(affects[node]) if n not in trail]
            closes_cycle = any(n in trail for n in affects[node])
            if not onward:
                covered.update(trail)
                paths.append({"components": list(trail),
                              "cycle": forced_cycle or closes_cycle})
                return
            for nxt in onward:
                descend(nxt, trail + [nxt])

        descend(start, [start])

    for root in sorted(n for n in anomalous if not causes[n]):
        walk(root, forced_cycle=False)
    while covered != anomalous:
        walk(min(anomalous - covered), forced_cycle=True)
    return paths


class DiagnosisCircuit:
    """One vehicle diagnosis session against a knowledge graph."""

    def __init__(self, kg: KnowledgeGraph, vin: str,
                 vehicle_model: str = "unknown",
                 model: FcnModel | None = None, model_id: str = "fcn"):
        self.kg = kg
        self.vin = vin
        self.model = model
        self.model_id = model_id
        kg.extend_kg_with_vehicle(vehicle_model, vin)
        self.report = SessionReport(vin=vin)
        self.state = READ_DTCS
        self.history = [READ_DTCS]
        self._queue: list[tuple[str, tuple[str, str]]] = []
        self._seen: set[str] = set()
        self._current: tuple[str, tuple[str, str]] | None = None
        self._expanded: set[str] = set()
        self._anomaly_cls: dict[str, str] = {}
        self._pending: ComponentResult | None = None

    # ------------------------------------------------------------------
    # machine plumbing

    def _goto(self, state: str) -> None:
        if state not in TRANSITIONS[self.state]:
            raise ProtocolError(
                f"illegal transition {self.state} -> {state}")
        self.state = state
        self.history.append(state)

    def _require(self, state: str) -> None:
        if self.state != state:
            raise ProtocolError(
                f"operation requires state {state}, session is in "
                f"{self.state}")

    def _advance(self) -> None:
        while self.state not in WAITING_STATES:
            getattr(self, f"_run_{self.state.lower()}")()

    @property
    def current_component(self) -> str | None:
        return self._current[0] if self._current else None

    # ------------------------------------------------------------------
    # external inputs

    def submit_dtcs(self, codes) -> None:
        self._require(READ_DTCS)
        codes = list(codes)
        if not codes:
            raise ValidationError("at least one trouble code is required")
        for code in codes:
            if not DTC_PATTERN.match(str(code)):
                raise ValidationError(
                    f"malformed DTC {code!r}: expected a letter followed "
                    "by four digits")
        self.report.dtcs = codes
        self._goto(RETRIEVE_KNOWLEDGE)
        self._advance()

    def provide_oscillogram(self, values) -> None:
        self._require(RECORD_OSCILLOGRAM)
        component, reason = self._current
        normalized = z_normalize(values)
        proba = self.model.predict_proba(normalized)[0]
        predicted = int(proba.argmax())
        oscillogram_id = self.kg.record_oscillogram(
            [float(v) for v in values])
        classification_id = self.kg.record_classification(
            component, predicted == 0, reason=reason,
            oscillogram_id=oscillogram_id,
            uncertainty=float(1.0 - proba.max()),
            model_id=self.model_id)
        heatmap = compute_heatmap(self.model, normalized, GRAD_CAM,
                                  target_class=predicted)
        heatmap_id = self.kg.record_heatmap(
            classification_id, heatmap.method, heatmap.values)
        self._pending = ComponentResult(
            component, predicted == 0, "oscillogram", classification_id,
            uncertainty=float(1.0 - proba.max()), heatmap_id=heatmap_id)
        self._goto(CLASSIFY)
        self._advance()

    def provide_manual_result(self, anomaly: bool) -> None:
        self._require(AWAIT_MANUAL_RESULTS)
        component, reason = self._current
        classification_id = self.kg.record_classification(
            component, bool(anomaly), reason=reason)
        self._finish_component(ComponentResult(
            component, bool(anomaly), "manual", classification_id))
        self._goto(SELECT_COMPONENT)
        self._advance()

    # ------------------------------------------------------------------
    # automatic states

    def _run_retrieve_knowledge(self) -> None:
        for dtc in self.report.dtcs:
            suspects = self.kg.query_suspect_components_by_dtc(dtc)
            if not suspects:
                self.report.warnings.append(
                    f"no knowledge recorded for {dtc}")
                continue
            for component, _priority in suspects:
                association = self.kg.query_association_id(dtc, component)
                self._enqueue(component, ("association", association))
        self._goto(SELECT_COMPONENT)

    def _enqueue(self, component: str, reason: tuple[str, str]) -> None:
        if component in self._seen:
            return
        self._seen.add(component)
        self._queue.append((component, reason))

    def _run_select_component(self) -> None:
        if not self._queue:
            self._current = None
            self._goto(EVALUATE)
            return
        self._current = self._queue.pop(0)
        component = self._current[0]
        wants_scope = self.kg.query_use_oscilloscope(component)
        if wants_scope and self.model is None:
            self.report.warnings.append(
                f"{component} calls for an oscilloscope but no model is "
                "loaded; falling back to manual inspection")
            wants_scope = False
        self._goto(RECORD_OSCILLOGRAM if wants_scope
                   else AWAIT_MANUAL_RESULTS)

    def _run_classify(self) -> None:
        self._finish_component(self._pending)
        self._pending = None
        self._goto(SELECT_COMPONENT)

    def _finish_component(self, result: ComponentResult) -> None:
        self.report.results.append(result)
        if result.anomaly:
            self._anomaly_cls[result.component] = result.classification_id

    def _run_evaluate(self) -> None:
        self._goto(ROOT_CAUSE_ANALYSIS if self._anomaly_cls
                   else SENSOR_HYPOTHESIS)

    def _run_root_cause_analysis(self) -> None:
        added = False
        for result in self.report.results:
            component = result.component
            if not result.anomaly or component in self._expanded:
                continue
            self._expanded.add(component)
            for cause in self.kg.query_affected_by(component):
                if cause not in self._seen:
                    self._enqueue(
                        cause,
                        ("classification", self._anomaly_cls[component]))
                    added = True
        self._goto(SELECT_COMPONENT if added else FINALIZE)

    def _run_sensor_hypothesis(self) -> None:
        # every suspect checked out fine, so suspect the signal source
        # itself; this stays a session-level hint and is deliberately
        # not persisted as a component classification
        self.report.sensor_hypothesis = True
        self.report.warnings.append(
            "no anomaly found among suspect components; the sensor "
            "reporting " + ", ".join(self.report.dtcs)
            + " may itself be faulty")
        self._goto(FINALIZE)

    def _run_finalize(self) -> None:
        path_ids = []
        if self._anomaly_cls:
            for path in build_fault_paths(self.kg, self._anomaly_cls):
                path_id = self.kg.record_fault_path(path["components"],
                                                    cycle=path["cycle"])
                path_ids.append(path_id)
                self.report.fault_paths.append(
                    {**path, "id": path_id})
        known = [dtc for dtc in self.report.dtcs
                 if self.kg.query_fault_context_by_dtc(dtc) is not None]
        self.report.log_id = self.kg.extend_kg_with_diag_log(
            known, self.vin,
            classification_ids=[r.classification_id
                                for r in self.report.results],
            fault_path_ids=path_ids)
        self._goto(DONE)
