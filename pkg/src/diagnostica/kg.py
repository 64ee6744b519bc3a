"""Typed in-process knowledge graph for vehicle fault diagnosis.

The graph holds expert knowledge (fault contexts keyed by DTC, suspect
components wired by ``affected_by``, component sets, subsystems) next to
acquired evidence (vehicles, oscillograms, classifications, heatmaps,
fault paths, diagnosis logs).  Every entity has a concept from a closed
set, attributes validated per concept, and relations validated against
a domain/range table.

The store is deliberately in-process: a single writer lock plus a
revision counter give the gateway consistent snapshots and cheap change
detection, and the line-oriented triple serialization keeps checkpoints
diffable.  Enhancer operations are idempotent, so replaying an
acquisition payload never duplicates knowledge.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import IntegrityError, ParseError, ValidationError

# ----------------------------------------------------------------------
# concepts and predicates

FAULT_CONTEXT = "FaultContext"
FAULT_CONDITION = "FaultCondition"
SYMPTOM = "Symptom"
SUSPECT_COMPONENT = "SuspectComponent"
DIAGNOSTIC_ASSOCIATION = "DiagnosticAssociation"
COMPONENT_SET = "ComponentSet"
SUBSYSTEM = "Subsystem"
VEHICLE = "Vehicle"
DIAG_LOG = "DiagLog"
CLASSIFICATION = "Classification"  # abstract
MANUAL_INSPECTION = "ManualInspection"
OSCILLOGRAM_CLASSIFICATION = "OscillogramClassification"
OSCILLOGRAM = "Oscillogram"
PARALLEL_REC_OSCILLOGRAM_SET = "ParallelRecOscillogramSet"
HEATMAP = "Heatmap"
FAULT_PATH = "FaultPath"

CONCEPTS = frozenset({
    FAULT_CONTEXT, FAULT_CONDITION, SYMPTOM, SUSPECT_COMPONENT,
    DIAGNOSTIC_ASSOCIATION, COMPONENT_SET, SUBSYSTEM, VEHICLE, DIAG_LOG,
    CLASSIFICATION, MANUAL_INSPECTION, OSCILLOGRAM_CLASSIFICATION,
    OSCILLOGRAM, PARALLEL_REC_OSCILLOGRAM_SET, HEATMAP, FAULT_PATH,
})

#: concrete subtypes of the abstract Classification concept
CLASSIFICATION_CONCEPTS = frozenset({MANUAL_INSPECTION,
                                     OSCILLOGRAM_CLASSIFICATION})

HAS_ASSOCIATION = "hasAssociation"
POINTS_TO = "pointsTo"
AFFECTED_BY = "affected_by"
CONTAINED_IN = "containedIn"
VERIFIED_BY = "verifiedBy"
MANIFESTED_BY = "manifestedBy"
REPRESENTS = "represents"
APPEARS_IN = "appearsIn"
CREATED_FOR = "createdFor"
ENTAILS = "entails"
REASON_FOR = "reasonFor"
LED_TO = "ledTo"
CLASSIFIES = "classifies"
PRODUCED_HEATMAP = "producedHeatmap"
RESULTED_IN = "resultedIn"
PART_OF = "partOf"
PATH_STEP = "pathStep"

#: predicate -> (allowed subject concepts, allowed object concepts)
PREDICATE_SCHEMA: Mapping[str, tuple[frozenset, frozenset]] = {
    HAS_ASSOCIATION: (frozenset({FAULT_CONTEXT}),
                      frozenset({DIAGNOSTIC_ASSOCIATION})),
    POINTS_TO: (frozenset({DIAGNOSTIC_ASSOCIATION}),
                frozenset({SUSPECT_COMPONENT})),
    AFFECTED_BY: (frozenset({SUSPECT_COMPONENT}),
                  frozenset({SUSPECT_COMPONENT})),
    CONTAINED_IN: (frozenset({SUSPECT_COMPONENT}),
                   frozenset({SUBSYSTEM, COMPONENT_SET})),
    VERIFIED_BY: (frozenset({COMPONENT_SET}),
                  frozenset({SUSPECT_COMPONENT})),
    MANIFESTED_BY: (frozenset({FAULT_CONDITION}), frozenset({SYMPTOM})),
    REPRESENTS: (frozenset({FAULT_CONTEXT}), frozenset({FAULT_CONDITION})),
    APPEARS_IN: (frozenset({FAULT_CONTEXT}), frozenset({DIAG_LOG})),
    CREATED_FOR: (frozenset({DIAG_LOG}), frozenset({VEHICLE})),
    ENTAILS: (frozenset({DIAG_LOG}),
              CLASSIFICATION_CONCEPTS | {FAULT_PATH}),
    REASON_FOR: (CLASSIFICATION_CONCEPTS, CLASSIFICATION_CONCEPTS),
    LED_TO: (frozenset({DIAGNOSTIC_ASSOCIATION}), CLASSIFICATION_CONCEPTS),
    CLASSIFIES: (frozenset({OSCILLOGRAM_CLASSIFICATION}),
                 frozenset({OSCILLOGRAM})),
    PRODUCED_HEATMAP: (frozenset({OSCILLOGRAM_CLASSIFICATION}),
                       frozenset({HEATMAP})),
    RESULTED_IN: (frozenset({FAULT_CONDITION}), frozenset({FAULT_PATH})),
    PART_OF: (frozenset({OSCILLOGRAM}),
              frozenset({PARALLEL_REC_OSCILLOGRAM_SET})),
    PATH_STEP: (frozenset({FAULT_PATH}), frozenset({SUSPECT_COMPONENT})),
}

#: attributes an entity of a concept must carry
REQUIRED_ATTRIBUTES: Mapping[str, tuple[str, ...]] = {
    FAULT_CONTEXT: ("dtc_code",),
    FAULT_CONDITION: ("text",),
    SYMPTOM: ("text",),
    SUSPECT_COMPONENT: ("name", "use_oscilloscope"),
    DIAGNOSTIC_ASSOCIATION: ("priority_id",),
    COMPONENT_SET: ("name",),
    SUBSYSTEM: ("name",),
    VEHICLE: ("vin",),
    DIAG_LOG: ("date",),
    MANUAL_INSPECTION: ("component", "anomaly"),
    OSCILLOGRAM_CLASSIFICATION: ("component", "anomaly", "uncertainty",
                                 "model_id"),
    OSCILLOGRAM: ("values",),
    PARALLEL_REC_OSCILLOGRAM_SET: (),
    HEATMAP: ("method", "values"),
    FAULT_PATH: ("cycle",),
}

#: concept -> attribute holding its unique natural key
NATURAL_KEYS: Mapping[str, str] = {
    FAULT_CONTEXT: "dtc_code",
    VEHICLE: "vin",
    SUSPECT_COMPONENT: "name",
    COMPONENT_SET: "name",
    SUBSYSTEM: "name",
}

DTC_PATTERN = re.compile(r"^[A-Za-z][0-9]{4}$")


@dataclass(frozen=True)
class Entity:
    id: str
    concept: str
    attributes: Mapping[str, object]

    def attr(self, name: str, default=None):
        return self.attributes.get(name, default)


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: str
    object: str
    order: int | None = None


@dataclass(frozen=True)
class AssociationSpec:
    """One expert link from a fault context to a suspect component."""

    component: str
    priority: int
    use_oscilloscope: bool | None = None


class KnowledgeGraph:
    """Validated entity/relation store with idempotent enhancers."""

    def __init__(self):
        self._lock = threading.RLock()
        self._entities: dict[str, Entity] = {}
        self._relations: list[Relation] = []
        self._relation_keys: set[tuple] = set()
        self._by_key: dict[tuple[str, object], str] = {}
        self._serial = 0
        self.revision = 0

    # ------------------------------------------------------------------
    # low-level mutations

    def add_entity(self, concept: str, attributes: Mapping[str, object],
                   ) -> str:
        with self._lock:
            entity = self._validated_entity(concept, attributes)
            key_attr = NATURAL_KEYS.get(concept)
            if key_attr is not None:
                existing = self._by_key.get((concept,
                                             entity.attributes[key_attr]))
                if existing is not None:
                    raise ValidationError(
                        f"{concept} with {key_attr}="
                        f"{entity.attributes[key_attr]!r} already exists")
                self._by_key[(concept, entity.attributes[key_attr])] = \
                    entity.id
            self._entities[entity.id] = entity
            self.revision += 1
            return entity.id

    def _validated_entity(self, concept: str,
                          attributes: Mapping[str, object]) -> Entity:
        if concept not in CONCEPTS:
            raise ValidationError(f"unknown concept {concept!r}")
        if concept == CLASSIFICATION:
            raise ValidationError(
                "Classification is abstract; use ManualInspection or "
                "OscillogramClassification")
        attributes = dict(attributes)
        for required in REQUIRED_ATTRIBUTES.get(concept, ()):
            if required not in attributes:
                raise ValidationError(
                    f"{concept} requires attribute {required!r}")
        if concept == FAULT_CONTEXT and \
                not DTC_PATTERN.match(str(attributes["dtc_code"])):
            raise ValidationError(
                f"malformed DTC {attributes['dtc_code']!r}: expected a "
                "letter followed by four digits")
        if concept == DIAGNOSTIC_ASSOCIATION:
            if not isinstance(attributes["priority_id"], int) \
                    or attributes["priority_id"] < 0:
                raise ValidationError("priority_id must be an int >= 0")
        if concept == OSCILLOGRAM_CLASSIFICATION:
            uncertainty = attributes["uncertainty"]
            if not 0.0 <= float(uncertainty) <= 1.0:
                raise ValidationError("uncertainty must lie in [0, 1]")
        self._serial += 1
        return Entity(f"e{self._serial}", concept, attributes)

    def add_relation(self, subject: str, predicate: str, object_: str,
                     order: int | None = None) -> bool:
        """Insert a relation; returns False when it already exists."""
        with self._lock:
            if predicate not in PREDICATE_SCHEMA:
                raise ValidationError(f"unknown predicate {predicate!r}")
            for endpoint in (subject, object_):
                if endpoint not in self._entities:
                    raise IntegrityError(
                        f"relation endpoint {endpoint!r} does not exist")
            domains, ranges = PREDICATE_SCHEMA[predicate]
            subject_concept = self._entities[subject].concept
            object_concept = self._entities[object_].concept
            if subject_concept not in domains:
                raise ValidationError(
                    f"{predicate} cannot start at {subject_concept}")
            if object_concept not in ranges:
                raise ValidationError(
                    f"{predicate} cannot point to {object_concept}")
            if (order is not None) != (predicate == PATH_STEP):
                raise ValidationError(
                    "order index is required for pathStep and forbidden "
                    "elsewhere")
            key = (subject, predicate, object_, order)
            if key in self._relation_keys:
                return False
            if predicate in (REASON_FOR, LED_TO):
                if self._reasons_of(object_):
                    raise ValidationError(
                        f"classification {object_} already has a reason")
            relation = Relation(subject, predicate, object_, order)
            self._relations.append(relation)
            self._relation_keys.add(key)
            self.revision += 1
            return True

    def _reasons_of(self, classification_id: str) -> list[Relation]:
        return [r for r in self._relations
                if r.object == classification_id
                and r.predicate in (REASON_FOR, LED_TO)]

    # ------------------------------------------------------------------
    # reads

    def entity(self, entity_id: str) -> Entity:
        with self._lock:
            try:
                return self._entities[entity_id]
            except KeyError:
                raise IntegrityError(
                    f"unknown entity {entity_id!r}") from None

    def has_entity(self, entity_id: str) -> bool:
        with self._lock:
            return entity_id in self._entities

    def entities(self, concept: str | None = None) -> list[Entity]:
        with self._lock:
            if concept is None:
                return list(self._entities.values())
            return [e for e in self._entities.values()
                    if e.concept == concept]

    def relations(self, predicate: str | None = None,
                  subject: str | None = None,
                  object_: str | None = None) -> list[Relation]:
        with self._lock:
            out = self._relations
            if predicate is not None:
                out = [r for r in out if r.predicate == predicate]
            if subject is not None:
                out = [r for r in out if r.subject == subject]
            if object_ is not None:
                out = [r for r in out if r.object == object_]
            return list(out)

    def find_by_key(self, concept: str, value: object) -> Entity | None:
        with self._lock:
            entity_id = self._by_key.get((concept, value))
            return self._entities[entity_id] if entity_id else None

    def stats(self) -> dict:
        with self._lock:
            per_concept: dict[str, int] = {}
            for entity in self._entities.values():
                per_concept[entity.concept] = \
                    per_concept.get(entity.concept, 0) + 1
            return {"entities": len(self._entities),
                    "relations": len(self._relations),
                    "revision": self.revision,
                    "per_concept": per_concept}

    # ------------------------------------------------------------------
    # expert-knowledge enhancers (idempotent)

    def add_suspect_component(self, name: str,
                              use_oscilloscope: bool = False,
                              affected_by: Sequence[str] = (),
                              contained_in: str | None = None) -> str:
        """Create or refine a component; referenced components are
        auto-created with default flags."""
        with self._lock:
            component_id = self._ensure_component(name, use_oscilloscope)
            for other in affected_by:
                other_id = self._ensure_component(other)
                self.add_relation(component_id, AFFECTED_BY, other_id)
            if contained_in is not None:
                subsystem = self.find_by_key(SUBSYSTEM, contained_in)
                if subsystem is None:
                    subsystem_id = self.add_entity(
                        SUBSYSTEM, {"name": contained_in})
                else:
                    subsystem_id = subsystem.id
                self.add_relation(component_id, CONTAINED_IN, subsystem_id)
            return component_id

    def _ensure_component(self, name: str,
                          use_oscilloscope: bool | None = None) -> str:
        existing = self.find_by_key(SUSPECT_COMPONENT, name)
        if existing is not None:
            if use_oscilloscope is not None and \
                    existing.attr("use_oscilloscope") != use_oscilloscope:
                updated = Entity(existing.id, existing.concept,
                                 {**existing.attributes,
                                  "use_oscilloscope": use_oscilloscope})
                self._entities[existing.id] = updated
                self.revision += 1
            return existing.id
        return self.add_entity(SUSPECT_COMPONENT, {
            "name": name,
            "use_oscilloscope": bool(use_oscilloscope)})

    def add_fault_context(self, dtc_code: str, condition_text: str,
                          symptoms: Sequence[str] = (),
                          associations: Sequence[AssociationSpec] = (),
                          provisional: bool = False) -> str:
        """Create or refine the knowledge hanging off one DTC.

        New symptoms and associations are merged into an existing
        context; replaying the exact payload changes nothing.  Duplicate
        association priorities are rejected.
        """
        with self._lock:
            priorities = [a.priority for a in associations]
            if len(priorities) != len(set(priorities)):
                raise ValidationError(
                    f"duplicate association priorities for {dtc_code}")
            context = self.find_by_key(FAULT_CONTEXT, dtc_code)
            if context is None:
                context_id = self.add_entity(FAULT_CONTEXT, {
                    "dtc_code": dtc_code, "provisional": provisional})
                condition_id = self.add_entity(FAULT_CONDITION,
                                               {"text": condition_text})
                self.add_relation(context_id, REPRESENTS, condition_id)
            else:
                context_id = context.id
                condition_id = self._condition_of(context_id)
            existing_priorities = {
                self.entity(r.object).attr("priority_id")
                for r in self.relations(HAS_ASSOCIATION, subject=context_id)}
            existing_targets = {
                self.entity(self.relations(POINTS_TO, subject=r.object)[0]
                            .object).attr("name"): r.object
                for r in self.relations(HAS_ASSOCIATION, subject=context_id)}
            for spec in associations:
                if spec.component in existing_targets:
                    continue  # idempotent replay
                if spec.priority in existing_priorities:
                    raise ValidationError(
                        f"priority {spec.priority} already used by "
                        f"{dtc_code}")
                component_id = self._ensure_component(spec.component,
                                                      spec.use_oscilloscope)
                association_id = self.add_entity(
                    DIAGNOSTIC_ASSOCIATION, {"priority_id": spec.priority})
                self.add_relation(context_id, HAS_ASSOCIATION,
                                  association_id)
                self.add_relation(association_id, POINTS_TO, component_id)
                existing_priorities.add(spec.priority)
            existing_symptoms = {
                self.entity(r.object).attr("text")
                for r in self.relations(MANIFESTED_BY, subject=condition_id)}
            for text in symptoms:
                if text in existing_symptoms:
                    continue
                symptom_id = self.add_entity(SYMPTOM, {"text": text})
                self.add_relation(condition_id, MANIFESTED_BY, symptom_id)
            return context_id

    def _condition_of(self, context_id: str) -> str:
        conditions = self.relations(REPRESENTS, subject=context_id)
        if not conditions:
            raise IntegrityError(
                f"fault context {context_id} lacks a condition")
        return conditions[0].object

    def add_component_set(self, name: str, members: Sequence[str],
                          verified_by: str) -> str:
        with self._lock:
            existing = self.find_by_key(COMPONENT_SET, name)
            set_id = existing.id if existing else self.add_entity(
                COMPONENT_SET, {"name": name})
            for member in members:
                member_id = self._ensure_component(member)
                self.add_relation(member_id, CONTAINED_IN, set_id)
            verifier_id = self._ensure_component(verified_by)
            self.add_relation(set_id, VERIFIED_BY, verifier_id)
            return set_id

    def extend_kg_with_vehicle(self, model_name: str, vin: str) -> str:
        with self._lock:
            existing = self.find_by_key(VEHICLE, vin)
            if existing is not None:
                return existing.id
            return self.add_entity(VEHICLE, {"vin": vin,
                                             "model": model_name})

    # ------------------------------------------------------------------
    # evidence recording

    def record_oscillogram(self, values: Sequence[float],
                           parallel_set_id: str | None = None) -> str:
        with self._lock:
            oscillogram_id = self.add_entity(
                OSCILLOGRAM, {"values": [float(v) for v in values]})
            if parallel_set_id is not None:
                self.add_relation(oscillogram_id, PART_OF, parallel_set_id)
            return oscillogram_id

    def record_classification(self, component: str, anomaly: bool,
                              reason: tuple[str, str],
                              oscillogram_id: str | None = None,
                              uncertainty: float | None = None,
                              model_id: str | None = None) -> str:
        """Persist one classification with its single reason.

        ``reason`` is ``("association", id)`` for first-round checks or
        ``("classification", id)`` when a prior anomaly triggered this
        one.  Passing an oscillogram id makes it an
        OscillogramClassification, otherwise a ManualInspection.
        """
        with self._lock:
            kind, reason_id = reason
            if kind not in ("association", "classification"):
                raise ValidationError(f"unknown reason kind {kind!r}")
            if oscillogram_id is not None:
                if uncertainty is None or model_id is None:
                    raise ValidationError(
                        "oscillogram classifications need uncertainty and "
                        "model_id")
                classification_id = self.add_entity(
                    OSCILLOGRAM_CLASSIFICATION,
                    {"component": component, "anomaly": bool(anomaly),
                     "uncertainty": float(uncertainty),
                     "model_id": model_id})
                self.add_relation(classification_id, CLASSIFIES,
                                  oscillogram_id)
            else:
                classification_id = self.add_entity(
                    MANUAL_INSPECTION,
                    {"component": component, "anomaly": bool(anomaly)})
            predicate = LED_TO if kind == "association" else REASON_FOR
            self.add_relation(reason_id, predicate, classification_id)
            return classification_id

    def record_heatmap(self, classification_id: str, method: str,
                       values: Sequence[float]) -> str:
        with self._lock:
            heatmap_id = self.add_entity(
                HEATMAP, {"method": method,
                          "values": [float(v) for v in values]})
            self.add_relation(classification_id, PRODUCED_HEATMAP,
                              heatmap_id)
            return heatmap_id

    def record_fault_path(self, component_names: Sequence[str],
                          cycle: bool = False) -> str:
        """Persist a root-cause-first fault path with ordered steps."""
        with self._lock:
            if not component_names:
                raise ValidationError("a fault path needs at least one step")
            path_id = self.add_entity(FAULT_PATH, {"cycle": bool(cycle)})
            for index, name in enumerate(component_names):
                component = self.find_by_key(SUSPECT_COMPONENT, name)
                if component is None:
                    raise IntegrityError(
                        f"fault path references unknown component {name!r}")
                self.add_relation(path_id, PATH_STEP, component.id,
                                  order=index)
            return path_id

    def extend_kg_with_diag_log(self, dtc_codes: Sequence[str], vin: str,
                                classification_ids: Sequence[str] = (),
                                fault_path_ids: Sequence[str] = (),
                                date: str | None = None) -> str:
        """Persist one diagnosis session summary.

        Wires each DTC's context into the log, the log to the vehicle,
        the log to every classification and fault path it entails, and
        each DTC's fault condition to each resulting fault path.
        """
        with self._lock:
            vehicle = self.find_by_key(VEHICLE, vin)
            if vehicle is None:
                raise IntegrityError(f"unknown vehicle vin {vin!r}")
            contexts = []
            for dtc in dtc_codes:
                context = self.find_by_key(FAULT_CONTEXT, dtc)
                if context is None:
                    raise IntegrityError(f"unknown DTC {dtc!r}")
                contexts.append(context)
            for entity_id in list(classification_ids) + list(fault_path_ids):
                entity = self.entity(entity_id)
                if entity.concept not in \
                        CLASSIFICATION_CONCEPTS | {FAULT_PATH}:
                    raise ValidationError(
                        f"{entity_id} is a {entity.concept}, not a "
                        "classification or fault path")
            log_id = self.add_entity(DIAG_LOG, {
                "date": date or _dt.date.today().isoformat()})
            for context in contexts:
                self.add_relation(context.id, APPEARS_IN, log_id)
            self.add_relation(log_id, CREATED_FOR, vehicle.id)
            for entity_id in list(classification_ids) + list(fault_path_ids):
                self.add_relation(log_id, ENTAILS, entity_id)
            for context in contexts:
                condition_id = self._condition_of(context.id)
                for path_id in fault_path_ids:
                    self.add_relation(condition_id, RESULTED_IN, path_id)
            return log_id

    # ------------------------------------------------------------------
    # queries

    def query_vehicle_instance_by_vin(self, vin: str) -> Entity | None:
        return self.find_by_key(VEHICLE, vin)

    def query_fault_context_by_dtc(self, dtc: str) -> Entity | None:
        return self.find_by_key(FAULT_CONTEXT, dtc)

    def query_fault_condition_by_dtc(self, dtc: str) -> str | None:
        context = self.find_by_key(FAULT_CONTEXT, dtc)
        if context is None:
            return None
        condition = self.entity(self._condition_of(context.id))
        return str(condition.attr("text"))

    def query_symptoms_by_dtc(self, dtc: str) -> list[str]:
        context = self.find_by_key(FAULT_CONTEXT, dtc)
        if context is None:
            return []
        condition_id = self._condition_of(context.id)
        return [str(self.entity(r.object).attr("text"))
                for r in self.relations(MANIFESTED_BY,
                                        subject=condition_id)]

    def query_suspect_components_by_dtc(self, dtc: str
                                        ) -> list[tuple[str, int]]:
        """(component name, priority) pairs in ascending priority order."""
        context = self.find_by_key(FAULT_CONTEXT, dtc)
        if context is None:
            return []
        out = []
        for link in self.relations(HAS_ASSOCIATION, subject=context.id):
            association = self.entity(link.object)
            target = self.relations(POINTS_TO, subject=association.id)
            if target:
                component = self.entity(target[0].object)
                out.append((str(component.attr("name")),
                            int(association.attr("priority_id"))))
        out.sort(key=lambda pair: pair[1])
        return out

    def query_association_id(self, dtc: str, component: str) -> str | None:
        context = self.find_by_key(FAULT_CONTEXT, dtc)
        if context is None:
            return None
        for link in self.relations(HAS_ASSOCIATION, subject=context.id):
            targets = self.relations(POINTS_TO, subject=link.object)
            if targets and \
                    self.entity(targets[0].object).attr("name") == component:
                return link.object
        return None

    def query_affected_by(self, component: str) -> list[str]:
        """Components the given one is affected by, in insertion order."""
        entity = self.find_by_key(SUSPECT_COMPONENT, component)
        if entity is None:
            return []
        return [str(self.entity(r.object).attr("name"))
                for r in self.relations(AFFECTED_BY, subject=entity.id)]

    def query_use_oscilloscope(self, component: str) -> bool:
        entity = self.find_by_key(SUSPECT_COMPONENT, component)
        if entity is None:
            raise IntegrityError(f"unknown component {component!r}")
        return bool(entity.attr("use_oscilloscope"))

    def query_component_sets(self, component: str
                             ) -> list[tuple[str, str, list[str]]]:
        """(set name, verifying component, members) for each set
        containing the component."""
        entity = self.find_by_key(SUSPECT_COMPONENT, component)
        if entity is None:
            return []
        out = []
        for relation in self.relations(CONTAINED_IN, subject=entity.id):
            set_entity = self.entity(relation.object)
            if set_entity.concept != COMPONENT_SET:
                continue
            verifier = self.relations(VERIFIED_BY, subject=set_entity.id)
            if not verifier:
                continue
            members = [str(self.entity(r.subject).attr("name"))
                       for r in self.relations(CONTAINED_IN,
                                               object_=set_entity.id)]
            out.append((str(set_entity.attr("name")),
                        str(self.entity(verifier[0].object).attr("name")),
                        members))
        return out

    def query_path_components(self, path_id: str) -> list[str]:
        steps = sorted(self.relations(PATH_STEP, subject=path_id),
                       key=lambda r: r.order)
        return [str(self.entity(r.object).attr("name")) for r in steps]

    # ------------------------------------------------------------------
    # integrity

    def check_integrity(self) -> list[str]:
        """All invariant violations, empty when the graph is sound."""
        with self._lock:
            problems = []
            for relation in self._relations:
                for endpoint in (relation.subject, relation.object):
                    if endpoint not in self._entities:
                        problems.append(
                            f"dangling endpoint {endpoint} in "
                            f"{relation.predicate}")
            for entity in self._entities.values():
                for required in REQUIRED_ATTRIBUTES.get(entity.concept, ()):
                    if required not in entity.attributes:
                        problems.append(
                            f"{entity.id} ({entity.concept}) misses "
                            f"{required}")
                if entity.concept in CLASSIFICATION_CONCEPTS:
                    reasons = self._reasons_of(entity.id)
                    if len(reasons) != 1:
                        problems.append(
                            f"classification {entity.id} has "
                            f"{len(reasons)} reasons, expected exactly 1")
            for context in self.entities(FAULT_CONTEXT):
                priorities = [
                    self.entity(r.object).attr("priority_id")
                    for r in self.relations(HAS_ASSOCIATION,
                                            subject=context.id)]
                if len(priorities) != len(set(priorities)):
                    problems.append(
                        f"fault context {context.id} repeats priorities")
            for path in self.entities(FAULT_PATH):
                orders = sorted(r.order for r in self.relations(
                    PATH_STEP, subject=path.id))
                if orders != list(range(len(orders))):
                    problems.append(
                        f"fault path {path.id} has non-contiguous steps")
            return problems

    # ------------------------------------------------------------------
    # serialization: one triple per line

    def export_triples(self) -> str:
        """Deterministic line-oriented dump.

        Entities are emitted in creation order: a ``<id> <a> "Concept"``
        line, then one ``<id> <attr:name> json`` line per attribute
        (sorted by name); relations follow in insertion order as
        ``<subject> <rel:predicate> <object>`` lines, with ``#index``
        appended to ordered predicates.  Every line ends in `` .``.
        """
        with self._lock:
            lines = []
            for entity in self._entities.values():
                lines.append(f"<{entity.id}> <a> "
                             f"{json.dumps(entity.concept)} .")
                for name in sorted(entity.attributes):
                    literal = json.dumps(entity.attributes[name],
                                         separators=(",", ":"),
                                         sort_keys=True)
                    lines.append(f"<{entity.id}> <attr:{name}> {literal} .")
            for relation in self._relations:
                predicate = relation.predicate
                if relation.order is not None:
                    predicate = f"{predicate}#{relation.order}"
                lines.append(f"<{relation.subject}> <rel:{predicate}> "
                             f"<{relation.object}> .")
            return "\n".join(lines) + ("\n" if lines else "")

    @staticmethod
    def import_triples(text: str) -> "KnowledgeGraph":
        """Rebuild a graph from :meth:`export_triples` output.

        Entity ids are regenerated in order of first appearance; the
        result is isomorphic to the exported graph.  Malformed lines
        raise :class:`ParseError` with their line number.
        """
        edges = []
        concepts: dict[str, str] = {}
        attributes: dict[str, dict] = {}
        order: list[str] = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not line.endswith(" ."):
                raise ParseError("line does not end in ' .'", line=line_no)
            body = line[:-2]
            match = re.match(r"^<([^<>\s]+)>\s+<([^<>\s]+)>\s+(.+)$", body)
            if not match:
                raise ParseError("expected '<subject> <predicate> object'",
                                 line=line_no)
            subject, predicate, object_part = match.groups()
            if subject not in concepts and subject not in attributes:
                order.append(subject)
                attributes.setdefault(subject, {})
            if predicate == "a":
                try:
                    concepts[subject] = json.loads(object_part)
                except json.JSONDecodeError:
                    raise ParseError("concept must be a JSON string",
                                     line=line_no) from None
            elif predicate.startswith("attr:"):
                try:
                    attributes[subject][predicate[5:]] = \
                        json.loads(object_part)
                except json.JSONDecodeError:
                    raise ParseError(
                        f"bad JSON literal {object_part!r}",
                        line=line_no) from None
            elif predicate.startswith("rel:"):
                target = re.match(r"^<([^<>\s]+)>$", object_part.strip())
                if not target:
                    raise ParseError("relation object must be an <id>",
                                     line=line_no)
                name = predicate[4:]
                step_order = None
                if "#" in name:
                    name, _, suffix = name.partition("#")
                    try:
                        step_order = int(suffix)
                    except ValueError:
                        raise ParseError(
                            f"bad order suffix {suffix!r}",
                            line=line_no) from None
                edges.append((line_no, subject, name, target.group(1),
                              step_order))
            else:
                raise ParseError(f"unknown predicate form {predicate!r}",
                                 line=line_no)

        graph = KnowledgeGraph()
        id_map: dict[str, str] = {}
        for old_id in order:
            if old_id not in concepts:
                raise ParseError(
                    f"entity {old_id!r} never declared a concept")
            id_map[old_id] = graph.add_entity(concepts[old_id],
                                              attributes[old_id])
        for line_no, subject, predicate, object_, step_order in edges:
            for endpoint in (subject, object_):
                if endpoint not in id_map:
                    raise ParseError(
                        f"relation references undeclared entity "
                        f"{endpoint!r}", line=line_no)
            graph.add_relation(id_map[subject], predicate,
                               id_map[object_], order=step_order)
        problems = graph.check_integrity()
        if problems:
            raise IntegrityError(
                "imported graph violates invariants: "
                + "; ".join(problems[:5]))
        return graph

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.export_triples())

    @staticmethod
    def load(path: str) -> "KnowledgeGraph":
        with open(path, "r", encoding="utf-8") as handle:
            return KnowledgeGraph.import_triples(handle.read())
