"""HTTP gateway exposing knowledge acquisition and guided diagnosis.

Every JSON response is an envelope carrying exactly one of ``payload``
or ``error``::

    {"payload": {...}, "error": null}
    {"payload": null, "error": {"code": "protocol", "message": "..."}}

Session endpoints enforce the diagnosis circuit: input posted out of
turn is answered with 409 and leaves the session untouched.  The
knowledge graph can be primed from the file named by the
``DIAGNOSTICA_KG`` environment variable and checkpointed back to it.
"""

from __future__ import annotations

import os
import threading
import uuid

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .circuit import (AWAIT_MANUAL_RESULTS, READ_DTCS, RECORD_OSCILLOGRAM,
                      DiagnosisCircuit)
from .errors import (ConfigError, DegenerateSeriesError, DiagnosticaError,
                     FormatError, IntegrityError, ParseError, ProtocolError,
                     ShapeError, ValidationError)
from .kg import HEATMAP, AssociationSpec, KnowledgeGraph
from .neural.cam import METHODS, compute_heatmap
from .neural.fcn import FcnModel
from .neural.series import z_normalize, z_normalize_batch

KG_PATH_ENV = "DIAGNOSTICA_KG"

_ERROR_CODES = [
    (ProtocolError, 409, "protocol"),
    (ParseError, 422, "parse"),
    (FormatError, 422, "format"),
    (ShapeError, 422, "shape"),
    (DegenerateSeriesError, 422, "degenerate-series"),
    (ConfigError, 422, "config"),
    (ValidationError, 422, "validation"),
    (IntegrityError, 409, "integrity"),
]


def _ok(payload, status_code: int = 200) -> JSONResponse:
    return JSONResponse({"payload": payload, "error": None},
                        status_code=status_code)


def _fail(status_code: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"payload": None,
                         "error": {"code": code, "message": message}},
                        status_code=status_code)


class NotFound(DiagnosticaError):
    pass


class ComponentBody(BaseModel):
    name: str = Field(min_length=1)
    use_oscilloscope: bool = False
    affected_by: list[str] = Field(default_factory=list)
    contained_in: str | None = None


class AssociationBody(BaseModel):
    component: str = Field(min_length=1)
    priority: int
    use_oscilloscope: bool | None = None


class FaultContextBody(BaseModel):
    dtc_code: str
    condition_text: str
    symptoms: list[str] = Field(default_factory=list)
    associations: list[AssociationBody] = Field(default_factory=list)


class ComponentSetBody(BaseModel):
    name: str = Field(min_length=1)
    members: list[str]
    verified_by: str


class VehicleBody(BaseModel):
    model_name: str = Field(min_length=1)
    vin: str = Field(min_length=1)


class ImportBody(BaseModel):
    triples: str


class TrainBody(BaseModel):
    model_id: str = Field(min_length=1)
    series: list[list[float]]
    labels: list[int]
    epochs: int = 20
    batch_size: int = 16
    filters: tuple[int, int, int] = (8, 12, 8)
    seed: int = 0


class ClassifyBody(BaseModel):
    values: list[float]
    method: str = "grad-cam"


class SessionBody(BaseModel):
    vin: str = Field(min_length=1)
    vehicle_model: str = "unknown"
    model_id: str | None = None


class DtcsBody(BaseModel):
    codes: list[str]


class OscillogramBody(BaseModel):
    values: list[float]


class ManualBody(BaseModel):
    anomaly: bool


def _session_payload(session_id: str, session: DiagnosisCircuit) -> dict:
    awaiting = {READ_DTCS: "dtcs",
                RECORD_OSCILLOGRAM: "oscillogram",
                AWAIT_MANUAL_RESULTS: "manual"}.get(session.state)
    return {"session_id": session_id,
            "state": session.state,
            "awaiting": awaiting,
            "current_component": session.current_component,
            "report": session.report.to_json()}


def create_app(kg: KnowledgeGraph | None = None,
               kg_path: str | None = None) -> FastAPI:
    """Build the gateway around one shared knowledge graph."""
    app = FastAPI(title="diagnostica gateway", version="1.0")
    # browser clients (the workshop UI) are served from another origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    path = kg_path if kg_path is not None else os.environ.get(KG_PATH_ENV)
    if kg is None:
        kg = KnowledgeGraph.load(path) if path and os.path.exists(path) \
            else KnowledgeGraph()
    state = {"kg": kg}
    models: dict[str, FcnModel] = {}
    sessions: dict[str, DiagnosisCircuit] = {}
    lock = threading.Lock()
    app.state.kg = lambda: state["kg"]

    @app.exception_handler(DiagnosticaError)
    async def domain_error(_request: Request, exc: DiagnosticaError):
        if isinstance(exc, NotFound):
            return _fail(404, "not-found", str(exc))
        for kind, status, code in _ERROR_CODES:
            if isinstance(exc, kind):
                return _fail(status, code, str(exc))
        return _fail(500, "internal", str(exc))

    @app.exception_handler(RequestValidationError)
    async def body_error(_request: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        return _fail(422, "body", f"{where}: {first['msg']}")

    # ------------------------------------------------------------------
    # health and store management

    @app.get("/api/v1/health")
    def health():
        return _ok({"status": "ok",
                    "revision": state["kg"].revision})

    @app.get("/api/v1/kg/stats")
    def kg_stats():
        return _ok(state["kg"].stats())

    @app.get("/api/v1/kg/export")
    def kg_export():
        return _ok({"triples": state["kg"].export_triples()})

    @app.post("/api/v1/kg/import")
    def kg_import(body: ImportBody):
        imported = KnowledgeGraph.import_triples(body.triples)
        with lock:
            if sessions:
                raise ProtocolError(
                    "cannot replace the knowledge graph while sessions "
                    "are open")
            state["kg"] = imported
        return _ok(imported.stats())

    @app.post("/api/v1/kg/checkpoint")
    def kg_checkpoint():
        if not path:
            raise ConfigError(
                f"no checkpoint path; set {KG_PATH_ENV} or pass --kg")
        state["kg"].save(path)
        return _ok({"path": path, "revision": state["kg"].revision})

    # ------------------------------------------------------------------
    # knowledge acquisition

    @app.post("/api/v1/knowledge/components")
    def add_component(body: ComponentBody):
        entity_id = state["kg"].add_suspect_component(
            body.name, use_oscilloscope=body.use_oscilloscope,
            affected_by=body.affected_by, contained_in=body.contained_in)
        return _ok({"id": entity_id, "name": body.name}, status_code=201)

    @app.get("/api/v1/knowledge/components/{name}")
    def get_component(name: str):
        kg_ = state["kg"]
        entity = kg_.find_by_key("SuspectComponent", name)
        if entity is None:
            raise NotFound(f"unknown component {name!r}")
        return _ok({
            "name": name,
            "use_oscilloscope": bool(entity.attr("use_oscilloscope")),
            "affected_by": kg_.query_affected_by(name),
            "sets": [{"name": s, "verified_by": v, "members": m}
                     for s, v, m in kg_.query_component_sets(name)]})

    @app.post("/api/v1/knowledge/fault-contexts")
    def add_fault_context(body: FaultContextBody):
        entity_id = state["kg"].add_fault_context(
            body.dtc_code, body.condition_text, symptoms=body.symptoms,
            associations=[AssociationSpec(a.component, a.priority,
                                          a.use_oscilloscope)
                          for a in body.associations])
        return _ok({"id": entity_id, "dtc_code": body.dtc_code},
                   status_code=201)

    @app.get("/api/v1/knowledge/fault-contexts/{dtc}")
    def get_fault_context(dtc: str):
        kg_ = state["kg"]
        if kg_.query_fault_context_by_dtc(dtc) is None:
            raise NotFound(f"no knowledge recorded for {dtc!r}")
        return _ok({
            "dtc_code": dtc,
            "condition": kg_.query_fault_condition_by_dtc(dtc),
            "symptoms": kg_.query_symptoms_by_dtc(dtc),
            "suspects": [{"component": c, "priority": p}
                         for c, p in
                         kg_.query_suspect_components_by_dtc(dtc)]})

    @app.post("/api/v1/knowledge/component-sets")
    def add_component_set(body: ComponentSetBody):
        entity_id = state["kg"].add_component_set(
            body.name, members=body.members, verified_by=body.verified_by)
        return _ok({"id": entity_id, "name": body.name}, status_code=201)

    @app.post("/api/v1/knowledge/vehicles")
    def add_vehicle(body: VehicleBody):
        entity_id = state["kg"].extend_kg_with_vehicle(body.model_name,
                                                       body.vin)
        return _ok({"id": entity_id, "vin": body.vin}, status_code=201)

    # ------------------------------------------------------------------
    # models and heatmaps

    @app.post("/api/v1/models")
    def train_model(body: TrainBody):
        if not body.series:
            raise ValidationError("series must not be empty")
        normalized = z_normalize_batch(body.series)
        model = FcnModel(normalized.shape[1], filters=body.filters,
                         seed=body.seed)
        history = model.train(normalized, body.labels, epochs=body.epochs,
                              batch_size=body.batch_size)
        with lock:
            models[body.model_id] = model
        return _ok({"model_id": body.model_id,
                    "input_length": model.input_length,
                    "final_accuracy": history["accuracy"][-1]},
                   status_code=201)

    @app.get("/api/v1/models")
    def list_models():
        return _ok({"models": [
            {"model_id": name, "input_length": model.input_length}
            for name, model in sorted(models.items())]})

    @app.post("/api/v1/models/{model_id}/classify")
    def classify(model_id: str, body: ClassifyBody):
        model = models.get(model_id)
        if model is None:
            raise NotFound(f"unknown model {model_id!r}")
        if body.method not in METHODS:
            raise ConfigError(f"unknown saliency method {body.method!r}")
        normalized = z_normalize(body.values)
        proba = model.predict_proba(normalized)[0]
        predicted = int(proba.argmax())
        heatmap = compute_heatmap(model, normalized, body.method,
                                  target_class=predicted)
        return _ok({"anomaly": predicted == 0,
                    "probabilities": {"anomalous": float(proba[0]),
                                      "normal": float(proba[1])},
                    "heatmap": heatmap.to_json()})

    @app.get("/api/v1/heatmaps/{heatmap_id}")
    def get_heatmap(heatmap_id: str):
        kg_ = state["kg"]
        if not kg_.has_entity(heatmap_id):
            raise NotFound(f"unknown heatmap {heatmap_id!r}")
        entity = kg_.entity(heatmap_id)
        if entity.concept != HEATMAP:
            raise NotFound(f"{heatmap_id} is not a heatmap")
        return _ok({"id": heatmap_id,
                    "method": entity.attr("method"),
                    "values": entity.attr("values")})

    # ------------------------------------------------------------------
    # guided diagnosis sessions

    def _session(session_id: str) -> DiagnosisCircuit:
        session = sessions.get(session_id)
        if session is None:
            raise NotFound(f"unknown session {session_id!r}")
        return session

    @app.post("/api/v1/sessions")
    def create_session(body: SessionBody):
        model = None
        if body.model_id is not None:
            model = models.get(body.model_id)
            if model is None:
                raise NotFound(f"unknown model {body.model_id!r}")
        session = DiagnosisCircuit(
            state["kg"], body.vin, vehicle_model=body.vehicle_model,
            model=model, model_id=body.model_id or "manual-only")
        session_id = uuid.uuid4().hex[:12]
        with lock:
            sessions[session_id] = session
        return _ok(_session_payload(session_id, session), status_code=201)

    @app.get("/api/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return _ok(_session_payload(session_id, _session(session_id)))

    @app.post("/api/v1/sessions/{session_id}/dtcs")
    def post_dtcs(session_id: str, body: DtcsBody):
        session = _session(session_id)
        with lock:
            session.submit_dtcs(body.codes)
        return _ok(_session_payload(session_id, session))

    @app.post("/api/v1/sessions/{session_id}/oscillogram")
    def post_oscillogram(session_id: str, body: OscillogramBody):
        session = _session(session_id)
        with lock:
            session.provide_oscillogram(body.values)
        return _ok(_session_payload(session_id, session))

    @app.post("/api/v1/sessions/{session_id}/manual")
    def post_manual(session_id: str, body: ManualBody):
        session = _session(session_id)
        with lock:
            session.provide_manual_result(body.anomaly)
        return _ok(_session_payload(session_id, session))

    @app.get("/api/v1/sessions/{session_id}/report")
    def get_report(session_id: str):
        return _ok(_session(session_id).report.to_json())

    return app
