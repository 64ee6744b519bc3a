"""Command line entry points for the diagnosis workbench.

Subcommands cover the whole pipeline: subgroup discovery over CSV
tables, accounting KPI checks, score-system learning and evaluation,
FCN training, saliency heatmaps, knowledge graph import/export, an
interactive guided diagnosis and the HTTP gateway.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import __version__, kpi, mining, scoring, tabular
from .circuit import (AWAIT_MANUAL_RESULTS, DONE, RECORD_OSCILLOGRAM,
                      DiagnosisCircuit)
from .errors import ConfigError, DiagnosticaError, FormatError
from .kg import KnowledgeGraph
from .neural.cam import GRAD_CAM, METHODS, compute_heatmap, render_svg
from .neural.fcn import FcnModel
from .neural.series import load_labeled_series, z_normalize, \
    z_normalize_batch

MEASURES = ("ps", "binomial", "gain", "chi2", "mean")
STRATEGIES = {"width": tabular.EQUAL_WIDTH,
              "frequency": tabular.EQUAL_FREQUENCY}


def make_measure(name: str, min_size: int) -> mining.Measure:
    if name == "ps":
        return mining.ps()
    if name == "binomial":
        return mining.binomial()
    if name == "gain":
        return mining.gain(min_size)
    if name == "chi2":
        return mining.chi_squared()
    if name == "mean":
        return mining.mean_shift()
    raise ConfigError(f"unknown measure {name!r}")


def sniff_schema(text: str, target: str) -> dict[str, str]:
    """Column kinds from content: numeric when every cell parses."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FormatError("empty input: no header row") from None
    if target not in header:
        raise ConfigError(f"target column {target!r} not in header")
    cells: dict[str, list[str]] = {name: [] for name in header}
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        for name, cell in zip(header, row):
            if cell.strip():
                cells[name].append(cell.strip())
    schema = {}
    for name in header:
        if name == target:
            schema[name] = tabular.TARGET
            continue
        try:
            for cell in cells[name]:
                float(cell)
            schema[name] = tabular.NUMERIC if cells[name] \
                else tabular.NOMINAL
        except ValueError:
            schema[name] = tabular.NOMINAL
    return schema


def _emit(args, payload, human) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        human()


def _pattern_lines(results) -> None:
    for rank, ranked in enumerate(results, start=1):
        report = ranked.to_report()
        selectors = " AND ".join(report["selectors"]) or "(empty)"
        extra = ""
        if report.get("p_value") is not None:
            extra = f"  p={report['p_value']:.4g}"
        print(f"{rank}. quality={report['quality']:.6g}  "
              f"size={report['n_p']}{extra}  {selectors}")


# ----------------------------------------------------------------------
# subcommands

def cmd_discover(args) -> int:
    with open(args.data, encoding="utf-8") as handle:
        text = handle.read()
    schema = sniff_schema(text, args.target)
    dataset = tabular.load_table(text, schema)
    for name in dataset.attribute_names:
        if dataset.kind(name) == tabular.NUMERIC:
            dataset = tabular.discretize(dataset, name, args.bins,
                                         STRATEGIES[args.strategy])
    task = mining.MiningTask(dataset, make_measure(args.measure,
                                                   args.min_size),
                             k=args.k, max_depth=args.max_depth,
                             min_size=args.min_size)
    results = mining.discover_top_k(task)
    _emit(args, [r.to_report() for r in results],
          lambda: _pattern_lines(results))
    return 0


def cmd_kpi(args) -> int:
    with open(args.structure, encoding="utf-8") as handle:
        structure = kpi.load_structure(handle)
    with open(args.bookings, encoding="utf-8") as handle:
        accounting = kpi.load_bookings(handle, structure=structure)
    table = kpi.balances(structure, accounting)
    ordered = sorted(table.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    warnings = list(structure.warnings) + list(accounting.warnings)
    payload = {"balances": dict(ordered), "warnings": warnings}
    if args.mine:
        features = kpi.kpi_feature_table(structure, accounting,
                                         granularity=args.granularity)
        task = mining.MiningTask(features, mining.mean_shift(),
                                 k=args.k, max_depth=args.max_depth,
                                 min_size=args.min_size)
        results = mining.discover_top_k(task)
        payload["patterns"] = [r.to_report() for r in results]

    def human():
        for warning in warnings:
            print(f"warning: {warning}", file=sys.stderr)
        width = max((len(m) for m in table), default=0)
        for material, value in ordered:
            marker = "" if value == 0 else "  <-- off balance"
            print(f"{material:<{width}}  {value:12.4f}{marker}")
        if args.mine:
            print("\nconspicuous booking contexts:")
            _pattern_lines(results)

    _emit(args, payload, human)
    return 0


def _parse_prune(spec: str | None) -> scoring.PruneOptions | None:
    if not spec:
        return None
    chosen = {part.strip() for part in spec.split(",") if part.strip()}
    known = {"abnormality", "partition", "heuristic"}
    unknown = chosen - known
    if unknown:
        raise ConfigError(f"unknown prune steps: {', '.join(unknown)}")
    return scoring.PruneOptions(abnormality="abnormality" in chosen,
                                partition="partition" in chosen,
                                heuristic="heuristic" in chosen)


def cmd_scores(args) -> int:
    with open(args.cases, encoding="utf-8") as handle:
        cases = scoring.load_cases(handle)
    classes = {"attribute_classes": None, "diagnosis_classes": None}
    if args.classes:
        with open(args.classes, encoding="utf-8") as handle:
            loaded = json.load(handle)
        classes["attribute_classes"] = loaded.get("attribute_classes")
        classes["diagnosis_classes"] = loaded.get("diagnosis_classes")
    prune_options = _parse_prune(args.prune)
    report = scoring.evaluate(
        cases, folds=args.folds, tau=args.tau,
        significance=args.significance, prune_options=prune_options,
        refine_epochs=args.refine_epochs, **classes)
    payload = {"evaluation": report.to_json()}
    rule_base = scoring.learn_scores(cases, tau=args.tau,
                                     significance=args.significance)
    if prune_options is not None:
        rule_base = scoring.prune(
            rule_base, prune_options,
            attribute_classes=classes["attribute_classes"],
            diagnosis_classes=classes["diagnosis_classes"])
    epochs_used = None
    if args.refine_epochs:
        rule_base, epochs_used = scoring.refine_perceptron(
            rule_base, cases, max_epochs=args.refine_epochs)
    payload["rules"] = len(rule_base.rules)
    payload["refinement_epochs"] = epochs_used
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(rule_base.to_json(), handle, indent=2)
        payload["saved_to"] = args.out

    def human():
        ev = report.to_json()
        print(f"cases: {len(cases)}   folds: {args.folds}")
        print(f"accuracy: {ev['accuracy']:.4f}")
        print(f"rules per diagnosis: {ev['rules_per_diagnosis']:.3f} "
              f"(stddev {ev['rules_stddev']:.3f})")
        print(f"attribute values per base: {ev['attribute_values']:.3f}")
        if epochs_used is not None:
            print(f"perceptron refinement epochs: {epochs_used}")
        if args.out:
            print(f"rule base ({len(rule_base.rules)} rules) written to "
                  f"{args.out}")

    _emit(args, payload, human)
    return 0


def _parse_filters(spec: str) -> tuple[int, int, int]:
    parts = [part.strip() for part in spec.split(",")]
    if len(parts) != 3:
        raise ConfigError("filters must be three comma-separated ints")
    try:
        return tuple(int(part) for part in parts)  # type: ignore
    except ValueError:
        raise ConfigError("filters must be three comma-separated ints") \
            from None


def cmd_train(args) -> int:
    series, labels = load_labeled_series(args.series)
    normalized = z_normalize_batch(series)
    holdout = max(1, int(round(len(series) * args.holdout))) \
        if args.holdout > 0 else 0
    split = len(series) - holdout
    if split < 1:
        raise ConfigError("holdout leaves no training data")
    model = FcnModel(normalized.shape[1],
                     filters=_parse_filters(args.filters), seed=args.seed)
    history = model.train(normalized[:split], labels[:split],
                          epochs=args.epochs, batch_size=args.batch_size,
                          learning_rate=args.learning_rate)
    payload = {"train_accuracy": history["accuracy"][-1],
               "final_loss": history["loss"][-1],
               "epochs": args.epochs, "series": int(split)}
    if holdout:
        test_accuracy = float(
            (model.predict(normalized[split:]) == labels[split:]).mean())
        payload["holdout_accuracy"] = test_accuracy
        payload["holdout_series"] = holdout
    model.save(args.out)
    payload["saved_to"] = args.out

    def human():
        print(f"trained on {split} series for {args.epochs} epochs")
        print(f"final train accuracy: {payload['train_accuracy']:.4f}")
        if holdout:
            print(f"holdout accuracy ({holdout} series): "
                  f"{payload['holdout_accuracy']:.4f}")
        print(f"model written to {args.out}")

    _emit(args, payload, human)
    return 0


def cmd_cam(args) -> int:
    model = FcnModel.load(args.model)
    series, _labels = load_labeled_series(args.series)
    if not 0 <= args.row < len(series):
        raise ConfigError(f"row {args.row} out of range "
                          f"(file has {len(series)} series)")
    raw = series[args.row]
    normalized = z_normalize(raw)
    proba = model.predict_proba(normalized)[0]
    target = int(proba.argmax()) if args.target_class is None \
        else args.target_class
    heatmap = compute_heatmap(model, normalized, args.method,
                              target_class=target)
    payload = {"row": args.row,
               "prediction": "anomalous" if proba.argmax() == 0
               else "normal",
               "probabilities": {"anomalous": float(proba[0]),
                                 "normal": float(proba[1])},
               "heatmap": heatmap.to_json(),
               "argmax": heatmap.argmax}
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as handle:
            handle.write(render_svg(raw, heatmap))
        payload["svg"] = args.svg

    def human():
        print(f"row {args.row}: {payload['prediction']} "
              f"(p_anomalous={proba[0]:.4f})")
        print(f"{args.method} peak at sample {heatmap.argmax}")
        if args.svg:
            print(f"svg written to {args.svg}")

    _emit(args, payload, human)
    return 0


def cmd_kg(args) -> int:
    if args.kg_command == "export":
        graph = KnowledgeGraph.load(args.store)
        text = graph.export_triples()
        if args.out and args.out != "-":
            with open(args.out, "w", encoding="utf-8") as handle:
                handle.write(text)
            print(f"{graph.stats()['entities']} entities exported to "
                  f"{args.out}")
        else:
            sys.stdout.write(text)
        return 0
    if args.kg_command == "import":
        with open(args.input, encoding="utf-8") as handle:
            graph = KnowledgeGraph.import_triples(handle.read())
        graph.save(args.store)
        stats = graph.stats()
        print(f"imported {stats['entities']} entities and "
              f"{stats['relations']} relations into {args.store}")
        return 0
    raise ConfigError(f"unknown kg command {args.kg_command!r}")


def _read_series_file(path: str) -> list[float]:
    with open(path, encoding="utf-8") as handle:
        row = next(csv.reader(handle))
    return [float(cell) for cell in row]


def cmd_diagnose(args) -> int:
    try:
        graph = KnowledgeGraph.load(args.store)
    except FileNotFoundError:
        graph = KnowledgeGraph()
    model = FcnModel.load(args.model) if args.model else None
    session = DiagnosisCircuit(graph, args.vin,
                               vehicle_model=args.vehicle_model,
                               model=model,
                               model_id=args.model or "manual-only")
    line = input("Trouble codes (comma separated): ")
    session.submit_dtcs([code.strip() for code in line.split(",")
                         if code.strip()])
    # in --json mode stdout stays pure JSON; prose goes to stderr
    info = sys.stderr if args.json else sys.stdout
    for dtc in session.report.dtcs:
        condition = graph.query_fault_condition_by_dtc(dtc)
        if condition:
            print(f"{dtc}: {condition}", file=info)
            for symptom in graph.query_symptoms_by_dtc(dtc):
                print(f"  symptom: {symptom}", file=info)
    while session.state != DONE:
        component = session.current_component
        if session.state == AWAIT_MANUAL_RESULTS:
            answer = input(f"Is '{component}' anomalous? [y/n]: ")
            session.provide_manual_result(
                answer.strip().lower() in ("y", "yes", "1", "true"))
        elif session.state == RECORD_OSCILLOGRAM:
            path = input(f"Oscillogram CSV for '{component}': ")
            session.provide_oscillogram(_read_series_file(path.strip()))
    report = session.report
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print("\ndiagnosis finished")
        for result in report.results:
            verdict = "ANOMALOUS" if result.anomaly else "normal"
            print(f"  {result.component}: {verdict} ({result.method})")
        if report.sensor_hypothesis:
            print("  suspicion falls on the reporting sensor itself")
        for path_info in report.fault_paths:
            arrow = " -> ".join(path_info["components"])
            flag = "  [cycle]" if path_info["cycle"] else ""
            print(f"  fault path (root first): {arrow}{flag}")
    if args.save:
        graph.save(args.store)
        print(f"knowledge graph updated: {args.store}", file=info)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .gateway import create_app

    uvicorn.run(create_app(kg_path=args.kg), host=args.host,
                port=args.port, log_level="info")
    return 0


# ----------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diagnostica",
        description="knowledge-augmented anomaly detection and fault "
                    "diagnosis workbench")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="top-k subgroup discovery on CSV")
    p.add_argument("data")
    p.add_argument("--target", required=True)
    p.add_argument("--measure", choices=MEASURES, default="ps")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--min-size", type=int, default=1)
    p.add_argument("--bins", type=int, default=5)
    p.add_argument("--strategy", choices=sorted(STRATEGIES),
                   default="width")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_discover)

    p = sub.add_parser("kpi", help="accounting balance check and mining")
    p.add_argument("--structure", required=True)
    p.add_argument("--bookings", required=True)
    p.add_argument("--granularity", choices=[kpi.MATERIAL,
                                             kpi.BOOKING_GROUP],
                   default=kpi.MATERIAL)
    p.add_argument("--mine", action="store_true")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=2)
    p.add_argument("--min-size", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_kpi)

    p = sub.add_parser("scores",
                       help="learn and evaluate a diagnostic score system")
    p.add_argument("cases")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--significance", type=float, default=0.05)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--prune",
                   help="comma list of abnormality,partition,heuristic")
    p.add_argument("--classes",
                   help="JSON file with attribute/diagnosis classes")
    p.add_argument("--refine-epochs", type=int, default=0)
    p.add_argument("--out", help="write the learned rule base here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_scores)

    p = sub.add_parser("train", help="train the FCN anomaly classifier")
    p.add_argument("series", help="CSV rows: label,v1,v2,...")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=3e-3)
    p.add_argument("--filters", default="32,64,32")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=float, default=0.25)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("cam", help="saliency heatmap for one series")
    p.add_argument("model")
    p.add_argument("series")
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--method", choices=METHODS, default=GRAD_CAM)
    p.add_argument("--target-class", type=int, choices=(0, 1))
    p.add_argument("--svg", help="also render an SVG here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_cam)

    p = sub.add_parser("kg", help="knowledge graph import/export")
    kg_sub = p.add_subparsers(dest="kg_command", required=True)
    exp = kg_sub.add_parser("export")
    exp.add_argument("--store", required=True)
    exp.add_argument("--out", help="target file, '-' for stdout")
    exp.set_defaults(handler=cmd_kg)
    imp = kg_sub.add_parser("import")
    imp.add_argument("input")
    imp.add_argument("--store", required=True)
    imp.set_defaults(handler=cmd_kg)

    p = sub.add_parser("diagnose", help="interactive guided diagnosis")
    p.add_argument("--store", required=True)
    p.add_argument("--vin", required=True)
    p.add_argument("--vehicle-model", default="unknown")
    p.add_argument("--model", help="FCN model JSON for oscillograms")
    p.add_argument("--save", action="store_true",
                   help="write the session back into the store")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--kg", help="knowledge graph file to load/checkpoint")
    p.set_defaults(handler=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DiagnosticaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
