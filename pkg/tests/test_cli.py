"""Command line interface, one subcommand at a time."""

import json

import pytest

from diagnostica.cli import main, sniff_schema
from diagnostica.kg import AssociationSpec, KnowledgeGraph
from diagnostica.scoring import Case, Finding, ScoreRuleBase, dump_cases
from oracles import synthetic_anomaly_series

CHURN_CSV = """region,product,churn
north,basic,1
north,basic,1
north,pro,1
north,pro,0
south,basic,0
south,basic,0
south,pro,0
south,pro,1
"""

STRUCTURE_CSV = """parent,child,quantity,price_parent,price_child
P,M,2,100,5
P,N,1,100,
"""

BOOKINGS_CSV = """material,kind,amount,shift,storage_group,cost_center_id
P,produced,10,day,sg1,cc1
M,inflow,20,night,,cc2
X,inflow,5,day,sg1,cc1
"""


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDiscover:
    def test_json_output_matches_reference_quality(self, tmp_path,
                                                   capsys):
        data = tmp_path / "churn.csv"
        data.write_text(CHURN_CSV)
        code, out, _ = run(capsys, "discover", str(data),
                           "--target", "churn", "--k", "3", "--json")
        assert code == 0
        reports = json.loads(out)
        assert reports[0]["quality"] == 1.0
        assert reports[0]["selectors"] == ["region=north"]

    def test_numeric_columns_are_sniffed_and_binned(self, tmp_path,
                                                    capsys):
        rows = ["load,label"] + [f"{i},{1 if i > 4 else 0}"
                                 for i in range(1, 9)]
        data = tmp_path / "load.csv"
        data.write_text("\n".join(rows) + "\n")
        code, out, _ = run(capsys, "discover", str(data),
                           "--target", "label", "--bins", "2",
                           "--k", "1", "--json")
        assert code == 0
        top = json.loads(out)[0]
        assert top["selectors"][0].startswith("load=[")
        assert top["quality"] == 2.0  # upper half is all-positive

    def test_human_output_lists_ranks(self, tmp_path, capsys):
        data = tmp_path / "churn.csv"
        data.write_text(CHURN_CSV)
        code, out, _ = run(capsys, "discover", str(data),
                           "--target", "churn", "--k", "2",
                           "--measure", "binomial")
        assert code == 0
        assert out.splitlines()[0].startswith("1. quality=")

    def test_sniffer_requires_the_target(self):
        with pytest.raises(Exception):
            sniff_schema("a,b\n1,2\n", "missing")


class TestKpi:
    def write_inputs(self, tmp_path):
        structure = tmp_path / "structure.csv"
        bookings = tmp_path / "bookings.csv"
        structure.write_text(STRUCTURE_CSV)
        bookings.write_text(BOOKINGS_CSV)
        return structure, bookings

    def test_balances_and_warnings(self, tmp_path, capsys):
        structure, bookings = self.write_inputs(tmp_path)
        code, out, err = run(capsys, "kpi", "--structure", str(structure),
                             "--bookings", str(bookings))
        assert code == 0
        assert "off balance" in out  # P produced without consumption
        assert "M" in out
        assert "X" in err  # dangling booking warning

    def test_mining_payload(self, tmp_path, capsys):
        structure, bookings = self.write_inputs(tmp_path)
        code, out, _ = run(capsys, "kpi", "--structure", str(structure),
                           "--bookings", str(bookings), "--mine",
                           "--k", "2", "--json")
        assert code == 0
        payload = json.loads(out)
        assert set(payload) == {"balances", "warnings", "patterns"}
        assert payload["balances"]["M"] == 0.0
        assert len(payload["patterns"]) <= 2


def scored_cases():
    cases = []
    for i in range(12):
        diagnosis = "north" if i % 2 == 0 else "south"
        finding = Finding("region", diagnosis, abnormal=True)
        cases.append(Case.of([finding], [diagnosis]))
    return cases


class TestScores:
    def test_evaluation_and_rule_base_export(self, tmp_path, capsys):
        cases_file = tmp_path / "cases.jsonl"
        cases_file.write_text(dump_cases(scored_cases()))
        out_file = tmp_path / "rules.json"
        code, out, _ = run(capsys, "scores", str(cases_file),
                           "--folds", "3", "--out", str(out_file),
                           "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["evaluation"]["accuracy"] == 1.0
        # each finding correlates + with its diagnosis and - with the
        # other one, so two P rules and two N rules
        assert payload["rules"] == 4
        loaded = ScoreRuleBase.from_json(json.loads(out_file.read_text()))
        assert len(loaded.rules) == 4

    def test_prune_spec_is_validated(self, tmp_path, capsys):
        cases_file = tmp_path / "cases.jsonl"
        cases_file.write_text(dump_cases(scored_cases()))
        code, _, err = run(capsys, "scores", str(cases_file),
                           "--folds", "3", "--prune", "bogus")
        assert code == 2
        assert "unknown prune steps" in err


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    series, labels, _ = synthetic_anomaly_series(24, 16, seed=41)
    lines = [",".join([str(label)] + [f"{v:.6f}" for v in row])
             for label, row in zip(labels, series)]
    path = tmp_path_factory.mktemp("series") / "series.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestTrainAndCam:
    def test_train_then_explain(self, tmp_path, series_csv, capsys):
        model_file = tmp_path / "model.json"
        code, out, _ = run(capsys, "train", str(series_csv),
                           "--out", str(model_file), "--epochs", "4",
                           "--filters", "3,4,3", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["saved_to"] == str(model_file)
        assert model_file.exists()
        assert "holdout_accuracy" in payload

        svg_file = tmp_path / "row0.svg"
        code, out, _ = run(capsys, "cam", str(model_file),
                           str(series_csv), "--row", "0",
                           "--svg", str(svg_file), "--json")
        assert code == 0
        payload = json.loads(out)
        assert len(payload["heatmap"]["values"]) == 16
        assert svg_file.read_text().startswith("<svg")

    def test_cam_row_bounds(self, tmp_path, series_csv, capsys):
        model_file = tmp_path / "model.json"
        run(capsys, "train", str(series_csv), "--out", str(model_file),
            "--epochs", "1", "--filters", "2,2,2")
        code, _, err = run(capsys, "cam", str(model_file),
                           str(series_csv), "--row", "99")
        assert code == 2
        assert "out of range" in err

    def test_bad_filters_spec(self, series_csv, tmp_path, capsys):
        code, _, err = run(capsys, "train", str(series_csv),
                           "--out", str(tmp_path / "m.json"),
                           "--filters", "1,2")
        assert code == 2
        assert "three comma-separated" in err


def store_with_chain(path):
    kg = KnowledgeGraph()
    kg.add_suspect_component("C_A", affected_by=["C_B"])
    kg.add_suspect_component("C_D", affected_by=["C_A"])
    kg.add_fault_context(
        "C1234", "pressure implausible", symptoms=["limp mode"],
        associations=[AssociationSpec("C_A", 1), AssociationSpec("C_D", 2)])
    kg.save(str(path))
    return kg


class TestKgCommands:
    def test_export_import_round_trip(self, tmp_path, capsys):
        store = tmp_path / "store.triples"
        kg = store_with_chain(store)
        out_file = tmp_path / "dump.triples"
        code, out, _ = run(capsys, "kg", "export", "--store", str(store),
                           "--out", str(out_file))
        assert code == 0 and "exported" in out
        assert out_file.read_text() == kg.export_triples()

        target = tmp_path / "rebuilt.triples"
        code, out, _ = run(capsys, "kg", "import", str(out_file),
                           "--store", str(target))
        assert code == 0 and "imported" in out
        assert KnowledgeGraph.load(str(target)).export_triples() == \
            kg.export_triples()

    def test_export_to_stdout(self, tmp_path, capsys):
        store = tmp_path / "store.triples"
        store_with_chain(store)
        code, out, _ = run(capsys, "kg", "export", "--store", str(store))
        assert code == 0
        assert '<e1> <a> "SuspectComponent" .' in out

    def test_missing_store_fails_cleanly(self, tmp_path, capsys):
        code, _, err = run(capsys, "kg", "export", "--store",
                           str(tmp_path / "nope.triples"))
        assert code == 2
        assert "error:" in err


class TestDiagnose:
    def test_scripted_session(self, tmp_path, capsys, monkeypatch):
        store = tmp_path / "store.triples"
        store_with_chain(store)
        answers = iter(["C1234", "y", "n", "y"])
        monkeypatch.setattr("builtins.input",
                            lambda prompt="": next(answers))
        code, out, _ = run(capsys, "diagnose", "--store", str(store),
                           "--vin", "VIN77", "--save")
        assert code == 0
        assert "pressure implausible" in out
        assert "C_B -> C_A" in out or "C_A" in out
        assert "knowledge graph updated" in out
        reloaded = KnowledgeGraph.load(str(store))
        assert reloaded.stats()["per_concept"]["DiagLog"] == 1
        assert reloaded.query_vehicle_instance_by_vin("VIN77") is not None

    def test_json_report(self, tmp_path, capsys, monkeypatch):
        store = tmp_path / "store.triples"
        store_with_chain(store)
        answers = iter(["C1234", "n", "n"])
        monkeypatch.setattr("builtins.input",
                            lambda prompt="": next(answers))
        code, out, _ = run(capsys, "diagnose", "--store", str(store),
                           "--vin", "VIN1", "--json")
        assert code == 0
        report = json.loads(out)
        assert report["sensor_hypothesis"] is True
        assert report["fault_paths"] == []
