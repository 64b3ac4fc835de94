import csv
import json

import pytest

from indefsl.cli import EXIT_DECIDED, EXIT_INCONCLUSIVE, EXIT_INPUT, RunConfig, main, run
from indefsl.schema import SchemaError, fixture_path, load_fixture


def _run(tmp_path, sub, doc, *extra):
    src = tmp_path / "in.json"
    src.write_text(json.dumps(doc))
    out = tmp_path / "out"
    code = main([sub, "--input", str(src), "--out", str(out), *extra])
    return code, json.loads((out / "report.json").read_text()), out


@pytest.mark.parametrize(
    "fixture, outcome",
    [("sgn_dirichlet", "HasRBP"), ("scaling_A2_B2", "NoRBP"), ("wod_not_stable", None)],
)
def test_check_rbp(tmp_path, fixture, outcome, capsys):
    code, rep, out = _run(tmp_path, "check-rbp", load_fixture(fixture))
    assert code in (EXIT_DECIDED, EXIT_INCONCLUSIVE)
    assert rep["exit_code"] == code
    if outcome is not None:
        assert code == EXIT_DECIDED and rep["result"]["outcome"] == outcome
    assert rep["files"][:2] == ["report.json", "pi_ratios.csv"]
    assert (out / "pi_ratios.csv").exists()
    assert json.loads(capsys.readouterr().out) == rep


@pytest.mark.parametrize(
    "sub, fixture, files",
    [
        ("criteria", "sgn_dirichlet", {"criteria.csv", "pi_ratios.csv"}),
        ("canonicalize-bc", "sgn_coupled_c2", {"bc.csv"}),
        ("pi-test", "pi_power", {"pi_ratios.csv"}),
        ("help-inequality", "bennewitz_pi", {"k_n.csv", "pi_ratios.csv"}),
    ],
)
def test_subcommands_decide(tmp_path, sub, fixture, files):
    code, rep, out = _run(tmp_path, sub, load_fixture(fixture))
    assert code == EXIT_DECIDED, rep.get("error")
    assert rep["status"] == "decided"
    assert {p.name for p in out.iterdir()} == files | {"report.json"}


def test_spectrum_csv_echo(tmp_path, capsys):
    code, rep, out = _run(tmp_path, "spectrum", load_fixture("sgn_periodic"), "--max-eigs", "6", "--format", "csv")
    assert code == EXIT_DECIDED
    assert "jordan_chain" in rep["result"]
    echoed = capsys.readouterr().out
    assert echoed == (out / "eigenvalues.csv").read_text()
    rows = list(csv.reader(echoed.splitlines()))
    assert rows[0] == ["re", "im", "multiplicity", "residual"]
    assert sum(int(r[2]) for r in rows[1:]) == 6


def test_gram(tmp_path):
    doc = load_fixture("sgn_periodic")
    doc["options"] = {"gram_sizes": [2, 4]}
    code, rep, out = _run(tmp_path, "gram", doc)
    assert code == EXIT_DECIDED
    assert (out / "kappa.csv").exists() and (out / "kappa_by_size.csv").exists()


def test_help_q0_is_reported_invalid(tmp_path):
    code, rep, _ = _run(tmp_path, "help-inequality", load_fixture("help_q0"))
    assert code == EXIT_DECIDED
    assert rep["result"]["validity"] == "Invalid"


@pytest.mark.parametrize(
    "mutate, pointer",
    [
        (lambda d: d.update(colour="red"), "/colour"),
        (lambda d: d["weight"].update(expr="sgn(x"), "/weight/expr"),
        (lambda d: d.update(bc={"matrices": {"C": [[1, 0], [0, 0]], "D": [[0, 0], [0, 0]]}}), "/bc"),
        (lambda d: d["weight"].update(sign_changes=[0.5]), "/weight"),
        (lambda d: d.update(options={"tol": 1.0}), "/options/tol"),
        (lambda d: d.update(options={"max_eigs": 0}), "/options/max_eigs"),
    ],
)
def test_input_errors(tmp_path, mutate, pointer, capsys):
    doc = load_fixture("sgn_dirichlet")
    mutate(doc)
    code, rep, out = _run(tmp_path, "check-rbp", doc)
    assert code == EXIT_INPUT
    assert rep["status"] == "input-error"
    assert rep["error"]["pointer"].startswith(pointer)
    assert [p.name for p in out.iterdir()] == ["report.json"]
    assert capsys.readouterr().err.startswith("error:")


def test_invalid_json(tmp_path):
    src = tmp_path / "bad.json"
    src.write_text("{")
    code, rep = run(RunConfig("check-rbp", src, tmp_path / "o"))
    assert code == EXIT_INPUT and rep["error"]["pointer"] == ""


def test_config_validation(tmp_path):
    with pytest.raises(SchemaError, match="unknown"):
        RunConfig.from_mapping({"subcommand": "check-rbp", "input": "x", "out": "y", "colour": 1})
    with pytest.raises(SchemaError):
        RunConfig("check-rbp", "x", "y", tol=1e-20)
    assert main(["spectrum", "--input", "x", "--out", str(tmp_path), "--max-eigs", "500"]) == EXIT_INPUT


def test_reports_are_byte_identical(tmp_path):
    src = fixture_path("scaling_A3_B1")
    texts = []
    for k in range(2):
        run(RunConfig("check-rbp", src, tmp_path / str(k)))
        texts.append((tmp_path / str(k) / "report.json").read_bytes())
    assert texts[0] == texts[1]
