import hashlib
import json

import numpy as np
import pytest

from choiceforge import io
from choiceforge.cli import analysis_payload, main
from choiceforge.core import AttributeSchema, ChoiceDataset
from choiceforge.synth import generate_dataset, named_spec


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("CHOICEFORGE_SEED", raising=False)
    return tmp_path


def write_report(path, betas, reference, constants=(0.0,)):
    path.write_text(json.dumps({
        "model": "mnl", "attributes": list(betas), "betas": betas,
        "alternative_constants": list(constants), "reference_levels": reference,
    }))


def test_dataset_roundtrip(tmp_path):
    data = generate_dataset(named_spec("virtual-traveling-chain", population_size=40))
    io.write_dataset(data, tmp_path / "d.csv")
    back = io.read_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.attributes, data.attributes)
    assert np.array_equal(back.chosen, data.chosen)
    assert np.array_equal(back.constructs, data.constructs)
    assert back.construct_names == data.construct_names and back.outside_option


def test_dataset_without_outside_roundtrip(tmp_path):
    data = generate_dataset(named_spec("virtual-traveling-default", population_size=30, outside_option=False))
    io.write_dataset(data, tmp_path / "d.csv")
    back = io.read_dataset(tmp_path / "d.csv")
    assert not back.outside_option and np.array_equal(back.chosen, data.chosen)


@pytest.mark.parametrize("body,needle", [
    ("0,0,1,1.0,x\n0,outside,0,0.0,0.0\n", "row 2, column 'price'"),
    ("0,0,1,1.0,2.0\n0,outside,1,0.0,0.0\n", "row 3, column 'chosen'"),
    ("0,0,0,1.0,2.0\n0,outside,0,0.0,0.0\n", "column 'chosen'"),
    ("0,0,1,1.0\n", "row 2"),
])
def test_malformed_csv_names_location(workdir, capsys, body, needle):
    (workdir / "bad.csv").write_text("obs_id,alt_id,chosen,q,price\n" + body)
    assert main(["estimate", "--data", "bad.csv"]) == 2
    assert needle in capsys.readouterr().err


def test_simulate_deterministic(workdir):
    args = ["simulate", "--spec", "virtual-traveling-default", "--n", "5000", "--seed", "7"]
    assert main(args) == 0
    first = digest(workdir / "choices.csv"), digest(workdir / "truth.json")
    assert main(args) == 0
    assert (digest(workdir / "choices.csv"), digest(workdir / "truth.json")) == first


@pytest.mark.parametrize("args", [["simulate"], ["simulate", "--spec", "virtual-traveling-default", "--n", "0"],
                                  ["simulate", "--spec", "nope"]])
def test_simulate_input_errors(workdir, args):
    assert main(args) == 2


def test_estimate_recovers_truth(workdir):
    main(["simulate", "--spec", "virtual-traveling-default", "--n", "5000", "--seed", "7"])
    assert main(["estimate", "--data", "choices.csv"]) == 0
    report = json.loads((workdir / "estimate.json").read_text())
    truth = json.loads((workdir / "truth.json").read_text())
    for name, b in truth["betas"].items():
        assert abs(report["betas"][name] - b) <= 3 * report["standard_errors"][name]
    assert report["model"] == "mnl" and report["converged"] is True
    assert (workdir / "estimate.txt").read_text().startswith("model: mnl")


def test_estimate_constant_price(workdir, capsys):
    data = generate_dataset(named_spec("virtual-traveling-default", population_size=200))
    X = np.array(data.attributes)
    X[:, :, -1] = 9.0
    io.write_dataset(ChoiceDataset(data.schema, X, data.chosen, True), workdir / "flat.csv")
    assert main(["estimate", "--data", "flat.csv"]) == 4
    assert "price" in capsys.readouterr().err


def test_estimate_non_convergence(workdir):
    main(["simulate", "--spec", "virtual-traveling-default", "--n", "500"])
    assert main(["estimate", "--data", "choices.csv", "--max-iter", "1"]) == 3
    assert json.loads((workdir / "estimate.json").read_text())["converged"] is False


def test_lcm_one_class_matches_mnl(workdir):
    main(["simulate", "--spec", "virtual-traveling-default", "--n", "2000"])
    main(["estimate", "--data", "choices.csv", "--out", "mnl"])
    assert main(["estimate", "--data", "choices.csv", "--model", "lcm", "--classes", "1", "--out", "lcm"]) == 0
    mnl = json.loads((workdir / "mnl.json").read_text())["betas"]
    lcm = json.loads((workdir / "lcm.json").read_text())["classes"][0]["betas"]
    assert all(abs(mnl[k] - lcm[k]) <= 1e-8 for k in mnl)


def test_analyze_wtp_line(workdir):
    write_report(workdir / "r.json", {"q": 0.5, "price": -0.25}, {"q": 1.0, "price": 2.0})
    assert main(["analyze", "--report", "r.json"]) == 0
    assert "wtp.q = 2.0" in (workdir / "analysis.txt").read_text().splitlines()


def test_analyze_positive_price(workdir):
    write_report(workdir / "r.json", {"q": 0.5, "price": 0.25}, {"q": 1.0, "price": 2.0})
    assert main(["analyze", "--report", "r.json"]) == 5


def test_analyze_roundtrip(workdir):
    main(["simulate", "--spec", "virtual-traveling-default", "--n", "1000"])
    main(["estimate", "--data", "choices.csv"])
    assert main(["analyze", "--report", "estimate.json", "--population", "5000"]) == 0
    emitted = json.loads((workdir / "analysis.json").read_text())
    report = json.loads((workdir / "estimate.json").read_text())
    again = analysis_payload(report, 5000.0)
    for got, exp in zip(emitted["results"], again["results"]):
        for key in ("purchase_probability", "price_derivative", "market_potential"):
            assert got[key] == pytest.approx(exp[key], abs=1e-9)
        for name in exp["wtp"]:
            assert got["wtp"][name] == pytest.approx(exp["wtp"][name], abs=1e-9)


def test_optimize_toy(workdir):
    write_report(workdir / "r.json", {"q": 1.0, "price": -1.0}, {"q": 2.0, "price": 1.0})
    assert main(["optimize", "--report", "r.json", "--price-bounds", "0:6", "--grid-size", "601"]) == 0
    sol = json.loads((workdir / "design.json").read_text())
    assert sol["price"] == pytest.approx(2.0, abs=0.01)
    curve = io.read_curve(workdir / "curve.csv")
    assert curve.shape == (601, 4)
    assert np.all(np.abs(curve[:, 3] - curve[:, 0] * curve[:, 2]) <= 1e-9)
    assert (workdir / "curve.csv").read_text().splitlines()[0] == "price,utility,probability,revenue"


def test_optimize_unbounded(workdir):
    write_report(workdir / "r.json", {"q": 1.0, "price": 0.5}, {"q": 2.0, "price": 1.0})
    assert main(["optimize", "--report", "r.json", "--price-bounds", "0:6"]) == 5


def test_optimize_design_flags(workdir):
    write_report(workdir / "r.json", {"q": 0.5, "r": 0.1, "price": -0.3}, {"q": 0.5, "r": 1.0, "price": 3.0})
    code = main(["optimize", "--report", "r.json", "--price-bounds", "0:30", "--bound", "q=0:1",
                 "--objective", "profit", "--cost", "q=0.2"])
    assert code == 0
    sol = json.loads((workdir / "design.json").read_text())
    assert sol["attribute_levels"]["q"] == 1.0 and sol["attribute_levels"]["r"] == 1.0


def test_chain_recovery(workdir):
    main(["simulate", "--spec", "virtual-traveling-chain", "--n", "10000"])
    assert main(["chain", "--data", "choices.csv"]) == 0
    rep = json.loads((workdir / "chain.json").read_text())
    truth = json.loads((workdir / "truth.json").read_text())
    for name in ("rate", "latency"):
        assert abs(rep["effects"][name]["total"] - truth["betas"][name]) <= 1e-2
    for name, eff in rep["effects"].items():
        assert sum(eff["paths"].values()) == pytest.approx(eff["total"], abs=1e-12)


def test_chain_identity_matches_estimate(workdir):
    data = generate_dataset(named_spec("virtual-traveling-unit", population_size=3000))
    idx = data.schema.non_price_indices
    names = tuple(data.schema.names[k] for k in idx)
    with_constructs = ChoiceDataset(data.schema, data.attributes, data.chosen, True,
                                    data.attributes[:, :, idx], names)
    io.write_dataset(with_constructs, workdir / "id.csv")
    assert main(["chain", "--data", "id.csv"]) == 0
    assert main(["estimate", "--data", "id.csv"]) == 0
    chain = json.loads((workdir / "chain.json").read_text())["terminal"]["betas"]
    est = json.loads((workdir / "estimate.json").read_text())
    for name, b in est["betas"].items():
        assert abs(chain[name] - b) <= 2 * est["standard_errors"][name]


def test_chain_without_constructs(workdir):
    main(["simulate", "--spec", "virtual-traveling-default", "--n", "100"])
    assert main(["chain", "--data", "choices.csv"]) == 2


def test_config_file_and_override(workdir):
    (workdir / "run.ini").write_text("[simulate]\nspec = virtual-traveling-default\nn = 50\ndata = a.csv\n")
    assert main(["simulate", "--config", "run.ini"]) == 0
    assert len(io.read_dataset(workdir / "a.csv")) == 50
    assert main(["simulate", "--config", "run.ini", "--n", "70"]) == 0
    assert len(io.read_dataset(workdir / "a.csv")) == 70


def test_config_unknown_key(workdir):
    (workdir / "run.ini").write_text("[simulate]\nspec = virtual-traveling-default\ncolour = blue\n")
    assert main(["simulate", "--config", "run.ini"]) == 2
    (workdir / "run.ini").write_text("[nonsense]\nspec = x\n")
    assert main(["simulate", "--config", "run.ini"]) == 2


def test_seed_environment_fallback(workdir, monkeypatch):
    base = ["simulate", "--spec", "virtual-traveling-default", "--n", "200"]
    main(base + ["--seed", "5"])
    flagged = digest(workdir / "choices.csv")
    monkeypatch.setenv("CHOICEFORGE_SEED", "5")
    main(base)
    assert digest(workdir / "choices.csv") == flagged
    monkeypatch.setenv("CHOICEFORGE_SEED", "6")
    main(base)
    assert digest(workdir / "choices.csv") != flagged


def test_bad_command_line(workdir):
    with pytest.raises(SystemExit) as info:
        main(["estimate", "--model", "probit"])
    assert info.value.code == 2


def test_curve_format(tmp_path):
    io.write_curve(tmp_path / "c.csv", [(1.0 / 3.0, 0.1234567891234, 0.5, 0.0)])
    line = (tmp_path / "c.csv").read_text().splitlines()[1]
    assert line == "0.333333333,0.123456789,0.5,0.166666667"


def test_schema_roundtrip_through_report(workdir):
    write_report(workdir / "r.json", {"q": 0.5, "price": -0.25}, {"q": 1.0, "price": 2.0})
    params = io.params_from_dict(json.loads((workdir / "r.json").read_text()), ["q", "price"])
    assert params.schema == AttributeSchema(("q", "price"))
