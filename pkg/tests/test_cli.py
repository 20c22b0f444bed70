import csv
import io
import json
import subprocess
import sys

import pytest

from cbrw.cli import ESTIMATORS, build_parser, main

from conftest import ALMOST_SURE

SR = {
    "mu_c": [{"k": 4, "p": 1}],
    "p_c": 0.9,
    "mu_0": [{"k": 1, "p": "9/10"}, {"k": 2, "p": "1/10"}],
    "p_0": 0.8,
    "layout": "half_line",
}
MARCH = {"mu_c": [{"k": 1, "p": 1}], "p_c": ALMOST_SURE, "mu_0": [{"k": 1, "p": 1}], "p_0": 0.5}


@pytest.fixture
def config(tmp_path):
    def write(doc, name="cfg.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return write


def invoke(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    return list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))


def test_classify_strongly_recurrent(capsys, config):
    code, out, _ = invoke(capsys, "classify", "--config", config(SR), "--seed", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["report"]["kind"] == "strongly_recurrent"
    assert doc["report"]["decisive_quantities"]["pcmc_phil"] == pytest.approx(1.0739, abs=1e-4)
    assert doc["seed"] == 1 and doc["config"]["params"]["p_c"] == 0.9


def test_classify_critical_lp_flag(capsys, config):
    cfg = dict(SR, mu_c=[{"k": 2, "p": 1}], p_c=0.5)
    code, out, _ = invoke(capsys, "classify", "--config", config(cfg), "--seed", "1")
    report = json.loads(out)["report"]
    assert code == 0 and report["kind"] == "transient_right"
    assert [f["name"] for f in report["boundary_flags"]] == ["pcmc"]


def test_classify_invalid_pmf_lists_violations(capsys, config):
    cfg = dict(SR, mu_c=[{"k": 1, "p": 0.5}], p_c=1.5)
    code, out, err = invoke(capsys, "classify", "--config", config(cfg))
    assert code == 2 and out == ""
    assert "UnnormalizedPmf" in err and "ProbabilityOutOfRange" in err


def test_simulate_horizon_zero(capsys, config):
    code, out, _ = invoke(capsys, "simulate", "--config", config(SR), "--seed", "5", "--horizon", "0")
    assert code == 0
    rows = csv_rows(out)
    assert rows[0][:3] == ["t", "l", "r"] and len(rows) == 2
    assert out.splitlines()[0] == "# seed=5"


def test_simulate_fixed_seed_twice(tmp_path, capsys, config):
    cfg = config(SR)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert invoke(capsys, "simulate", "--config", cfg, "--seed", "0x2a", "--horizon", "40", "--out", str(out))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_march(capsys, config):
    _, out, _ = invoke(capsys, "simulate", "--config", config(MARCH), "--seed", "1", "--horizon", "12")
    rows = csv_rows(out)[1:]
    assert [r[0] for r in rows] == [r[1] for r in rows]


def test_generated_seed_is_printed_and_embedded(capsys, config):
    code, out, err = invoke(capsys, "simulate", "--config", config(SR), "--horizon", "3")
    assert code == 0
    seed = int(err.strip().split("=")[1])
    assert out.splitlines()[0] == f"# seed={seed}"
    # and the run can be regenerated from it
    again = invoke(capsys, "simulate", "--config", config(SR), "--horizon", "3", "--seed", str(seed))[1]
    assert again == out


def test_flags_override_config(capsys, config):
    cfg = config(dict(SR, horizon=7, seed=3))
    _, out, _ = invoke(capsys, "simulate", "--config", cfg)
    assert len(csv_rows(out)) == 9
    _, out, _ = invoke(capsys, "simulate", "--config", cfg, "--horizon", "2")
    assert len(csv_rows(out)) == 4 and out.startswith("# seed=3\n")


def test_estimate_phi_left(capsys, config):
    cfg = config({"mu_0": [{"k": 1, "p": 1}], "p_0": 0.7})
    code, out, _ = invoke(capsys, "estimate", "phi-left", "--config", cfg, "--seed", "2", "--trials", "20000")
    report = json.loads(out)["report"]
    assert code == 0
    assert report["closed_form"] == pytest.approx(0.428571, abs=1e-6)
    assert report["master_seed"] == 2


def test_estimate_unknown_name(capsys, config):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "phi-middle", "--config", config(SR)])
    assert exc.value.code == 2


def test_estimate_domain_error_is_usage(capsys, config):
    cfg = config({"mu_0": [{"k": 1, "p": 1}], "p_0": 0.5})
    code, _, err = invoke(capsys, "estimate", "phi-left", "--config", cfg, "--seed", "1", "--trials", "10")
    assert code == 2 and "strongly recurrent" in err


def test_runtime_overflow_exit_code(capsys, config):
    cfg = config(dict(SR, mu_c=[{"k": 4, "p": 1}], mu_0=[{"k": 4, "p": 1}], p_0=0.6))
    code, _, err = invoke(capsys, "simulate", "--config", cfg, "--seed", "1", "--horizon", "40", "--backend", "u64")
    assert code == 3 and "64" in err


def test_phase_three_by_three(capsys, config):
    code, out, _ = invoke(
        capsys, "phase", "--config", config(SR), "--seed", "1", "--x", "p_c=0.1:0.9:3", "--y", "m_c=1:4:3"
    )
    rows = csv_rows(out)
    assert code == 0 and rows[0] == ["p_c", "m_c", "kind", "flags"] and len(rows) == 10
    assert rows[-1][2] == "strongly_recurrent"


def test_phase_bad_axis(capsys, config):
    code, _, err = invoke(capsys, "phase", "--config", config(SR), "--x", "q=0:1:3", "--y", "m_c=1:4:3")
    assert code == 2 and "axis" in err


def test_gw_check_critical(capsys):
    code, out, _ = invoke(
        capsys, "gw-check", "--offspring", "0:1/2,2:1/2", "--trials", "200000", "--horizon", "200", "--seed", "4"
    )
    rows = csv_rows(out)
    assert code == 0 and rows[0][:4] == ["n", "estimate", "stderr", "trials"]
    assert rows[-1][0] == "200" and 1.8 <= float(rows[-1][4]) <= 2.2


def test_outputs_independent_of_threads(capsys, config):
    cfg = config({"mu_0": [{"k": 1, "p": 0.9}, {"k": 2, "p": 0.1}], "p_0": 0.8})
    one = invoke(capsys, "estimate", "phi-left", "--config", cfg, "--seed", "9", "--trials", "110000", "--threads", "1")[1]
    three = invoke(capsys, "estimate", "phi-left", "--config", cfg, "--seed", "9", "--trials", "110000", "--threads", "3")[1]
    assert one == three
    sr = config(SR, "sr.json")
    one = invoke(capsys, "estimate", "recurrence", "--config", sr, "--seed", "9", "--trials", "6", "--horizon", "30", "--threads", "1")[1]
    three = invoke(capsys, "estimate", "recurrence", "--config", sr, "--seed", "9", "--trials", "6", "--horizon", "30", "--threads", "3")[1]
    assert one == three


@pytest.mark.parametrize("command", ["classify", "simulate", "estimate", "phase", "gw-check"])
def test_help_lists_every_flag(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--trials", "--horizon", "--threads", "--out", "--format", "--backend"):
        assert flag in text
    if command == "estimate":
        assert all(name in text for name in ESTIMATORS)


def test_unknown_flag_is_an_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--colour", "red"])
    assert exc.value.code == 2


def test_installed_script_runs(config):
    proc = subprocess.run(
        [sys.executable, "-m", "cbrw.cli", "classify", "--config", config(SR), "--seed", "1", "--format", "csv"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "kind,strongly_recurrent" in proc.stdout


def test_parser_builds():
    assert build_parser().prog == "cbrw"
