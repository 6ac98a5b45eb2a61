import json
import subprocess
import sys

import pytest

from timing_triage import __version__
from timing_triage.cli import main

from conftest import DATASET, FIXTURES

FAULTY = str(DATASET / "setup.long_comb_chain.simple.01" / "faulty.v")
GOLDEN = str(DATASET / "setup.long_comb_chain.simple.01" / "golden.v")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_violating_design(capsys):
    code, out, _ = run(capsys, "analyze", FAULTY)
    assert code == 1
    assert out.startswith("VIOLATION setup") and "Slack:      -4.000 ns" in out


def test_analyze_clean_design(capsys):
    code, out, _ = run(capsys, "analyze", GOLDEN)
    assert (code, out) == (0, "")


def test_analyze_with_constraints_file(capsys, tmp_path):
    cons = tmp_path / "c.txt"
    cons.write_text("clock clk 3\n")
    code, out, _ = run(capsys, "analyze", str(FIXTURES / "sta" / "chain3.v"), "--constraints", str(cons))
    assert code == 1 and "Slack:      -1.000 ns" in out
    cons.write_text("clock other 3\n")
    code, _, err = run(capsys, "analyze", str(FIXTURES / "sta" / "chain3.v"), "--constraints", str(cons))
    assert code == 2 and "clk" in err


def test_analyze_dump_graph(capsys):
    code, out, _ = run(capsys, "analyze", str(FIXTURES / "sta" / "chain3.v"), "--period", "5", "--dump-graph")
    assert code == 0 and "Register r_dst" in out and "-> r_dst (Data)" in out


def test_analyze_errors(capsys, tmp_path):
    assert run(capsys, "analyze", str(tmp_path / "nope.v"))[0] == 2
    bad = tmp_path / "bad.v"
    bad.write_text("module m(input a); assign b = a; endmodule")
    code, _, err = run(capsys, "analyze", str(bad))
    assert code == 2 and "unresolved identifier 'b'" in err


def test_inject_writes_case(capsys, tmp_path):
    seed = str(FIXTURES.parent.parent / "src" / "timing_triage" / "data" / "seeds" / "deep_mux.v")
    code, out, _ = run(capsys, "inject", "--seed", seed, "--spec", '{"subscenario": "deep_mux", "index": 3}',
                       "--out", str(tmp_path))
    assert code == 0 and "setup.deep_mux.simple.03" in out
    assert (tmp_path / "setup.deep_mux.simple.03" / "case.json").is_file()
    spec = tmp_path / "spec.json"
    spec.write_text('{"subscenario": "deep_mux", "mux_depth": 4}')
    assert run(capsys, "inject", "--seed", seed, "--spec", str(spec), "--out", str(tmp_path))[0] == 2


def test_debug_exit_codes(capsys, tmp_path):
    case = str(DATASET / "hold.short_logic_path.simple.01")
    code, out, _ = run(capsys, "debug", case, "--llm", "mock:kb_golden", "--out", str(tmp_path), "--log", str(tmp_path / "log.jsonl"))
    assert code == 0 and json.loads(out)["success"] is True
    assert (tmp_path / "hold.short_logic_path.simple.01" / "repaired.v").is_file()
    assert len((tmp_path / "log.jsonl").read_text().splitlines()) == 2
    code, out, _ = run(capsys, "debug", case, "--llm", "mock:echo", "--max-attempts", "2")
    assert code == 1 and json.loads(out)["attempts_used"] == 2
    assert run(capsys, "debug", case, "--llm", "telepathy")[0] == 2


def test_eval_exit_codes(capsys, tmp_path):
    out_json = tmp_path / "summary.json"
    code, out, _ = run(capsys, "eval", str(DATASET), "--json", str(out_json))
    assert code == 0 and "overall" in out and "12/12" in out
    assert json.loads(out_json.read_text())["overall"]["fix_rate"] == "100.00%"
    code, out, _ = run(capsys, "eval", str(DATASET), "--llm", "mock:echo", "--max-attempts", "1")
    assert code == 1 and '"fix_rate": "0.00%"' in out
    assert run(capsys, "eval", str(tmp_path))[0] == 2


def test_kb_validate(capsys, tmp_path):
    code, out, _ = run(capsys, "kb", "validate")
    assert code == 0 and out.strip().endswith("entries valid")
    (tmp_path / "setup" / "deep_mux").mkdir(parents=True)
    (tmp_path / "setup" / "deep_mux" / "001.json").write_text("{}")
    code, _, err = run(capsys, "kb", "validate", str(tmp_path))
    assert code == 1 and "invalid" in err


def test_classify(capsys, tmp_path, monkeypatch):
    cause = tmp_path / "cause.txt"
    cause.write_text("setup slack -1.200 ns on a path with 12 logic levels through `acc_r`")
    assert run(capsys, "classify", "--cause", str(cause)) == (0, "long_comb_chain\n", "")
    code, out, _ = run(capsys, "classify", "--cause", str(cause), "--params")
    assert code == 0 and json.loads(out)["params"]["path_depth"] == 12
    cause.write_text("  \n")
    assert run(capsys, "classify", "--cause", str(cause))[0] == 2


def test_config_rejects_secrets(capsys, tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"llm": {"api_key": "sk-123"}}))
    code, _, err = run(capsys, "--config", str(conf), "kb", "validate")
    assert code == 2 and "TIMING_TRIAGE_API_KEY" in err


def test_config_overrides_delay_model(capsys, tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"delay_model": {"add": 0.1}}))
    code, out, _ = run(capsys, "--config", str(conf), "analyze", FAULTY)
    assert code == 0 and out == ""


def test_dataset_build(capsys, tmp_path):
    code, out, _ = run(capsys, "dataset", "build", "--out", str(tmp_path))
    assert code == 0 and len(out.split()) == 12
    assert (tmp_path / "manifest.json").read_text() == (DATASET / "manifest.json").read_text()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "timing_triage", "analyze", GOLDEN], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
