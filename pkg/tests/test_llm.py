import json
import logging
import threading

import pytest

from stub_server import StubServer
from timing_triage.injector import load_case
from timing_triage.llm import (
    API_KEY_ENV,
    SYSTEM_PROMPT,
    CaseBook,
    HttpStatus,
    LlmConfig,
    LlmGateway,
    NoCodeBlock,
    NoScriptedResponse,
    NotParseable,
    RunLog,
    Transport,
    complete,
    extract_code,
)
from timing_triage.templates import RepairPrompt

from conftest import DATASET

CASE_ID = "cdc.single_bit_trans.simple.01"
MODULE = "module m(input a, output b);\n  assign b = a;\nendmodule"


def repair_prompt(case_id=CASE_ID, design=MODULE, **meta):
    return RepairPrompt("please fix", "repair_cdc", case_id, "single_bit_trans", design, metadata={"kind": "repair", **meta})


def cause_prompt(case_id=CASE_ID):
    return RepairPrompt("why?", "cause_analysis", case_id, design_code=MODULE, metadata={"kind": "cause", "endpoint": "q", "vtype": "cdc"})


def no_sleep(_seconds):
    pass


# ---- extract_code --------------------------------------------------------------


def test_extract_first_fence():
    assert extract_code("Here:\n```verilog\nmodule m; endmodule\n```") == "module m; endmodule"


def test_extract_only_first_of_two_fences():
    text = f"```verilog\n{MODULE}\n```\nand also\n```\nmodule other; endmodule\n```"
    assert extract_code(text) == MODULE


def test_extract_bare_module():
    assert extract_code(f"\n{MODULE}\n") == MODULE


def test_prose_only():
    with pytest.raises(NoCodeBlock):
        extract_code("I think you should add a register stage.")


def test_fenced_syntax_error():
    with pytest.raises(NotParseable):
        extract_code("```verilog\nmodule m(input a; endmodule\n```")


# ---- mocks -------------------------------------------------------------------------


def test_kb_golden_returns_stored_golden():
    case = load_case(DATASET / CASE_ID)
    book = CaseBook()
    book.register(case.case_id, case.golden, case.reference_cause)
    gw = LlmGateway(LlmConfig(mode="mock", mock_policy="kb_golden"), cases=book)
    assert extract_code(gw.complete(repair_prompt())) == case.golden.rstrip("\n")
    assert gw.complete(cause_prompt()) == case.reference_cause


def test_kb_golden_unknown_case():
    gw = LlmGateway(LlmConfig(mode="mock", mock_policy="kb_golden"))
    with pytest.raises(NoScriptedResponse):
        gw.complete(repair_prompt("nobody"))


def test_echo_returns_design_unchanged():
    gw = LlmGateway(LlmConfig(mode="mock", mock_policy="echo"))
    assert extract_code(gw.complete(repair_prompt())) == MODULE


def test_scripted_in_order_then_exhausted(tmp_path):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({CASE_ID: {"cause": "because", "repair": ["first", "second"]}, "other": "only"}))
    gw = LlmGateway(LlmConfig(mode="mock", mock_policy="scripted", scripted_path=str(script)))
    assert gw.complete(cause_prompt()) == "because"
    assert [gw.complete(repair_prompt()) for _ in range(2)] == ["first", "second"]
    with pytest.raises(NoScriptedResponse):
        gw.complete(repair_prompt())
    assert gw.complete(repair_prompt("other")) == "only"
    with pytest.raises(NoScriptedResponse):
        gw.complete(repair_prompt("missing"))


def test_mock_is_deterministic():
    outs = []
    for _ in range(2):
        log = RunLog()
        gw = LlmGateway(LlmConfig(mode="mock", mock_policy="echo"), log)
        gw.complete(repair_prompt())
        outs.append([json.dumps(e.__dict__, sort_keys=True) for e in log.exchanges])
    assert outs[0] == outs[1]


# ---- run log ---------------------------------------------------------------------


def test_one_exchange_per_call_even_on_error(tmp_path):
    log = RunLog(tmp_path / "run.jsonl")
    gw = LlmGateway(LlmConfig(mode="mock", mock_policy="kb_golden"), log)
    gw.complete(cause_prompt())
    with pytest.raises(NoScriptedResponse):
        gw.complete(repair_prompt())
    lines = (tmp_path / "run.jsonl").read_text().splitlines()
    assert len(log) == len(lines) == 2
    first = json.loads(lines[0])
    assert (first["kind"], first["system"], first["user"]) == ("cause", SYSTEM_PROMPT, "why?")
    assert json.loads(lines[1])["error"]


def test_run_log_under_threads(tmp_path):
    log = RunLog(tmp_path / "run.jsonl")
    gw = LlmGateway(LlmConfig(mode="mock", mock_policy="echo"), log)
    threads = [threading.Thread(target=lambda: [gw.complete(repair_prompt()) for _ in range(25)]) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    lines = (tmp_path / "run.jsonl").read_text().splitlines()
    assert len(log) == len(lines) == 200
    assert all(json.loads(l)["case_id"] == CASE_ID for l in lines)


# ---- config ----------------------------------------------------------------------


@pytest.mark.parametrize("kw", [{"temperature": 2.5}, {"retries": -1}, {"mode": "grpc"}, {"mock_policy": "oracle"},
                                {"mock_policy": "scripted"}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        LlmConfig(**kw)


def test_selectors():
    base = LlmConfig()
    assert base.temperature == 0.7
    assert base.with_selector("http").mode == "http"
    assert base.with_selector("mock:echo").mock_policy == "echo"
    s = base.with_selector("mock:scripted:/tmp/x.json")
    assert (s.mock_policy, s.scripted_path) == ("scripted", "/tmp/x.json")
    with pytest.raises(ValueError):
        base.with_selector("carrier-pigeon")
    with pytest.raises(ValueError):
        LlmConfig.from_dict({"api_key": "nope"})


# ---- http ------------------------------------------------------------------------


def http_cfg(url, **kw):
    return LlmConfig(mode="http", endpoint=url, timeout_s=5.0, retries=3, backoff_s=0.01, **kw)


def test_retry_after_two_server_errors(caplog, tmp_path):
    with StubServer([(500, ""), (500, ""), (200, "```verilog\nmodule m; endmodule\n```")]) as stub:
        log = RunLog()
        gw = LlmGateway(http_cfg(stub.url), log, sleep=no_sleep)
        with caplog.at_level(logging.WARNING, logger="timing_triage.llm"):
            text = gw.complete(repair_prompt())
        gw.close()
    assert extract_code(text) == "module m; endmodule"
    assert len(stub.requests) == 3
    (exchange,) = log.exchanges
    assert exchange.attempt == 3
    assert len([r for r in caplog.records if "retrying" in r.getMessage()]) == 2


def test_request_shape_and_api_key(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "sekrit")
    with StubServer([(200, "ok")]) as stub:
        out = complete(http_cfg(stub.url, model="test-model"), repair_prompt())
    assert out == "ok"
    (body,) = stub.requests
    assert body["model"] == "test-model" and body["temperature"] == 0.7
    assert body["messages"] == [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": "please fix"}]
    assert stub.headers[0]["Authorization"] == "Bearer sekrit"


def test_client_error_is_not_retried():
    with StubServer([(404, ""), (200, "late")]) as stub:
        gw = LlmGateway(http_cfg(stub.url), sleep=no_sleep)
        with pytest.raises(HttpStatus) as exc:
            gw.complete(repair_prompt())
    assert exc.value.code == 404
    assert len(stub.requests) == 1


def test_retries_exhausted():
    with StubServer([(503, "")] * 4) as stub:
        log = RunLog()
        gw = LlmGateway(http_cfg(stub.url), log, sleep=no_sleep)
        with pytest.raises(HttpStatus):
            gw.complete(repair_prompt())
    assert len(stub.requests) == 4
    assert log.exchanges[0].attempt == 4 and log.exchanges[0].error


def test_backoff_is_exponential():
    delays = []
    with StubServer([(500, "")] * 3 + [(200, "ok")]) as stub:
        gw = LlmGateway(http_cfg(stub.url), sleep=delays.append)
        gw.complete(repair_prompt())
    assert delays == pytest.approx([0.01, 0.02, 0.04])


def test_transport_error():
    gw = LlmGateway(LlmConfig(mode="http", endpoint="http://127.0.0.1:9/none", retries=1, timeout_s=2.0), sleep=no_sleep)
    with pytest.raises(Transport):
        gw.complete(repair_prompt())
