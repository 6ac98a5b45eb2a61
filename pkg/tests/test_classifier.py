import copy
import json

import pytest

from timing_triage.classifier import Classifier, extract_params, identify_scenario
from timing_triage.config import ConfigError, default_config
from timing_triage.injector import load_case
from timing_triage.kb import UNKNOWN

from conftest import FIXTURES, dataset_case_dirs

CORPUS = json.loads((FIXTURES / "classifier" / "corpus.json").read_text())
PRIORITY = json.loads((FIXTURES / "classifier" / "priority.json").read_text())

DEPTH_TEXT = "setup slack -1.200 ns on a path with 12 logic levels through `acc_r`"
BUS_TEXT = "8-bit bus crosses from clk_a to clk_b without synchronizer"


def test_extract_slack_depth_signal():
    p = extract_params(DEPTH_TEXT)
    assert p.slack_values == (-1.2,)
    assert p.path_depth == 12
    assert p.signal_names == ("acc_r",)
    assert "setup" in p.keyword_hits


def test_extract_width_clocks_keywords():
    p = extract_params(BUS_TEXT)
    assert p.bit_width == 8
    assert set(p.clock_names) == {"clk_a", "clk_b"}
    assert {"cross", "synchronizer", "without"} <= p.keyword_hits


def test_no_numerals():
    p = extract_params("no numerals here")
    assert (p.slack_values, p.path_depth, p.mux_depth, p.bit_width) == ((), None, None, None)


def test_named_identifiers():
    p = extract_params("The register sum_q and signal `en` feed clock clk_fast.")
    assert {"sum_q", "en"} <= set(p.signal_names)
    assert "clk_fast" in p.clock_names


def test_empty_text_rejected():
    with pytest.raises(ValueError):
        extract_params("   ")


def test_spec_traces():
    assert identify_scenario(DEPTH_TEXT) == "long_comb_chain"
    assert identify_scenario(BUS_TEXT) == "multi_bits_trans"
    assert identify_scenario("the moon is made of cheese") == UNKNOWN


def test_labeled_corpus_scores_eight_of_eight():
    assert len(CORPUS) == 8
    assert sorted({c["label"] for c in CORPUS} - {UNKNOWN}) == sorted(
        ["single_bit_trans", "multi_bits_trans", "short_logic_path", "low_pipe_stage", "deep_mux", "long_comb_chain"]
    )
    wrong = [(c["label"], identify_scenario(c["text"])) for c in CORPUS if identify_scenario(c["text"]) != c["label"]]
    assert wrong == []


@pytest.mark.parametrize("case", PRIORITY, ids=lambda c: c["label"])
def test_cdc_outranks_setup(case):
    clf = Classifier.from_config()
    params = clf.extract_params(case["text"])
    setup_rules = [r for r in clf.rules if r.scenario in ("long_comb_chain", "deep_mux", "low_pipe_stage")]
    assert any(clf.matches(r.when, params) for r in setup_rules), "fixture must be ambiguous"
    assert identify_scenario(case["text"]) == case["label"]


@pytest.mark.parametrize("case_dir", dataset_case_dirs(), ids=lambda p: p.name)
def test_dataset_reference_causes(case_dir):
    case = load_case(case_dir)
    assert identify_scenario(case.reference_cause) == case.subscenario


def test_deterministic():
    assert [identify_scenario(c["text"]) for c in CORPUS] == [identify_scenario(c["text"]) for c in CORPUS]


def test_swapped_priority_changes_outcome():
    cfg = copy.deepcopy(default_config())
    rules = cfg["classifier"]["rules"]
    for i, r in enumerate(rules):
        r["priority"] = len(rules) - i  # reverse order: setup scenarios first
    clf = Classifier.from_config(cfg)
    text = PRIORITY[0]["text"]
    assert identify_scenario(text) == "single_bit_trans"
    assert clf.identify(text) == "long_comb_chain"


def test_swapped_threshold_changes_outcome():
    cfg = copy.deepcopy(default_config())
    rule = next(r for r in cfg["classifier"]["rules"] if r["scenario"] == "long_comb_chain")
    rule["when"] = {"all": [{"keywords": ["setup"]}, {"param": "path_depth", "op": ">=", "value": 20}]}
    assert Classifier.from_config(cfg).identify(DEPTH_TEXT) == UNKNOWN


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c["rules"].pop(),
        lambda c: c["rules"].append(dict(c["rules"][0])),
        lambda c: c["rules"][0].update(scenario="fast_path"),
        lambda c: c["rules"][0].update(when={"keywords": ["nonexistent_stem"]}),
        lambda c: c["rules"][0].update(when={"param": "path_depth", "op": "~", "value": 1}),
        lambda c: c["rules"][0].update(when={"param": "colour", "op": "==", "value": 1}),
        lambda c: c["keywords"].update(setup=["("]),
    ],
)
def test_bad_rule_config(mutate):
    cfg = copy.deepcopy(default_config())
    mutate(cfg["classifier"])
    with pytest.raises(ConfigError):
        Classifier.from_config(cfg)
