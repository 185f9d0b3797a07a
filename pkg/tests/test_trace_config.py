import json

import pytest
from hypothesis import given, settings, strategies as st

from priority_sim.config import ConfigError, Requirement, RunConfig, load_config
from priority_sim.engine import run
from priority_sim.poset import PosetSpec
from priority_sim.scenarios import SCENARIOS, get_scenario, random_config
from priority_sim.trace import Trace, TraceError, TraceWriter, emit_trace, load_trace, parse_trace


def test_writer_enforces_stage_order():
    w = TraceWriter({"name": "x"})
    w.emit("act", node="")
    rec = w.end_stage(1, ["w0"], 1)
    assert rec["events"] == [{"node": "", "type": "act"}]
    with pytest.raises(TraceError):
        w.end_stage(1, [], 1)


def test_round_trip(tmp_path):
    trace = run(get_scenario("single-R", stages=40)).trace
    path = tmp_path / "t.jsonl"
    emit_trace(trace, path)
    back = load_trace(path)
    assert back == trace
    assert back.digest() == trace.digest()


def test_empty_file(tmp_path):
    path = tmp_path / "e.jsonl"
    path.write_text("")
    assert load_trace(path) == Trace()


def test_malformed_lines():
    good = Trace({"a": 1}, [{"stage": 1, "path": [], "length": 1, "events": []}]).text()
    with pytest.raises(TraceError, match="line 2"):
        parse_trace(good[:-5])
    with pytest.raises(TraceError, match="line 3: header"):
        parse_trace(good + '{"header": {}}\n')
    with pytest.raises(TraceError, match="lacks"):
        parse_trace('{"stage": 1}\n')
    with pytest.raises(TraceError, match="out of order"):
        parse_trace(good + '{"stage": 1, "path": [], "events": []}\n')


def test_keys_sorted_and_compact():
    line = Trace({"b": 1, "a": 2}).lines()[0]
    assert line == '{"header":{"a":2,"b":1}}'


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_scenario_configs_round_trip(name):
    cfg = get_scenario(name)
    assert RunConfig.from_json(json.loads(json.dumps(cfg.to_json()))).to_json() == cfg.to_json()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_random_configs_valid(seed):
    cfg = random_config(seed)
    assert cfg.validate() == []
    assert len(cfg.poset.elements) <= 4 and len(cfg.roster) <= 6 and cfg.stages <= 300


def test_validation_lists_every_error():
    P = PosetSpec.build(["q", "p"], [("q", "p")], partition0=["p"])
    cfg = RunConfig(P, -1, [
        Requirement("T", 0, "q", "oracleCopycat"),
        Requirement("R", 0, "p", "mapCommit"),
        Requirement("N", 0, "z", "convergeAt"),
        Requirement("S", 0, None, "nothing"),
        Requirement("X", 0, None, "never"),
    ], [0, 9])
    errors = cfg.validate()
    assert len(errors) == 7
    with pytest.raises(ConfigError) as exc:
        cfg.check()
    assert exc.value.errors == errors


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(get_scenario("single-N").to_json()))
    assert load_config(path).roster[0].label == "N(0,p)"
    path.write_text("{oops")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(path)
