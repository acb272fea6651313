import json
from pathlib import Path

import pytest

from egpf.scenario_io import ScenarioError, line_of, load_scenario, load_schema, locate, scenario_from_dict

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.json") if p.name != "scenario.schema.json"))
def test_shipped_scenarios_load(name):
    sc = load_scenario(SCENARIOS / name)
    assert sc.config.horizon >= 1


def test_shipped_schema_matches_package_copy():
    assert json.loads((SCENARIOS / "scenario.schema.json").read_text()) == load_schema()


def test_example_scenario_contents():
    sc = load_scenario(SCENARIOS / "example_3_1.json")
    cfg = sc.config
    assert cfg.true_type_index == 0
    assert cfg.forced_responses == (1, 0)
    assert cfg.likelihood_overrides[0].values == (0.65, 0.20, 0.40)


def test_population_block():
    sc = load_scenario(SCENARIOS / "fig4_competitor_entry.json")
    assert sc.population is not None
    traj = sc.population.run(sc.config.game)
    assert traj.states[-1][2] == traj.states[-1].max()
    assert sc.reconstructed


def write(tmp_path, text):
    p = tmp_path / "s.json"
    p.write_text(text)
    return p


def test_missing_file():
    with pytest.raises(ScenarioError, match="scenario not found"):
        load_scenario("/nonexistent/scenario.json")


def test_syntax_error_has_line(tmp_path):
    p = write(tmp_path, '{\n  "game": {"builtin": "oncology"},\n  "horizon": 5,,\n}\n')
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert err.value.line == 3
    assert str(err.value).startswith(f"{p}:3:")


def test_schema_error_located_on_its_line(tmp_path):
    text = '{\n  "game": {"builtin": "oncology"},\n  "seed": 1,\n  "horizon": -4\n}\n'
    with pytest.raises(ScenarioError) as err:
        load_scenario(write(tmp_path, text))
    assert err.value.line == 4
    assert "horizon" in err.value.message


def test_unknown_key_rejected(tmp_path):
    text = '{\n  "game": {"builtin": "oncology"},\n  "horizn": 4\n}\n'
    with pytest.raises(ScenarioError, match="horizn"):
        load_scenario(write(tmp_path, text))


def test_unknown_response_name_located(tmp_path):
    text = (
        '{\n  "game": {"builtin": "oncology"},\n  "forced_responses": [\n'
        '    "adopt",\n    "maybe"\n  ]\n}\n'
    )
    with pytest.raises(ScenarioError) as err:
        load_scenario(write(tmp_path, text))
    assert err.value.line == 5
    assert "unknown response 'maybe'" in err.value.message


def test_unknown_action_and_bad_override_length(tmp_path):
    base = {"game": {"builtin": "oncology"}}
    bad_action = dict(base, likelihood_overrides=[{"action": "a9", "response": "defer", "values": [0.1, 0.2, 0.3]}])
    with pytest.raises(ScenarioError, match="unknown action"):
        scenario_from_dict(bad_action)
    short = dict(base, likelihood_overrides=[{"action": "a2_kol", "response": "defer", "values": [0.1, 0.2]}])
    with pytest.raises(ScenarioError, match="expected 3 values"):
        scenario_from_dict(short)


def test_true_type_out_of_range():
    with pytest.raises(ScenarioError, match="true_type"):
        scenario_from_dict({"game": {"builtin": "oncology"}, "true_type": 5})


def test_inline_game(onc):
    data = json.loads(onc.to_json())
    sc = scenario_from_dict({"game": data, "horizon": 3})
    assert sc.config.game.pharma_actions == onc.pharma_actions


def test_locate_nested_paths():
    text = '{"a": [1, {"b": "x,y"}, 3], "c": {"d": [true, null]}}'
    assert text[locate(text, ["a", 1, "b"]):].startswith('"x,y"')
    assert text[locate(text, ["c", "d", 1]):].startswith("null")
    assert line_of("a\nb\nc", 4) == 3


@pytest.mark.parametrize("policy", ["stackelberg", "a2_kol", 1, [0.5, 0.5, 0.0]])
def test_population_policy_forms(policy):
    sc = scenario_from_dict({"game": {"builtin": "market"}, "population": {"T": 1.0, "policy": policy}})
    traj = sc.population.run(sc.config.game)
    assert len(traj) == 21
