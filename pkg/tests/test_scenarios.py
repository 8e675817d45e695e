"""Strict scenario-file parsing."""

import textwrap

import numpy as np
import pytest

import torusdrift as td
from torusdrift.errors import ScenarioError
from torusdrift.scenario import DEFAULTS, parse_scenarios

MINIMAL = """
schema_version = 1

[[scenario]]
id = "tiny"
family = "direction"
dim = 2
xi = ["1", "0"]
starts = [["0", "0"]]

[scenario.a]
const = "2"
terms = [{ k = [1, 0], cos = "0", sin = "1" }]
"""


def write(tmp_path, text, name="scen.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


class TestParse:
    def test_minimal_with_defaults(self, tmp_path):
        scenarios = parse_scenarios(write(tmp_path, MINIMAL))
        assert len(scenarios) == 1
        sc = scenarios[0]
        assert sc.id == "tiny"
        assert sc.t_end == DEFAULTS["t_end"]
        assert sc.rtol == DEFAULTS["rtol"]
        assert sc.atol == DEFAULTS["atol"]
        assert sc.grid_n == DEFAULTS["grid_n"]
        assert sc.search_bound == DEFAULTS["search_bound"]
        assert isinstance(sc.spec, td.DirectionField)
        assert np.allclose(sc.starts[0], [0.0, 0.0])

    def test_unknown_key_is_named(self, tmp_path):
        bad = MINIMAL.replace('starts = [["0", "0"]]',
                              'starts = [["0", "0"]]\nintegratr = "rk45"')
        with pytest.raises(ScenarioError, match="integratr"):
            parse_scenarios(write(tmp_path, bad))

    def test_duplicate_id_rejected(self, tmp_path):
        doubled = MINIMAL + MINIMAL.split("schema_version = 1", 1)[1]
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_scenarios(write(tmp_path, doubled))

    def test_number_instead_of_decimal_string(self, tmp_path):
        bad = MINIMAL.replace('const = "2"', "const = 2.0")
        with pytest.raises(ScenarioError, match="decimal string"):
            parse_scenarios(write(tmp_path, bad))

    def test_stray_family_key_rejected(self, tmp_path):
        bad = MINIMAL + '\nridge = "1"\n'
        with pytest.raises(ScenarioError, match="ridge"):
            parse_scenarios(write(tmp_path, bad))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="not found"):
            parse_scenarios(tmp_path / "absent.toml")

    def test_wrong_schema_version(self, tmp_path):
        bad = MINIMAL.replace("schema_version = 1", "schema_version = 99")
        with pytest.raises(ScenarioError, match="schema_version"):
            parse_scenarios(write(tmp_path, bad))

    def test_bad_frequency(self, tmp_path):
        bad = MINIMAL.replace("k = [1, 0]", "k = [0.3, 0]")
        with pytest.raises(ScenarioError, match="half-integer"):
            parse_scenarios(write(tmp_path, bad))

    def test_error_message_carries_scenario_context(self, tmp_path):
        bad = MINIMAL.replace('family = "direction"', 'family = "vortex"')
        with pytest.raises(ScenarioError, match=r"scenario\[0\].*family"):
            parse_scenarios(write(tmp_path, bad))


class TestGallery:
    def test_bundled_gallery_has_ten_scenarios(self):
        from importlib import resources
        with resources.as_file(resources.files("torusdrift.data")
                               / "gallery.toml") as p:
            scenarios = parse_scenarios(p)
        assert len(scenarios) == 10
        families = {sc.family for sc in scenarios}
        assert families == {"direction", "rectified", "current", "oned",
                            "generic"}
        ids = [sc.id for sc in scenarios]
        assert len(set(ids)) == 10
