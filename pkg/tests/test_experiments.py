import json

import jsonschema
import pytest

from singsusp import cli
from singsusp.experiments import (
    STATEMENTS,
    VERDICTS,
    Scenario,
    build_brake,
    bundled,
    bundled_suite,
    load_scenario,
    run_scenario,
    scenario_schema,
)
from singsusp.singular import PointList, WholeFiber
from singsusp.systems import CatMap, FullShift, UsageError

FAST = "expansive-transfer-shift"


class TestSuite:
    def test_size_and_names_unique(self):
        names = [sc.name for sc in bundled_suite()]
        assert len(names) >= 9
        assert len(set(names)) == len(names)

    def test_every_scenario_cites_a_statement(self):
        for sc in bundled_suite():
            assert sc.statement in STATEMENTS
            assert sc.citation.startswith(sc.statement + ": ")
            assert len(STATEMENTS[sc.statement]) > 10

    def test_every_verdict_kind_exercised(self):
        seen = {v for sc in bundled_suite() for v in sc.expected}
        assert seen == set(VERDICTS)

    def test_bundled_copies_are_fresh(self):
        a = bundled(FAST)
        a.grids["pairs"] = -1
        assert bundled(FAST).grids.get("pairs") != -1

    def test_schema_valid_round_trip(self):
        for sc in bundled_suite():
            obj = json.loads(json.dumps(sc.to_json()))
            jsonschema.validate(obj, scenario_schema())
            assert Scenario.from_json(obj) == sc


class TestValidation:
    def base(self):
        return bundled(FAST).to_json()

    @pytest.mark.parametrize("mutate", [
        lambda o: o.pop("statement"),
        lambda o: o.update(expected=["Maybe"]),
        lambda o: o.update(analyses=["unknown_analysis"]),
        lambda o: o.update(extra=1),
        lambda o: o.update(measure={"kind": "Dirac"}),
    ])
    def test_rejected(self, mutate):
        obj = self.base()
        mutate(obj)
        with pytest.raises(UsageError):
            Scenario.from_json(obj)

    def test_unknown_statement(self):
        obj = self.base()
        obj["statement"] = "no-such-statement"
        with pytest.raises(UsageError, match="statement"):
            Scenario.from_json(obj)

    def test_load_missing(self):
        with pytest.raises(UsageError):
            load_scenario("/nonexistent/scenario.json")

    def test_load_file(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(self.base()))
        assert load_scenario(str(path)) == bundled(FAST)


class TestBrakes:
    def test_random_points_deterministic(self):
        spec = {"profile": {"power": 1, "radius": 0.005}, "random_points": 3}
        a, b = build_brake(spec, CatMap(), 4), build_brake(spec, CatMap(), 4)
        assert isinstance(a.singular_set, PointList) and len(a.singular_set.points) == 3
        assert a.singular_set.points == b.singular_set.points

    def test_whole_fiber(self):
        spec = {"profile": {"exp": 0.005, "radius": 0.005}, "singular_set": {"fiber": 0.5}}
        assert isinstance(build_brake(spec, FullShift(2), 0).singular_set, WholeFiber)

    def test_none(self):
        assert build_brake(None, CatMap(), 0).empty


class TestRun:
    def test_deterministic_bytes(self):
        a = run_scenario(bundled(FAST)).dumps()
        b = run_scenario(bundled(FAST)).dumps()
        assert a == b
        obj = json.loads(a)
        assert obj["passed"] and obj["version"] == 1

    def test_reports_failed_verdict(self):
        sc = bundled(FAST)
        sc.expected = ["NonExpansive"]
        rep = run_scenario(sc)
        assert not rep.passed
        assert rep.verdicts[0]["verdict"] == "NonExpansive" and not rep.verdicts[0]["passed"]


class TestCLI:
    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        names = [d["name"] for d in json.loads(capsys.readouterr().out)]
        assert FAST in names

    def test_run_exit_code_and_lines(self, capsys, tmp_path):
        out = tmp_path / "r.json"
        assert cli.main(["run", FAST, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["name"] == FAST
        assert f"PASS {FAST}" in capsys.readouterr().err

    def test_run_failing_file_exits_one(self, capsys, tmp_path):
        obj = bundled(FAST).to_json()
        obj["expected"] = ["NonExpansive"]
        path = tmp_path / "s.json"
        path.write_text(json.dumps(obj))
        assert cli.main(["run", str(path)]) == 1
        assert "FAIL" in capsys.readouterr().err

    def test_usage_error_exits_two(self, capsys):
        assert cli.main(["run", "no-such-scenario"]) == 2
        assert cli.main(["run"]) == 2

    def test_metric(self, capsys):
        p = '{"base": [0.1, 0.2], "height": 0.5}'
        assert cli.main(["metric", "--system", '{"kind": "CatMap"}', p, p]) == 0
        assert json.loads(capsys.readouterr().out)["distance"] == 0.0

    def test_entropy_map_cylinders(self, capsys):
        code = cli.main(["entropy", "map", "--system", '{"kind": "FullShift", "params": {"k": 2}}',
                         "--measure", '{"kind": "Cylinders"}', "--grid", "2:8", "--eps", "0.5"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["headline"] == pytest.approx(0.6931, abs=0.05)

    def test_subshift_build_and_certify(self, capsys, tmp_path):
        out = tmp_path / "sh.json"
        assert cli.main(["subshift", "build", "--target", "0.2", "--out", str(out)]) == 0
        capsys.readouterr()
        assert cli.main(["subshift", "certify", str(out)]) == 0
        assert json.loads(capsys.readouterr().out)["result"] == "Certified"

    def test_expansive_map(self, capsys):
        code = cli.main(["expansive", "map", "--system", '{"kind": "CircleRotation", "params": {"angle": 0.0}}',
                         "--pairs", "5", "--e", "0.1", "--lo", "0.01"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["result"] == "Counterexample"
