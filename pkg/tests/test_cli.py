import json
from importlib.resources import files

import jsonschema
import pytest

from gwtaut.cli import main
from gwtaut.dsl import builtin_path

SCHEMA = json.loads(files("gwtaut").joinpath(
    "data", "report.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    return code, doc


def test_check_mumford_json(capsys):
    code, doc = run_json(capsys, "check", "--equation", "mumford")
    assert code == 0 and doc["status"] == "proved"


def test_check_s_action(capsys):
    code, doc = run_json(capsys, "check", "--equation", "trr1",
                         "--action", "s")
    assert code == 0 and doc["action"] == "s"


def test_check_failing_file(tmp_path, capsys):
    bad = tmp_path / "bad.gw"
    bad.write_text(builtin_path("mumford").read_text().replace("7/10", "7/11"))
    code, doc = run_json(capsys, "check", "--equation", str(bad))
    assert code == 1 and doc["status"] == "failed"
    assert doc["equation"] == "mumford"


def test_translate(capsys):
    code, doc = run_json(capsys, "translate", "--psi-bar", "2")
    assert code == 0 and doc["terms"] == 4


def test_expand_high_slice_is_zero(capsys):
    code, out, _ = run(capsys, "expand", "--equation", "mumford", "--l", "5")
    assert code == 0 and out.strip() == "0"


def test_expand_sym(capsys):
    code, doc = run_json(capsys, "expand", "--equation", "mumford")
    assert code == 0 and doc["terms"] == 20


def test_expand_s_needs_level(capsys):
    code, doc = run_json(capsys, "expand", "--equation", "trr0",
                         "--action", "s")
    assert code == 2 and doc["status"] == "error"


def test_oracle_small(capsys, tmp_path):
    cache = tmp_path / "t.txt"
    code, doc = run_json(capsys, "oracle", "--rank", "1", "--trials", "3",
                         "--cache", str(cache))
    assert code == 0 and doc["status"] == "passed"
    assert cache.exists()


def test_corrupted_cache_exit_code(capsys, tmp_path):
    cache = tmp_path / "t.txt"
    run(capsys, "oracle", "--trials", "1", "--cache", str(cache))
    cache.write_text(cache.read_text().replace("1/24", "1/25"))
    code, doc = run_json(capsys, "oracle", "--trials", "1",
                         "--cache", str(cache))
    assert code == 2 and "inconsistent" in doc["error"]


@pytest.mark.parametrize("argv", [
    ["check"],
    ["check", "--equation", "no/such/file.gw"],
    ["check", "--equation", "mumford", "--jetcap", "1"],
    ["oracle", "--gmax", "9"],
    ["expand", "--equation", "mumford", "--l", "zero"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


def test_parse_error_exit_code(tmp_path, capsys):
    f = tmp_path / "e.gw"
    f.write_text("1 <x m m m> = 0")
    code, _, err = run(capsys, "check", "--equation", str(f))
    assert code == 2 and "occurs 3 times" in err


def test_output_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(capsys, "check", "--equation", "trr0", "--format",
                     "json", "--output", str(out))
    assert code == 0
    jsonschema.validate(json.loads(out.read_text()), SCHEMA)
