import csv
import io
import json

import pytest

from flrdt.cli import CAPACITY_COLUMNS, main, resolve_config
from flrdt.errors import ConfigError

SPHERE_CAP = """task = "capacity"
r = 2
[model]
x = "sphere"
kappa = 0.0
[solver]
mode = "nonlifted"
[capacity]
bracket = [1.5, 2.5]
tol_alpha = 1e-3
"""

CURVE = """task = "curve"
[model]
x = "sphere"
[solver]
mode = "nonlifted"
[curve]
kappas = [0.0, 0.25, 0.5]
bracket = [0.3, 2.5]
tol_alpha = 1e-3
"""


def write(tmp_path, text, name="job.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(tmp_path, text, *extra, out="out"):
    d = tmp_path / out
    code = main(["run", write(tmp_path, text), "--out", str(d), *extra])
    return code, d


@pytest.mark.parametrize("raw,pointer", [
    ({"task": "nope"}, "/task"),
    ({"task": "capacity", "model": {"x": "sphere", "colour": 1}}, "/model"),
    ({"task": "capacity", "r": 9}, "/r"),
    ({"task": "empirical", "seed": 1, "empirical": {"trials": 10}}, "/empirical/trials"),
])
def test_schema_errors_carry_pointer(raw, pointer):
    with pytest.raises(ConfigError) as exc:
        resolve_config(raw)
    assert pointer in str(exc.value)


def test_missing_seed_fails_without_outputs(tmp_path, capsys):
    code, d = run(tmp_path, 'task = "finite_check"\n')
    assert code == 1 and not d.exists()
    assert "/seed" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path):
    code, d = run(tmp_path, SPHERE_CAP + "bogus = 1\n")
    assert code == 1 and not d.exists()


def test_finite_check_passes(tmp_path):
    code, d = run(tmp_path, 'task = "finite_check"\nseed = 3\n')
    assert code == 0
    rep = json.loads((d / "finite_check.json").read_text())
    assert rep


def test_capacity_csv_and_rerun_is_byte_identical(tmp_path):
    code, d = run(tmp_path, SPHERE_CAP)
    assert code == 0
    rows = list(csv.reader(io.StringIO((d / "capacity.csv").read_text())))
    assert tuple(rows[0]) == CAPACITY_COLUMNS
    assert abs(float(rows[1][2]) - 2.0) < 1e-3
    first = (d / "capacity.csv").read_bytes()
    code2, d2 = run(tmp_path, SPHERE_CAP, out="again")
    assert code2 == 0 and (d2 / "capacity.csv").read_bytes() == first
    # the manifest alone reproduces the job
    man = str(d / "manifest.json")
    d3 = tmp_path / "from_manifest"
    assert main(["run", man, "--out", str(d3)]) == 0
    assert (d3 / "capacity.csv").read_bytes() == first
    assert (d3 / "capacity.json").read_bytes() == (d / "capacity.json").read_bytes()
    files = json.loads((d / "manifest.json").read_text())["files"]
    assert set(files) == {"capacity.csv", "capacity.json"}


def test_set_override_and_json_format(tmp_path):
    code, d = run(tmp_path, SPHERE_CAP, "--set", "capacity.bracket=[1.8, 2.2]",
                  "--format", "json")
    assert code == 0
    assert not (d / "capacity.csv").exists()
    doc = json.loads((d / "capacity.json").read_text())
    assert doc["results"][0]["bracket"][0] >= 1.8


def test_curve_csv_columns(tmp_path):
    code, d = run(tmp_path, CURVE)
    assert code == 0
    rows = list(csv.reader(io.StringIO((d / "curve.csv").read_text())))
    assert tuple(rows[0]) == CAPACITY_COLUMNS
    kappas = [float(r[0]) for r in rows[1:]]
    alphas = [float(r[2]) for r in rows[1:]]
    assert kappas == [0.0, 0.25, 0.5]
    assert alphas[0] > alphas[1] > alphas[2]


def test_dual_eval_fields(tmp_path):
    code, d = run(tmp_path, 'task = "dual_eval"\n[model]\nx = "sphere"\nalpha = 1.5\n'
                  '[solver]\nmode = "nonlifted"\n')
    assert code == 0
    ev = json.loads((d / "dual_eval.json").read_text())
    assert abs(ev["value"] - ((1.5 / 2) ** 0.5 - 1)) < 1e-8
    assert "std_error" in ev and "meta" in ev


def test_empirical_outputs(tmp_path):
    code, d = run(tmp_path, 'task = "empirical"\nseed = 1\n[model]\nx = "binary"\n'
                  '[empirical]\nalphas = [0.4, 0.9, 1.4]\nn = 12\ntrials = 50\n')
    assert code in (0, 2)
    assert (d / "empirical.csv").exists() and (d / "empirical.json").exists()
    lines = (d / "empirical_curve.dat").read_text().splitlines()
    assert len(lines) == 3 and all(len(l.split()) == 2 for l in lines)
