import json
import shutil
import subprocess

import numpy as np
import pytest

from bergman_lab.cli import main, parse_config, parse_verify_config, sample_points
from bergman_lab.domains import parse_domain
from bergman_lab.errors import ConfigError

KERNEL_INI = """[experiment]
kind = kernel-table
domain = disc
seed = 3
[numerics]
n_points = 6
point_scale = 0.7
"""


def _write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _hash_header(path):
    first = path.read_text().splitlines()[0]
    assert first.startswith("# manifest-sha256: ")
    return first.split(": ")[1]


def test_parse_config_defaults():
    cfg = parse_config(KERNEL_INI)
    assert cfg["kind"] == "kernel-table"
    assert cfg["n_points"] == 6 and cfg["degree"] == 60 and cfg["seed"] == 3


@pytest.mark.parametrize("text, key", [
    ("[experiment]\nkind = kernel-table\nbogus = 1\n", "bogus"),
    ("[experiment]\nkind = kernel-table\n[numerics]\ndegre = 10\n", "degre"),
    ("[experiment]\nkind = kernel-table\n[extras]\nx = 1\n", "extras"),
    ("[experiment]\nkind = kernel-table\n[numerics]\ndegree = -3\n", "degree"),
    ("[experiment]\nkind = kernel-table\n[numerics]\ntol = abc\n", "tol"),
    ("[experiment]\nkind = kernel-table\n[geometry]\ndeltas = 0.01 0.1\n", "deltas"),
    ("[experiment]\nkind = kernel-table\ndomain = torus\n", "domain"),
    ("[experiment]\nkind = nonsense\n", "kind"),
])
def test_parse_config_is_strict(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_subcommand_kind_mismatch():
    with pytest.raises(ConfigError):
        parse_config(KERNEL_INI, kind="metric-table")


def test_verify_config():
    assert parse_verify_config("[experiment]\nseed = 4\n")["seed"] == 4
    with pytest.raises(ConfigError):
        parse_verify_config("[experiment]\nsuite = huge\n")


def test_sample_points_inside_and_reproducible():
    D = parse_domain("egg:2:4")
    a = sample_points(D, 50, seed=1)
    assert np.all(D.contains(a))
    assert np.array_equal(a, sample_points(D, 50, seed=1))


def test_unknown_key_exit_code_and_error_file(tmp_path):
    out = tmp_path / "out"
    code = main(["kernel", _write(tmp_path, KERNEL_INI + "mystery_knob = 2\n"), "-o", str(out)])
    assert code == 4
    rec = json.loads((out / "error.json").read_text())
    assert rec["key"] == "mystery_knob" and rec["exit_code"] == 4


def test_kernel_run_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["kernel", _write(tmp_path, KERNEL_INI), "-o", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert _hash_header(out / "results.csv") == manifest["sha256"]
    assert "wall_time_s" in manifest["runtime"]
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 2 + 6
    assert (out / "summary.txt").read_text().splitlines()[1].startswith("PASS")


def test_reruns_are_byte_identical(tmp_path):
    ini = _write(tmp_path, KERNEL_INI)
    main(["kernel", ini, "-o", str(tmp_path / "a")])
    main(["kernel", ini, "-o", str(tmp_path / "b")])
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_seed_changes_the_table(tmp_path):
    main(["kernel", _write(tmp_path, KERNEL_INI), "-o", str(tmp_path / "a")])
    main(["kernel", _write(tmp_path, KERNEL_INI.replace("seed = 3", "seed = 4"), "b.ini"), "-o", str(tmp_path / "b")])
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "b" / "results.csv").read_bytes()


def test_missing_config_file(tmp_path):
    assert main(["kernel", str(tmp_path / "absent.ini"), "-o", str(tmp_path)]) == 4


@pytest.mark.skipif(shutil.which("berglab") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["berglab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
