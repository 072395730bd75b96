import json
import math
import subprocess
import sys

import numpy as np
import pytest

from raylimit.cli import main
from raylimit.hausdorff import SphereCloud
from raylimit.render import read_ppm

Z2 = '{"degree":2,"coeffs":[[0,0],[0,0]]}'
BASILICA = '{"degree":2,"coeffs":[[-1,0],[0,0]]}'
PARABOLIC = '{"degree":2,"coeffs":[[0,0],[1,0]]}'


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ray_on_positive_axis(capsys):
    code, out, _ = run(capsys, "ray", "--poly", Z2, "--angle", "0/1", "--smax", "2", "--smin", "0.5")
    assert code == 0
    obj = json.loads(out)
    assert obj["angle"] == "0/1"
    for s, re_, im_ in obj["samples"]:
        assert abs(complex(re_, im_) - math.exp(s)) < 1e-12
    assert obj["samples"][0][0] == pytest.approx(2)
    assert obj["samples"][-1][0] == pytest.approx(0.5)
    assert obj["config"]["angle"] == "0/1"


def test_missing_angle_is_usage_error(capsys):
    code, _, err = run(capsys, "ray", "--poly", Z2)
    assert code == 2
    assert "--angle" in err


@pytest.mark.parametrize("argv,flag", [
    (["ray", "--poly", "{nope", "--angle", "0/1"], "--poly"),
    (["ray", "--poly", Z2, "--angle", "x/y"], "--angle"),
    (["ray", "--poly", Z2, "--angle", "0/1", "--smin", "-1"], "--smin"),
    (["maxwild", "--N", "0"], "--N"),
    (["limit", "--family", '{"kind":"weird"}', "--angle", "0/1"], "--family"),
])
def test_bad_values_name_the_flag(capsys, argv, flag):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert flag in err


def test_domain_error_is_json_on_stderr(capsys):
    # 1/6 is preperiodic under doubling
    fam = json.dumps({"kind": "explicit", "members": [json.loads(Z2)] * 3})
    code, out, err = run(capsys, "limit", "--family", fam, "--angle", "1/6", "--threads", "1")
    assert code == 1 and out == ""
    obj = json.loads(err)
    assert obj["error"] == "ValueError" and "periodic" in obj["message"]


def test_maxwild_report(capsys, tmp_path):
    dest = tmp_path / "mw.json"
    code, _, _ = run(capsys, "maxwild", "--N", "1", "--epsilon", "1e-3", "--out", str(dest))
    assert code == 0
    obj = json.loads(dest.read_text())
    re_, im_ = obj["construction"]["resit_values"][0]
    assert abs(complex(re_, im_) + 1) < 1e-9
    assert obj["verification"]["ok"]
    assert obj["config"]["N"] == 1 and obj["config"]["epsilon"] == 1e-3


def test_invariants_parabolic(capsys):
    code, out, _ = run(capsys, "invariants", "--poly", PARABOLIC)
    assert code == 0
    recs = json.loads(out)
    assert len(recs) == 1
    r = recs[0]
    assert r["class"] == "parabolic" and r["multiplicity"] == 2 and r["nu"] == 1
    assert abs(complex(*r["resit"]) - 1) < 1e-9
    assert set(r) >= {"z", "period", "multiplier", "multiplicity", "index", "resit", "nu", "class"}


def test_invariants_period_two(capsys):
    code, out, _ = run(capsys, "invariants", "--poly", BASILICA, "--period", "2")
    recs = json.loads(out)
    assert code == 0 and len(recs) == 4
    periods = sorted(r["period"] for r in recs)
    assert periods == [1, 1, 2, 2]
    attracting = [r for r in recs if r["class"] == "attracting"]
    assert len(attracting) == 2  # the superattracting 2-cycle 0 <-> -1


def test_hausdorff(capsys, tmp_path):
    a = SphereCloud(np.array([0, 1]), 1e-3).to_json()
    b = SphereCloud(np.array([0, 1, 2]), 1e-3).to_json()
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    pa.write_text(json.dumps(a))
    pb.write_text(json.dumps(b))
    code, out, _ = run(capsys, "hausdorff", "--a", f"@{pa}", "--b", f"@{pb}")
    obj = json.loads(out)
    assert code == 0
    assert obj["directed_ab"] == 0
    assert obj["hausdorff"] == pytest.approx(2 / math.sqrt(2 * 5))


def test_julia_image(capsys, tmp_path):
    img = tmp_path / "k.ppm"
    code, out, _ = run(capsys, "julia", "--poly", Z2, "--pixels", "41", "31", "--max-iter", "50",
                       "--out", str(img), "--ray", "0/1", "--threads", "1")
    assert code == 0
    data = img.read_bytes()
    assert data.startswith(b"P6\n41 31\n255\n")
    pix = read_ppm(data)
    assert pix.shape == (31, 41, 3)
    # the ray along the positive axis is drawn in red on the middle row
    assert (pix[15, 31:, 0] > 100).all()  # x >= 1
    assert json.loads(out)["black_fraction"] > 0


def test_config_file_supplies_defaults(capsys, tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"poly": Z2, "angle": "1/3", "smax": 1.5, "smin": 1.0}))
    code, out, _ = run(capsys, "ray", "--config", str(conf), "--smin", "1.2")
    assert code == 0
    obj = json.loads(out)
    assert obj["angle"] == "1/3"
    assert obj["samples"][0][0] == pytest.approx(1.5)
    # the flag beats the file; tracing stops at the last grid level above s_min
    assert 1.2 <= obj["samples"][-1][0] < 1.2 * 2 ** (1 / 8)
    assert obj["config"]["smin"] == 1.2


def test_config_rejects_unknown_keys(capsys, tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "ray", "--config", str(conf), "--poly", Z2, "--angle", "0")
    assert code == 2 and "bogus" in err


def test_limit_reports_are_thread_independent(capsys, tmp_path):
    fam = json.dumps({"kind": "multiplier_path", "builder": "power", "degree": 2,
                      "radial": [16, 32, 48]})
    outs = []
    for t in ("1", "2"):
        dest = tmp_path / f"l{t}.json"
        code, _, _ = run(capsys, "limit", "--family", fam, "--angle", "0/1", "--threads", t,
                         "--out", str(dest))
        assert code == 0
        outs.append(dest.read_bytes())
    assert outs[0] == outs[1]
    obj = json.loads(outs[0])
    assert obj["classification"] == "tame"
    assert obj["bounds"]["bb1"]["ok"]
    assert "threads" not in obj["config"]


def test_threads_env_fallback(monkeypatch):
    from raylimit.limits import default_threads
    monkeypatch.setenv("RAYLIMIT_THREADS", "3")
    assert default_threads() == 3


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "raylimit.cli", "ray", "--poly", Z2],
                         capture_output=True, text=True)
    assert res.returncode == 2
