import json

import pytest

import skewdyn as sd
from skewdyn.cli import main

GOLDEN_ROT = {"kind": "surd", "p": -1, "q": 1, "r": 5, "s": 2, "frac_bits": 192}


@pytest.fixture()
def rot_file(tmp_path):
    p = tmp_path / "rot.json"
    p.write_text(json.dumps(GOLDEN_ROT))
    return str(p)


@pytest.fixture()
def germ_file(tmp_path):
    rot = sd.golden_mean()
    F = sd.SkewGerm.from_coeffs(rot, [[0], [1], [1], [0, 0.05]], 8, 3)
    p = tmp_path / "germ.json"
    p.write_text(json.dumps(sd.germ_to_json(F)))
    return str(p)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_brjuno_outputs(tmp_path, rot_file):
    out = tmp_path / "o"
    assert main(["brjuno", "--rotation", rot_file, "--m-max", "256",
                 "--out", str(out)]) == 0
    summary = read_json(out / "brjuno.json")
    assert summary["tool"] == "skewdyn" and "version" in summary
    assert summary["cremer_running_max"] < 2
    lines = (out / "divisors.csv").read_text().splitlines()
    om = [float(line.split(",")[2]) for line in lines[1:]]
    assert all(b <= a for a, b in zip(om, om[1:]))


def test_brjuno_inline_rotation(tmp_path):
    out = tmp_path / "o"
    assert main(["brjuno", "--rotation", json.dumps(GOLDEN_ROT),
                 "--m-max", "64", "--out", str(out)]) == 0


def test_brjuno_rational_exit_code(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["brjuno", "--rotation",
                 '{"kind":"decimal","decimal":"0.5","frac_bits":192}',
                 "--m-max", "16", "--out", str(out)])
    assert code == 3
    assert "degenerate" in capsys.readouterr().err


def test_malformed_inputs_exit_code(tmp_path):
    out = tmp_path / "o"
    assert main(["brjuno", "--rotation", "/nonexistent.json",
                 "--m-max", "16", "--out", str(out)]) == 2
    assert main(["brjuno", "--rotation", '{"kind":"wat"}',
                 "--m-max", "16", "--out", str(out)]) == 2
    bad_germ = tmp_path / "bad.json"
    bad_germ.write_text('{"no": "germ"}')
    assert main(["normalize", "--germ", str(bad_germ), "--depth", "1",
                 "--out", str(out)]) == 2


def test_precision_budget_exit_code(tmp_path):
    out = tmp_path / "o"
    rot = {"kind": "surd", "p": -1, "q": 1, "r": 5, "s": 2, "frac_bits": 80}
    code = main(["brjuno", "--rotation", json.dumps(rot), "--m-max", "200000",
                 "--out", str(out)])
    assert code == 4


def test_normalize_report(tmp_path, germ_file):
    out = tmp_path / "o"
    assert main(["normalize", "--germ", germ_file, "--depth", "2",
                 "--trunc-w", "8", "--out", str(out)]) == 0
    rep = read_json(out / "normalize.json")
    assert rep["k"] == 1 and rep["h"] == 2
    assert rep["jet"][0] == pytest.approx([1.0, 0.0])
    assert rep["replay_defect"] < 1e-8
    assert rep["z_dependence_defect"] < 1e-8
    assert {e["kind"] for e in rep["change_log"]} >= {"base", "shift", "gauge", "bump"}
    assert rep["reduced"]["jet"][0] == pytest.approx([-1.0, 0.0])
    assert all(v < 1e-8 for v in rep["stage_residuals"].values())


def test_cremer_csv_and_summary(tmp_path, rot_file):
    out = tmp_path / "o"
    assert main(["cremer", "--rotation", rot_file, "--construction", "greedy",
                 "--m-max", "120", "--out", str(out)]) == 0
    rep = read_json(out / "cremer.json")
    assert rep["bits_prefix"][1] == 1
    assert rep["running_max_exponent"] < 2
    lines = (out / "growth.csv").read_text().splitlines()
    assert len(lines) == 121
    assert main(["cremer", "--rotation", rot_file, "--construction", "linear",
                 "--phi0", "0,0", "--m-max", "60", "--out", str(out)]) == 0


def test_orbit_outputs(tmp_path, germ_file):
    out = tmp_path / "o"
    assert main(["orbit", "--germ", germ_file, "--w0=-0.1,0",
                 "--n-max", "4000", "--out", str(out)]) == 0
    rep = read_json(out / "orbit.json")
    assert rep["verdict"].startswith("ParabolicPetal")
    lines = (out / "orbit.csv").read_text().splitlines()
    assert lines[0] == "n,re_z,im_z,re_w,im_w,dlog,dlog_partial_sum"
    assert len(lines) >= rep["n_stop"] + 1


def test_slice_outputs_and_determinism(tmp_path, germ_file):
    outs = []
    for t in ("1", "3"):
        out = tmp_path / f"o{t}"
        assert main(["slice", "--germ", germ_file, "--grid=-1.5,0.5,-1,1,24",
                     "--n-max", "300", "--threads", t, "--out", str(out)]) == 0
        outs.append(out)
    a, b = (p / "slice.ppm" for p in outs)
    assert a.read_bytes() == b.read_bytes()
    a, b = (p / "slice.csv" for p in outs)
    assert a.read_bytes() == b.read_bytes()
    rep = read_json(outs[0] / "slice.json")
    assert rep["verdict_counts"]["petal"] > 0


def test_rerun_byte_identical(tmp_path, rot_file):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["brjuno", "--rotation", rot_file, "--m-max", "128",
                     "--out", str(out)]) == 0
        outs.append(out)
    assert (outs[0] / "brjuno.json").read_bytes() == (outs[1] / "brjuno.json").read_bytes()
    assert (outs[0] / "divisors.csv").read_bytes() == (outs[1] / "divisors.csv").read_bytes()


def test_hypotheses_output(tmp_path, germ_file):
    out = tmp_path / "o"
    assert main(["hypotheses", "--germ", germ_file, "--n-max", "4000",
                 "--out", str(out)]) == 0
    rep = read_json(out / "hypotheses.json")
    assert rep["plausible"] is True
    assert len(rep["critical_points"]) >= 1


def test_petalcheck_requires_seed(tmp_path, capsys):
    out = tmp_path / "o"
    with pytest.raises(SystemExit):
        main(["petalcheck", "--k", "1", "--out", str(out)])
    assert main(["petalcheck", "--k", "1", "--seed", "5", "--samples", "400",
                 "--out", str(out)]) == 0
    rep = read_json(out / "petalcheck.json")
    assert rep["forward_invariance"]["violations"] == 0
    assert rep["repelling_expansion"]["min_derivative_modulus"] > 1


def test_bad_grid_exit_code(tmp_path, germ_file):
    out = tmp_path / "o"
    assert main(["slice", "--germ", germ_file, "--grid", "nope",
                 "--out", str(out)]) == 2


def test_nonpositive_budget_rejected(tmp_path, rot_file):
    out = tmp_path / "o"
    assert main(["brjuno", "--rotation", rot_file, "--m-max", "0",
                 "--out", str(out)]) == 2


def test_brjuno_k_exceeding_table_rejected(tmp_path, rot_file):
    out = tmp_path / "o"
    assert main(["brjuno", "--rotation", rot_file, "--m-max", "64",
                 "--brjuno-k", "9", "--out", str(out)]) == 2


def test_brjuno_doubly_exponential_quotients(tmp_path):
    # the depth-6 doubly-exponential rotation runs fine; its exponent is
    # finite and small (the quotient growth is Brjuno-grade)
    rot = {"kind": "quotients", "quotients": [2 ** (2 ** n) for n in range(1, 7)],
           "frac_bits": 512}
    out = tmp_path / "o"
    assert main(["brjuno", "--rotation", json.dumps(rot), "--m-max", "512",
                 "--out", str(out)]) == 0
    rep = read_json(out / "brjuno.json")
    assert 0 < rep["cremer_running_max"] < 1
