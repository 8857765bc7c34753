import os
import subprocess

import pytest

CLI = os.environ.get("MAFORM_CLI")
DATA = os.environ.get("MAFORM_DATA", os.path.join(os.path.dirname(__file__), "..", "..", "data"))

pytestmark = pytest.mark.skipif(not CLI, reason="MAFORM_CLI not set")


def run(*args, **kw):
    return subprocess.run([CLI, *args], capture_output=True, text=True, **kw)


def test_verify_exit_codes(tmp_path):
    assert run("verify", "--domain", f"{DATA}/ball.dom", "--nv", "8").returncode == 0
    bad = run("verify", "--domain", f"{DATA}/nonMA.dom")
    assert bad.returncode == 1
    assert "failure = monge_ampere" in bad.stdout
    spec = tmp_path / "broken.dom"
    spec.write_text("n = 2\nmu.kind = ball\nN_theta = 12\n")
    p = run("verify", "--domain", str(spec))
    assert p.returncode == 2
    assert f"where = {spec}:3:11" in p.stdout
    assert run("verify").returncode == 2


def test_report_header_and_echo():
    out = run("verify", "--domain", f"{DATA}/ellipsoid.dom", "--nv", "8", "--seed", "9").stdout
    assert "# convention: d^c = i(dbar - d)" in out
    assert "# seed: 9" in out
    assert "# resolution: N_v = 8" in out
    assert "# tolerances:" in out
    src = open(f"{DATA}/ellipsoid.dom").read().splitlines()
    for line in src:
        assert f"# source: {line}" in out


def test_invariants_of_circular_domain(tmp_path):
    dump = tmp_path / "phi.dump"
    p = run("invariants", "--domain", f"{DATA}/ellipsoid.dom", "--kmax", "8", "--nv", "16",
            "--tensor-points", "6", "--out", str(dump))
    assert p.returncode == 0, p.stdout
    table = p.stdout.split("# modes: k sup_norm\n")[1].split()
    norms = [float(x) for x in table[1::2]]
    assert len(norms) == 9
    assert max(norms[1:]) < 1e-6
    c = run("classify", "--tensor", str(dump), "--kmax", "8")
    assert c.returncode == 0
    assert "circular = true" in c.stdout


def test_classify_and_scale_test():
    c = run("classify", "--tensor", f"{DATA}/synth.tns")
    assert "circular = false" in c.stdout and "rotational.agrees = true" in c.stdout
    assert "circular = true" in run("classify", "--tensor", f"{DATA}/circular.tns").stdout
    s = run("scale-test", "--tensor", f"{DATA}/synth.tns", "--k", "0.5", "--iters", "20")
    assert s.returncode == 0
    assert "scaling.rates_match = true" in s.stdout
    assert s.stdout == run("scale-test", "--tensor", f"{DATA}/synth.tns", "--k", "0.5", "--iters", "20").stdout
    r = run("classify", "--tensor", f"{DATA}/synth.tns", "--theta", "3.141592653589793")
    assert r.returncode == 1 and "resonant" in r.stdout
