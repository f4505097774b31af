#!/usr/bin/env python3
"""Smoke test for the finslerlab_py extension module.

The module is the cdylib built by cargo; no Python-side packaging step is
needed. Build it first:

    cargo build -p finsler-py

then run this script directly or via pytest.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def _load_module():
    candidates = [
        ROOT / "target" / profile / ("libfinslerlab_py" + suffix)
        for profile in ("debug", "release")
        for suffix in (".so", ".dylib")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        raise SystemExit("finslerlab_py cdylib not found; run: cargo build -p finsler-py")
    lib = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="finslerlab-py-"))
    shutil.copy2(lib, stage / "finslerlab_py.so")
    sys.path.insert(0, str(stage))
    import finslerlab_py

    return finslerlab_py


finslerlab_py = _load_module()

SPEC = {
    "family": "randers",
    "dimension": 2,
    "b": {"kind": "sin_x2", "amp": 0.3},
    "chart_domain": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]},
}
X = [0.1, -0.2]
Y = [0.9, 0.5]


def test_module_constants():
    assert finslerlab_py.CONNECTIONS == ["cartan", "chern", "berwald", "hashiguchi", "shen"]
    assert finslerlab_py.PROCESSES == ["matsumoto_c", "matsumoto_l", "shen_c", "shen_l"]


def test_metric_basics():
    m = finslerlab_py.Metric(json.dumps(SPEC))
    assert m.dimension == 2
    f = m.norm(X, Y)
    assert f > 0
    # positive 1-homogeneity in y
    assert math.isclose(m.norm(X, [2.0 * v for v in Y]), 2.0 * f, rel_tol=1e-12)
    # the fundamental tensor recovers the energy
    g, g_inv = m.fundamental_tensor(X, Y)
    quad = sum(g[i][j] * Y[i] * Y[j] for i in range(2) for j in range(2))
    assert math.isclose(quad, f * f, rel_tol=1e-12)
    ident = [
        sum(g[i][k] * g_inv[k][j] for k in range(2)) for i in range(2) for j in range(2)
    ]
    assert max(abs(v - e) for v, e in zip(ident, [1, 0, 0, 1])) < 1e-10
    # Cartan tensor is annihilated by y
    c = m.cartan_tensor(X, Y)
    worst = max(
        abs(sum(c[i][j][k] * Y[k] for k in range(2))) for i in range(2) for j in range(2)
    )
    assert worst < 1e-10
    spray_g, nonlinear = m.spray(X, Y)
    assert len(spray_g) == 2 and len(nonlinear) == 2


def test_invalid_spec_raises():
    try:
        finslerlab_py.Metric("{not json")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError for malformed spec")


def test_connection_diagram():
    m = finslerlab_py.Metric(json.dumps(SPEC))
    chern = m.connection("chern")
    via_process = m.connection("cartan", ["matsumoto_c"])
    assert via_process.name == "matsumoto_c(cartan)"
    h1, v1 = chern.coefficients(X, Y)
    h2, v2 = via_process.coefficients(X, Y)
    flat = lambda t: [t[i][j][k] for i in range(2) for j in range(2) for k in range(2)]
    assert max(abs(a - b) for a, b in zip(flat(h1), flat(h2))) < 1e-12
    assert max(abs(a - b) for a, b in zip(flat(v1), flat(v2))) < 1e-12
    assert max(abs(v) for v in flat(v1)) < 1e-12  # Chern is vertically trivial
    # Cartan's vertical part is the Cartan torsion (indices raised)
    cartan = m.connection("cartan")
    _, vc = cartan.coefficients(X, Y)
    assert max(abs(v) for v in flat(vc)) > 1e-4


def test_curvature_and_torsion_shapes():
    m = finslerlab_py.Metric(json.dumps(SPEC))
    conn = m.connection("berwald")
    triple = conn.curvature(X, Y)
    assert set(triple) == {"r", "p", "q", "frame"}
    assert len(triple["r"]) == 2 and len(triple["r"][0][0][0]) == 2
    # Berwald is torsion-free in both slots for this symmetric setup
    s, t = conn.torsion(X, Y)
    worst = max(
        abs(s[i][j][k]) + abs(t[i][j][k]) for i in range(2) for j in range(2) for k in range(2)
    )
    assert worst < 1e-9


def test_classify_and_verify():
    m = finslerlab_py.Metric(json.dumps(SPEC))
    report = m.classify(count=6, seed=3)
    names = {p["name"] for p in report["predicates"]}
    assert "riemannian" in names and "berwald" in names
    assert not next(p for p in report["predicates"] if p["name"] == "riemannian")["verdict"]
    delta = m.verify("cartan", "matsumoto_l", count=4, seed=3)
    assert delta["hh_residual"] < 1e-9
    assert delta["vv_invariant"]  # an h-leg process leaves the vv block alone


def test_geodesic():
    m = finslerlab_py.Metric(json.dumps(SPEC))
    traj = m.geodesic([0.0, 0.1], [1.0, 0.4], 0.3, 30)
    assert len(traj["t"]) == 31 and len(traj["x"]) == 31
    # unit-speed parametrization: F stays ~1 along the curve
    for x, v in zip(traj["x"][::10], traj["v"][::10]):
        assert abs(m.norm(x, v) - 1.0) < 1e-6


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"{t.__name__}: ok")
    print(f"{len(tests)} smoke tests passed")
