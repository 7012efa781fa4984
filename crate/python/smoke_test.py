"""Smoke test for the qbe_py extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/qbe-py/Cargo.toml -o target/wheels
    pip install --force-reinstall target/wheels/qbe_py-*.whl
"""

import json
import math
import pathlib
import sys
import tempfile

import qbe_py

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    d = json.loads(qbe_py.derived())
    assert abs(d["kappa1"] - 2.0) < 1e-14 and abs(d["kappa2"] - 1.0) < 1e-14
    assert abs(d["p0"] - 1.0) < 1e-14

    e = qbe_py.energy([0.0, 1.0, 2.0])
    assert e[0] == 0.0 and abs(e[1] - math.sqrt(3.0)) < 1e-14

    # equilibrium is a fixed point of the collision operator
    n, u_max, c = 24, 3.4, 2.0
    nodes, _ = qbe_py.collision([0.0] * n, u_max)
    f = [1.0 / math.expm1(c * x) for x in qbe_py.energy(nodes)]
    _, q = qbe_py.collision(f, u_max)
    assert max(abs(x) for x in q) < 1e-12 * max(f), max(abs(x) for x in q)

    rep = json.loads(qbe_py.validate(str(ROOT / "scenarios" / "shell.toml")))
    assert rep["warnings"] == [], rep["warnings"]

    try:
        qbe_py.validate(str(ROOT / "no_such_file.toml"))
    except OSError:
        pass
    else:
        raise AssertionError("missing file should raise")

    with tempfile.TemporaryDirectory() as tmp:
        meta = json.loads(qbe_py.run(str(ROOT / "scenarios" / "c22_only.toml"), tmp))
        assert meta["summary"]["abort"] is None
        a = json.loads(qbe_py.audit(tmp))
        assert a["positivity"]["ok"] and a["h_theorem"]["monotone"]
        assert a["config_hash"] == meta["config_hash"]

    print("qbe_py", qbe_py.__version__, "smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
