"""Smoke test for the ge_ensemble_py extension.

Build and run from the repository root:

    PYO3_BUILD_EXTENSION_MODULE=1 cargo build --release -p ge-ensemble-py
    python3 python/smoke_test.py

The built library is copied to a temporary directory as ge_ensemble_py.so
and imported from there. Pass a path to use a different build.
"""

import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load(lib_path):
    tmp = tempfile.mkdtemp()
    shutil.copy(lib_path, os.path.join(tmp, "ge_ensemble_py.so"))
    sys.path.insert(0, tmp)
    import ge_ensemble_py

    return ge_ensemble_py


def main():
    lib = sys.argv[1] if len(sys.argv) > 1 else os.path.join(ROOT, "target", "release", "libge_ensemble_py.so")
    if not os.path.exists(lib):
        sys.exit(f"missing {lib}; build with PYO3_BUILD_EXTENSION_MODULE=1 cargo build --release -p ge-ensemble-py")
    ge = load(lib)

    g = ge.Grammar.parse("<e> ::= <e>+<e> | x[:,0] | x[:,1]\n")
    text, reason = g.derive([0, 1, 2])
    assert (text, reason) == ("x[:,0]+x[:,1]", None), (text, reason)
    assert g.derive([0, 1]) == (None, "codons_exhausted")
    assert g.derive([0, 0, 1, 1, 1], max_depth=3)[1] == "depth_exceeded"

    e = ge.Expression("x[:,0]*x[:,1]+pdiv(x[:,0],0)")
    values, finite = e.evaluate([[2.0, 3.0], [1.0, 1.0]])
    assert finite and values == [7.0, 2.0], values
    assert e.node_count == 7, e.node_count

    y = [1.0, 2.0, 3.0, 4.0]
    assert abs(ge.pearson(y, [2.0, 4.0, 6.0, 8.0]) - 1.0) < 1e-12
    assert abs(ge.spearman(y, [1.0, 4.0, 9.0, 16.0]) - 1.0) < 1e-12
    assert ge.pearson(y, [5.0] * 4) is None

    coefs, intercept = ge.fit_linear_regression([[1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 1.0]], [3.0, 6.5, 7.0, 10.5])
    assert all(math.isclose(a, b, abs_tol=1e-9) for a, b in zip(coefs, [2.0, 1.5])), coefs
    assert math.isclose(intercept, 1.0, abs_tol=1e-9), intercept

    mc30 = ge.bundled("mc30")
    assert len(mc30) == 30 and len(mc30.rows) == 30
    train, validation = ge.split(len(mc30))
    assert (len(train), len(validation)) == (21, 9)
    assert sorted(train + validation) == list(range(30))

    result = ge.run(mc30, metric="srcc", seed=3, generations=5, population=20)
    assert len(result["best_fitness"]) == 6
    assert result["best_fitness"] == sorted(result["best_fitness"])
    again = ge.run("mc30", metric="srcc", seed=3, generations=5, population=20)
    assert again["formula"] == result["formula"]
    print(f"formula {result['formula']}")
    print(f"training {result['training_fitness']:.4f} validation {result['validation_fitness']}")
    print("smoke test ok")


if __name__ == "__main__":
    main()
