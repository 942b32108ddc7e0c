"""Smoke test for the difftree_py extension.

Build it first, e.g. `maturin develop --release` from the repository root,
then run `python python/smoke.py`.
"""

import csv
import json
import math
import os
import random
import tempfile

import difftree_py as dt

SCHEMA = """
[[variables]]
name = "x"
kind = "numeric"

[[variables]]
name = "y"
kind = "numeric"

[[variables]]
name = "label"
kind = "ordinal"
levels = ["other", "suspicious"]
role = "response"
"""


def write_group(path, n, extra, rng):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "y", "label"])
        for _ in range(n):
            label = "suspicious" if rng.random() < 0.3 else "other"
            w.writerow([f"{rng.random():.4f}", f"{rng.random():.4f}", label])
        for _ in range(extra):
            w.writerow([f"{0.9 + 0.1 * rng.random():.4f}", f"{0.9 + 0.1 * rng.random():.4f}", "suspicious"])


def main():
    w, dof, p = dt.poisson_homogeneity([[22, 43], [0, 41]])
    assert abs(w - 63.75) < 0.01 and dof == 2, (w, dof)
    assert 1e-14 < p < 2e-14, p
    assert math.isclose(dt.chisq_sf(3.0, 2), math.exp(-1.5), rel_tol=1e-12)
    assert math.isclose(dt.bonferroni(1.4e-14, 13414), 1.87796e-10, rel_tol=1e-6)

    rng = random.Random(3)
    with tempfile.TemporaryDirectory() as tmp:
        a, b = os.path.join(tmp, "before.csv"), os.path.join(tmp, "after.csv")
        write_group(a, 200, 0, rng)
        write_group(b, 200, 40, rng)
        frame = dt.Frame.load([a, b], SCHEMA)
        assert frame.group_labels == ["before", "after"]

        tree = dt.grow(frame)
        print(tree.render())
        assert tree.min_p < 1e-6 and tree.test_count > 0
        report = json.loads(tree.to_json())
        assert report["test_count"] == tree.test_count

        full = dt.grow(frame, dt.Config(prune="none"))
        assert full.test_count == tree.test_count

        null = dt.permutation_null(frame, 20, seed=7)
        assert len(null) == 20 and null == sorted(null)
        assert null == dt.permutation_null(frame, 20, seed=7)
        p2 = dt.interpolate(tree.p_bonferroni, null)
        print(f"p' = {tree.p_bonferroni:.3e}  p'' = {p2:.3e}")
        assert 0 < p2 <= 1

        median, values = dt.bag_estimate(frame, 5, seed=1)
        assert len(values) == 5 and min(values) <= median <= max(values)

    print("smoke ok")


if __name__ == "__main__":
    main()
