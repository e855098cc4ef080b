"""Smoke test for the lithomap_py bindings.

Exercises every exported function once against known values, then runs the
full mapping chain on a generated scene and checks the recovered abundances
against the stored truth. Run after installing the package:

    pip install -e python/ --no-build-isolation
    python python/smoke_test.py
"""

import json
import math
import random
import tempfile
from pathlib import Path

import lithomap_py as lm


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def check_vector_helpers():
    unit = lm.l2_normalize([3.0, 4.0])
    assert close(unit[0], 0.6) and close(unit[1], 0.8), unit
    assert close(lm.euclidean_distance([0.0, 0.0], [3.0, 4.0]), 5.0)

    r = lm.pearson_correlation([1.0, 2.0, 3.0], [1.0, 2.0, 3.5])
    assert close(r, 0.9933992677987828, 1e-12), r

    resampled = lm.resample_to_grid([1.0, 2.0, 3.0], [10.0, 20.0, 40.0], [1.0, 2.5, 3.0])
    assert resampled == [10.0, 30.0, 40.0], resampled

    try:
        lm.pearson_correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    except ArithmeticError:
        pass
    else:
        raise AssertionError("constant input must raise ArithmeticError")


def check_reflectance():
    rho = lm.toa_reflectance(
        100.0, 1000.0, earth_sun_distance_au=1.010189776177688, solar_zenith_deg=28.543857
    )
    assert abs(rho - 0.3650) < 1e-4, rho
    identity = lm.toa_reflectance(1.0, math.pi, 1.0, 0.0)
    assert close(identity, 1.0, 1e-12), identity


def check_preclassification():
    gamma = lm.gamma_weights([1.0, 3.0])
    assert close(gamma[0], 0.75) and close(gamma[1], 0.25), gamma

    k = lm.elbow_select([1, 2, 3, 4, 5], [100.0, 10.0, 9.0, 8.5, 8.0])
    assert k == 2, k

    rng = random.Random(7)
    cloud_a = [[rng.gauss(0.0, 0.05), rng.gauss(0.0, 0.05)] for _ in range(40)]
    cloud_b = [[rng.gauss(3.0, 0.05), rng.gauss(3.0, 0.05)] for _ in range(40)]
    assignment, centroids, wcss = lm.kmeans(cloud_a + cloud_b, 2, seed=1)
    first, second = assignment[0], assignment[40]
    assert first != second
    assert all(label == first for label in assignment[:40])
    assert all(label == second for label in assignment[40:])
    assert wcss > 0.0 and len(centroids) == 2

    k_values, wcss_values = lm.wcss_curve(cloud_a + cloud_b, 4, seed=1)
    assert lm.elbow_select(k_values, wcss_values) == 2

    labels = lm.similarity_assign([[0.1, 0.0], [1.5, 1.5], [2.9, 3.0]],
                                  [[0.0, 0.0], [3.0, 3.0]])
    assert labels[0] == 0 and labels[2] == 1 and labels[1] is None, labels

    try:
        lm.similarity_assign([[0.0]], [[0.0]], threshold=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("threshold outside (0, 1) must raise ValueError")

    corners = [[1.0, 0.0, 0.0, 0.2, 0.1],
               [0.0, 1.0, 0.0, 0.3, 0.6],
               [0.0, 0.0, 1.0, 0.8, 0.2]]
    mixes = []
    rng = random.Random(3)
    for _ in range(60):
        w = [rng.random() for _ in range(3)]
        total = sum(w)
        w = [x / total for x in w]
        mixes.append([sum(w[i] * corners[i][b] for i in range(3)) for b in range(5)])
    endmembers, indices = lm.vca(corners + mixes, 3, seed=2)
    assert sorted(indices) == [0, 1, 2], indices
    assert len(endmembers) == 3


def check_projection():
    root2 = math.sqrt(2.0)
    high = [[5.0 + root2, 5.0], [5.0 - root2, 5.0], [5.0, 6.0], [5.0, 4.0]]
    low = [[4.0 + root2, 4.0], [4.0 - root2, 4.0], [4.0, 5.0], [4.0, 3.0]]
    w = lm.fisher_direction(high, low)
    expected = [1.0 / math.sqrt(5.0), 2.0 / math.sqrt(5.0)]
    cosine = sum(a * b for a, b in zip(w, expected))
    assert abs(abs(cosine) - 1.0) < 1e-6, w
    mean_high = sum(sum(p[i] * w[i] for i in range(2)) for p in high) / len(high)
    mean_low = sum(sum(p[i] * w[i] for i in range(2)) for p in low) / len(low)
    assert mean_high > mean_low, "direction must orient the first cloud high"
    assert lm.fisher_ratio(high, low, w) > lm.fisher_ratio(high, low, [1.0, 0.0])


def check_unmixing():
    rng = random.Random(11)
    mineral = [0.5 + 0.1 * math.sin(0.3 * b) for b in range(40)]
    impurity = [0.4 + 0.05 * math.cos(0.2 * b) for b in range(40)]
    truth = 0.37
    spectrum = [truth * m + (1.0 - truth) * i + rng.gauss(0.0, 1e-3)
                for m, i in zip(mineral, impurity)]
    alpha, residual = lm.solve_alpha(spectrum, mineral, impurity)
    ref_alpha, ref_residual = lm.grid_search_alpha(spectrum, mineral, impurity, 10_000)
    assert abs(alpha - truth) < 0.01, alpha
    assert abs(alpha - ref_alpha) <= 1e-4
    assert residual <= ref_residual + 1e-12


def check_full_chain():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        scene_dir = tmp / "scene"
        cube = lm.make_recovery_scene(scene_dir, rows=32, cols=32, seed=5)
        wavelengths, values, dropped = lm.load_library(scene_dir / "library.csv")
        assert dropped == 0 and len(wavelengths) == len(values) == 100

        manifest = json.loads(lm.run_map(
            cube, scene_dir / "library.csv", tmp / "run", seed=5, k_max=6, restarts=4
        ))
        assert manifest["chosen_k"] == 3, manifest["chosen_k"]
        assert manifest["unassigned_pixels"] == 0

        truth = lm.read_raster(scene_dir / "truth_alpha.hdr")
        mapped = lm.read_raster(tmp / "run" / "alpha_map.hdr")
        worst = max(
            abs(t - m)
            for t_row, m_row in zip(truth, mapped)
            for t, m in zip(t_row, m_row)
        )
        assert worst <= 1e-6, f"noiseless recovery should be exact, worst {worst}"

        try:
            lm.run_map(tmp / "missing.hdr", scene_dir / "library.csv", tmp / "x")
        except ValueError:
            pass
        else:
            raise AssertionError("missing cube must raise ValueError")


def main():
    check_vector_helpers()
    check_reflectance()
    check_preclassification()
    check_projection()
    check_unmixing()
    check_full_chain()
    print("lithomap_py smoke test passed")


if __name__ == "__main__":
    main()
