"""Acceptance suite: one test per numbered criterion, one verdict line each.

Run with `pytest tests/test_acceptance.py -v` (add -s to see the verdict
lines on passing tests too). Criterion 10 needs a local directory of
standard test images and is skipped otherwise; see the README.
"""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from marlow.degrade import random_mask
from marlow.image import apply_mask, load_image
from marlow.lowrank import fusion_weight, joint_update, svt
from marlow.metrics import psnr, ssim
from marlow.solver import SolverConfig, complete, initialize
from marlow.ar import solve_ar

from oracles import (
    fused_objective,
    gauss_solve,
    psnr_loop,
    ssim_windowed,
    svt_eig,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def verdict(num, ok, detail) -> bool:
    print(f"ACCEPTANCE C{num} {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def degraded_fixture(name, seed=7, rate=0.8):
    img = load_image(FIXTURES / name)
    mask = random_mask(img.width, img.height, rate, seed=seed)
    return img, mask, apply_mask(img, mask)


def test_c1_svt_matches_eigensolve_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        rows = int(rng.integers(2, 11))
        cols = int(rng.integers(2, 9))
        A = rng.uniform(-1.0, 1.0, size=(rows, cols))
        for tau in (0.2, 0.7, 1.5):
            got = svt(A, tau).matrix
            ref = svt_eig(A, tau)
            worst = max(worst, float(np.max(np.abs(got - ref))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 5.0
    assert verdict(
        1, ok,
        f"svt vs Jacobi eigensolve on 50 matrices x 3 thresholds: "
        f"max err {worst:.2e} (tol 1e-8), {dt:.2f}s (limit 5s)",
    )


def test_c2_ridge_matches_gaussian_elimination():
    rng = np.random.default_rng(202)
    alpha = math.sqrt(10.0)
    t0 = time.perf_counter()
    worst_solution = 0.0
    worst_residual = 0.0
    for _ in range(50):
        rows = int(rng.integers(18, 41))
        cols = int(rng.integers(3, 18))
        S = rng.uniform(-1.0, 1.0, size=(rows, cols))
        t = rng.uniform(-1.0, 1.0, size=rows)
        sol = solve_ar(S, t, alpha)
        ref = gauss_solve(S.T @ S + 10.0 * np.eye(cols), S.T @ t)
        worst_solution = max(worst_solution, float(np.max(np.abs(sol.phi - ref))))
        resid = (S.T @ S + 10.0 * np.eye(cols)) @ sol.phi - S.T @ t
        worst_residual = max(worst_residual, float(np.max(np.abs(resid))))
    dt = time.perf_counter() - t0
    ok = worst_solution <= 1e-8 and worst_residual <= 1e-10 and dt < 5.0
    assert verdict(
        2, ok,
        f"solve_ar vs Gaussian elimination on 50 systems: max err "
        f"{worst_solution:.2e} (tol 1e-8), normal-equation residual "
        f"{worst_residual:.2e} (tol 1e-10), {dt:.2f}s (limit 5s)",
    )


def test_c3_joint_update_beats_perturbations():
    rng = np.random.default_rng(303)
    mu = 10.0

    def objective(M, y1, y2):
        # fused objective; nuclear norm from the singular values
        sv = np.linalg.svd(M, compute_uv=False)
        return float(np.sum((M - y1) ** 2) + mu * np.sum((M - y2) ** 2) + mu * sv.sum())

    t0 = time.perf_counter()
    lam_exact = fusion_weight(mu) == 10.0 / 11.0
    ok = lam_exact
    cross_checked = 0.0
    for _ in range(20):
        y1 = rng.standard_normal((8, 6))
        y2 = rng.standard_normal((8, 6))
        M = joint_update(y1, y2, mu)
        base = objective(M, y1, y2)
        # ground the fast evaluator in the independent eigensolve objective
        # at a full-rank point (the eigensolve loses ~1e-7 on the exactly
        # zero singular values the shrinkage produces)
        probe = rng.standard_normal((8, 6))
        cross_checked = max(
            cross_checked,
            abs(objective(probe, y1, y2) - fused_objective(probe, y1, y2, mu)),
        )
        for _ in range(1000):
            d = rng.standard_normal((8, 6))
            d *= 1e-3 / np.linalg.norm(d)
            if objective(M + d, y1, y2) <= base:
                ok = False
                break
        if not ok:
            break
    dt = time.perf_counter() - t0
    ok = ok and cross_checked <= 1e-9 and dt < 10.0
    assert verdict(
        3, ok,
        f"joint_update lower than 1000 unit perturbations x 1e-3 on 20 "
        f"instances (mu=10), weight exactly 10/11: {lam_exact}, objective "
        f"evaluators agree to {cross_checked:.1e}, {dt:.2f}s (limit 10s)",
    )


def test_c4_known_pixels_exact_in_every_mode():
    gray_img, gray_mask, gray_degraded = degraded_fixture("periodic_64.png")
    color_img, color_mask, color_degraded = degraded_fixture("color_64.png")
    runs = (
        (gray_degraded, gray_mask, SolverConfig.gray_defaults(mode="marlow", max_iter=2)),
        (gray_degraded, gray_mask, SolverConfig.gray_defaults(mode="lowrank_only", max_iter=2)),
        (color_degraded, color_mask, SolverConfig.color_defaults(mode="color_separate", max_iter=2)),
        (color_degraded, color_mask, SolverConfig.color_defaults(mode="color_simultaneous", max_iter=2)),
    )
    exact = []
    for degraded, mask, cfg in runs:
        out, _ = complete(degraded, mask, cfg)
        exact.append(np.array_equal(out.data[mask.known], degraded.data[mask.known]))
    ok = all(exact)
    assert verdict(
        4, ok,
        f"known pixels bit-exact on 64x64 at 80% missing for modes "
        f"marlow/lowrank_only/color_separate/color_simultaneous: {exact}",
    )


def test_c5_thread_count_is_byte_invariant(tmp_path):
    results = []
    for name in ("periodic_64.png", "edges_64.png", "color_64.png"):
        workdir = tmp_path / Path(name).stem
        rc = subprocess.run(
            [sys.executable, "-m", "marlow.cli", "degrade",
             str(FIXTURES / name), "-o", str(workdir),
             "--rate", "0.8", "--seed", "7"],
            capture_output=True, text=True,
        )
        assert rc.returncode == 0, rc.stderr
        outputs = {}
        for threads in ("1", "8"):
            out = workdir / f"restored_t{threads}.png"
            rc = subprocess.run(
                [sys.executable, "-m", "marlow.cli", "complete",
                 str(workdir / "degraded.png"), str(workdir / "mask.png"),
                 "-o", str(out), "--iters", "3", "--threads", threads],
                capture_output=True, text=True,
            )
            assert rc.returncode == 0, rc.stderr
            outputs[threads] = out.read_bytes()
        results.append((name, outputs["1"] == outputs["8"]))
    ok = all(same for _, same in results)
    assert verdict(
        5, ok,
        "complete --threads 1 vs --threads 8 byte-identical per fixture: "
        + ", ".join(f"{n}={s}" for n, s in results),
    )


def test_c6_end_to_end_gain_on_periodic_texture():
    img, mask, degraded = degraded_fixture("periodic_64.png")
    t0 = time.perf_counter()
    init_psnr = psnr(img, initialize(degraded, mask))
    out, _ = complete(degraded, mask, SolverConfig.gray_defaults(), reference=img)
    final_psnr = psnr(img, out)
    dt = time.perf_counter() - t0
    gain = final_psnr - init_psnr
    ok = gain >= 3.0 and dt < 60.0
    assert verdict(
        6, ok,
        f"periodic fixture at 80% missing: init {init_psnr:.2f} dB -> final "
        f"{final_psnr:.2f} dB, gain {gain:+.2f} dB (needs >= +3), "
        f"{dt:.1f}s (limit 60s)",
    )


def test_c7_model_step_helps_on_edges():
    img, mask, degraded = degraded_fixture("edges_64.png")
    full, _ = complete(degraded, mask, SolverConfig.gray_defaults(mode="marlow"))
    shrunk, _ = complete(degraded, mask, SolverConfig.gray_defaults(mode="lowrank_only"))
    p_full = psnr(img, full)
    p_shrunk = psnr(img, shrunk)
    gap = p_full - p_shrunk
    ok = gap >= 0.0
    target_note = "met" if gap >= 0.3 else "missed"
    assert verdict(
        7, ok,
        f"edge fixture: marlow {p_full:.2f} dB vs lowrank-only {p_shrunk:.2f} dB, "
        f"gap {gap:+.2f} dB (gate >= 0; +0.3 dB target {target_note}, non-gating)",
    )


def test_c8_joint_color_beats_separate():
    img, mask, degraded = degraded_fixture("color_64.png")
    joint, _ = complete(degraded, mask, SolverConfig.color_defaults(mode="color_simultaneous"))
    split, _ = complete(degraded, mask, SolverConfig.color_defaults(mode="color_separate"))
    p_joint = psnr(img, joint)
    p_split = psnr(img, split)
    gap = p_joint - p_split
    ok = gap >= 0.0
    assert verdict(
        8, ok,
        f"color fixture at 80% missing: simultaneous {p_joint:.2f} dB vs "
        f"separate {p_split:.2f} dB, gap {gap:+.2f} dB (gate >= 0)",
    )


def test_c9_metric_oracles():
    rng = np.random.default_rng(909)
    x = rng.random((16, 16))
    ssim_exact = ssim(x, x.copy()) == 1.0

    uniform = psnr(np.zeros((16, 16)), np.full((16, 16), 1.0 / 255.0))
    psnr_closed_form = abs(uniform - 48.1308) <= 1e-3

    worst_psnr = 0.0
    worst_ssim = 0.0
    for i in range(10):
        shape = (16, 16, 3) if i % 3 == 0 else (18, 14)
        a = rng.random(shape)
        b = np.clip(a + 0.08 * rng.standard_normal(shape), 0.0, 1.0)
        worst_psnr = max(worst_psnr, abs(psnr(a, b) - psnr_loop(a, b)))
        worst_ssim = max(worst_ssim, abs(ssim(a, b) - ssim_windowed(a, b)))
    ok = ssim_exact and psnr_closed_form and worst_psnr <= 1e-9 and worst_ssim <= 1e-9
    assert verdict(
        9, ok,
        f"ssim(x,x)==1.0: {ssim_exact}; uniform 1/255 error -> {uniform:.4f} dB "
        f"(48.1308 +/- 1e-3); oracle gaps over 10 pairs: psnr {worst_psnr:.1e}, "
        f"ssim {worst_ssim:.1e} (tol 1e-9)",
    )


def test_c10_bench_against_reference_values(tmp_path):
    images = Path(os.environ.get("MARLOW_BENCH_IMAGES", ""))
    if not images.is_dir():
        images = Path(__file__).resolve().parents[1] / "bench_images"
    candidates = []
    if images.is_dir():
        candidates = [
            p for p in sorted(images.iterdir())
            if p.suffix.lower() in (".png", ".bmp", ".tif", ".tiff")
        ]
    if not candidates:
        pytest.skip(
            "standard test images not supplied; put them in bench_images/ "
            "or point MARLOW_BENCH_IMAGES at them"
        )

    out = tmp_path / "bench"
    rc = subprocess.run(
        [sys.executable, "-m", "marlow.cli", "bench", str(images),
         "-o", str(out), "--rate", "0.8", "--seed", "0"],
        capture_output=True, text=True,
    )
    assert rc.returncode == 0, rc.stderr
    payload = json.loads((out / "bench.json").read_text())
    lines = []
    for row in payload["results"]:
        note = ""
        if row["expected_psnr_db"] is not None:
            band = "within" if abs(row["delta_db"]) <= 2.0 else "outside"
            note = (
                f" (reference {row['expected_psnr_db']:.2f} dB, "
                f"delta {row['delta_db']:+.2f} dB, {band} +/-2 dB band)"
            )
        lines.append(f"{row['image']}: {row['psnr_db']} dB, ssim {row['ssim']}{note}")
    ok = len(payload["results"]) > 0
    assert verdict(
        10, ok,
        "bench at 80% missing (informational, +/-2 dB band is non-gating): "
        + "; ".join(lines),
    )
