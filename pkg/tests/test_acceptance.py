"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import json
import time

import numpy as np
import pytest

from ovpost import formats
from ovpost.background import (
    EmbeddingTable,
    RescoreEntry,
    RescoreTable,
    SceneContext,
    blend_scores,
    rescore_coefficients,
    rescore_detections,
)
from ovpost.config import Config
from ovpost.evaluation import evaluate
from ovpost.geometry import BBox, iou, oar
from ovpost.pipeline import PipelineInputs, run_pipeline, save_sweep, sweep
from ovpost.sampling import SplitMix64, sample_oversized, sample_partial
from ovpost.suppression import CategorySplit, Detection, pos_suppress
from ovpost.synth import DetectorNoise, SyntheticWorldSpec, generate_synthetic_world

from oracles import pos_alg1, px_iou, px_oar, ref_evaluate


def _report(n, message):
    print(f"\n[criterion {n}] PASS: {message}")


def test_criterion_1_pos_oracle_equivalence():
    """pos_suppress set-equals a literal transcription of the greedy
    OAR-suppression algorithm over 1000 random seeds, in under 10 s."""
    start = time.perf_counter()
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        scores = rng.permutation(np.linspace(0.05, 0.95, n))  # unique
        boxes, dets = [], []
        for i in range(n):
            x, y = rng.uniform(0, 80, size=2)
            w, h = rng.uniform(2, 50, size=2)
            boxes.append((x, y, x + w, y + h))
            dets.append(Detection(1, 1, BBox(x, y, x + w, y + h), float(scores[i])))
        theta = float(rng.uniform(0.2, 1.0))
        kept = pos_suppress(dets, theta)
        expected = {dets[i] for i in pos_alg1(boxes, list(scores), theta)}
        assert set(kept) == expected, f"seed {seed} diverged from the transcription"
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s (budget 10s)"
    _report(1, f"1000 random seeds set-equal the Algorithm transcription in {elapsed:.1f}s")


def test_criterion_2_geometry_pixel_oracle():
    """10,000 random integer box pairs in [0,1000]^2 agree with the
    pixel-counting oracle within 2% relative error; OAR asymmetry holds."""
    rng = np.random.default_rng(20240)

    def int_box():
        while True:
            x1, x2 = sorted(int(v) for v in rng.integers(0, 1001, size=2))
            y1, y2 = sorted(int(v) for v in rng.integers(0, 1001, size=2))
            if x2 > x1 and y2 > y1:
                return (x1, y1, x2, y2)

    for _ in range(10_000):
        a, b = int_box(), int_box()
        ba, bb = BBox(*a), BBox(*b)
        expected_iou = px_iou(a, b)
        expected_oar = px_oar(a, b)
        got_iou, got_oar = iou(ba, bb), oar(ba, bb)
        tol_iou = 0.02 * expected_iou + 1e-12
        tol_oar = 0.02 * expected_oar + 1e-12
        assert abs(got_iou - expected_iou) <= tol_iou
        assert abs(got_oar - expected_oar) <= tol_oar

    inner, outer = BBox(100, 100, 200, 200), BBox(0, 0, 400, 400)
    assert oar(inner, outer) == 1.0
    assert oar(outer, inner) == pytest.approx(
        inner.area / outer.area, abs=1e-12
    )
    assert oar(outer, inner) != oar(inner, outer)
    _report(2, "10,000 integer pairs within 2% of the pixel-counting oracle; "
               "OAR asymmetry witnessed (1.0 vs |inner|/|outer|)")


def test_criterion_3_region_sampler_bins():
    """9 bins x 10,000 samples per kind: achieved IoU inside the bin within
    1e-9 and containment exact."""
    bins = [(round(0.1 * i, 1), round(0.1 * (i + 1), 1)) for i in range(1, 10)]
    rng = np.random.default_rng(7)
    gts = []
    for _ in range(20):
        x, y = rng.uniform(0, 600, size=2)
        w, h = rng.uniform(20, 200, size=2)
        gts.append(BBox(x, y, x + w, y + h))
    image_w = image_h = 1000.0
    checked = 0
    for b_idx, (lo, hi) in enumerate(bins):
        for s in range(10_000):
            gt = gts[s % len(gts)]
            stream = SplitMix64.derived(555, b_idx * 20_000 + s)
            box = sample_oversized(gt, image_w, image_h, (lo, hi), stream)
            v = iou(gt, box)
            assert lo - 1e-9 <= v <= hi + 1e-9, (lo, hi, v)
            assert box.contains(gt)
            checked += 1
        for s in range(10_000):
            gt = gts[s % len(gts)]
            stream = SplitMix64.derived(777, b_idx * 20_000 + s)
            box = sample_partial(gt, (lo, hi), stream)
            v = iou(gt, box)
            assert lo - 1e-9 <= v <= hi + 1e-9, (lo, hi, v)
            assert gt.contains(box)
            checked += 1
    assert checked == 180_000
    _report(3, "180,000 samples (9 bins x 10k x 2 kinds) inside their bins "
               "within 1e-9 with exact containment")


def test_criterion_4_rescore_math():
    """Blend boundary identities, grid monotonicity, order preservation,
    and argmax invariance under uniform coefficients."""
    rng = np.random.default_rng(4)
    # exact boundary identities on random draws
    for _ in range(200):
        s, r = float(rng.uniform(0, 1)), float(rng.uniform(0.01, 0.99))
        assert blend_scores(s, r, 0.0) == s
        assert blend_scores(s, r, 1.0) == r
    # monotonicity over a 100x100 grid in both arguments
    svals = np.linspace(0.0, 1.0, 100)
    rvals = np.linspace(0.01, 0.99, 100)
    for alpha in (0.2, 0.5):
        for r in rvals[::9]:
            col = [blend_scores(float(s), float(r), alpha) for s in svals]
            assert all(b >= a for a, b in zip(col, col[1:]))
        for s in svals[::9]:
            row = [blend_scores(float(s), float(r), alpha) for r in rvals]
            assert all(b >= a for a, b in zip(row, row[1:]))
    # similarity ordering preserved by sigmoid(normalized phi)
    for t in range(1000):
        trng = np.random.default_rng(10_000 + t)
        n_cat = int(trng.integers(2, 12))
        dim = int(trng.integers(4, 32))
        vecs = trng.standard_normal((n_cat, dim))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        bg_vec = trng.standard_normal(dim)
        bg_vec /= np.linalg.norm(bg_vec)
        table = EmbeddingTable([f"c{i}" for i in range(n_cat)], vecs, normalized=True)
        from ovpost.background import BackgroundEmbedding

        out = rescore_coefficients(table, BackgroundEmbedding(bg_vec, ("x",), 1))
        phis = np.array([out[f"c{i}"].raw_similarity for i in range(n_cat)])
        coeffs = np.array([out[f"c{i}"].coefficient for i in range(n_cat)])
        assert np.array_equal(np.argsort(phis), np.argsort(coeffs))
    # uniform r preserves the per-image argmax
    uniform = RescoreTable({c: RescoreEntry(0.0, 0.0, 0.37) for c in "abcde"})
    for t in range(100):
        trng = np.random.default_rng(50_000 + t)
        dets = []
        for img in range(3):
            scores = trng.permutation(np.linspace(0.05, 0.95, 6))
            for i, s in enumerate(scores):
                x, y = trng.uniform(0, 50, size=2)
                dets.append(
                    Detection(img, "abcde"[i % 5], BBox(x, y, x + 5, y + 5), float(s))
                )
        rescored = rescore_detections(dets, uniform, 0.2)
        for img in range(3):
            idx = [i for i, d in enumerate(dets) if d.image_id == img]
            before = max(idx, key=lambda i: dets[i].score)
            after = max(idx, key=lambda i: rescored[i].score)
            assert before == after
    _report(4, "blend boundaries exact, 100x100 grid monotone, ordering kept on "
               "1000 tables, uniform-r argmax invariant")


def test_criterion_5_evaluator_reference():
    """500 random tiny instances match the brute-force reference exactly;
    perfect worlds give mAP_all = 1.0."""
    rng = np.random.default_rng(5)
    for _ in range(500):
        n_images = int(rng.integers(1, 6))
        n_cats = int(rng.integers(1, 6))
        n_dets = int(rng.integers(0, 11))
        n_gts = int(rng.integers(1, 9))
        cats = list(range(1, n_cats + 1))
        k = rng.integers(0, n_cats + 1)
        split = CategorySplit(frozenset(cats[:k]), frozenset(cats[k:]))
        dets, ref_dets = [], []
        scores = rng.permutation(np.linspace(0.05, 0.95, max(n_dets, 1)))
        for i in range(n_dets):
            img = int(rng.integers(1, n_images + 1))
            cat = cats[int(rng.integers(0, n_cats))]
            x, y = rng.uniform(0, 60, 2)
            w, h = rng.uniform(5, 40, 2)
            dets.append(Detection(img, cat, BBox(x, y, x + w, y + h), float(scores[i])))
            ref_dets.append((img, cat, (x, y, x + w, y + h), float(scores[i])))
        gts, ref_gts = [], []
        from ovpost.evaluation import GroundTruth

        for _ in range(n_gts):
            img = int(rng.integers(1, n_images + 1))
            cat = cats[int(rng.integers(0, n_cats))]
            x, y = rng.uniform(0, 60, 2)
            w, h = rng.uniform(5, 40, 2)
            crowd = bool(rng.random() < 0.15)
            gts.append(GroundTruth(img, cat, BBox(x, y, x + w, y + h), crowd))
            ref_gts.append((img, cat, (x, y, x + w, y + h), crowd))
        report = evaluate(dets, gts, split, iou_thr=0.5)
        per_cat, mb, mn, ma = ref_evaluate(ref_dets, ref_gts, split.base, split.novel, 0.5)
        assert report.per_category_ap == per_cat
        assert report.map_base == mb and report.map_novel == mn and report.map_all == ma

    world = generate_synthetic_world(SyntheticWorldSpec(n_images=10, seed=50))
    perfect = evaluate(world.detections, world.annotations.gts, world.split)
    assert perfect.map_all == 1.0
    _report(5, "500 random tiny instances equal the brute-force reference exactly; "
               "perfect world scores mAP_all = 1.0")


def test_criterion_6_pos_directional_improvement():
    """With defaults (k=5, alpha=0.2, theta=0.5) and partial FPs injected on
    novel categories at rate 0.5, POS strictly raises mAP_novel for every one
    of 20 seeds, in under 60 s."""
    start = time.perf_counter()
    config = Config()  # defaults: k=5, alpha=0.2, theta=0.5, scope novel_only
    assert (config.k, config.alpha, config.theta) == (5, 0.2, 0.5)
    for seed in range(20):
        spec = SyntheticWorldSpec(
            n_images=40,
            detector_noise=DetectorNoise(
                score_noise_sd=0.03,
                localization_noise_sd=0.03,
                partial_fp_rate=0.5,
            ),
            fp_categories="novel_only",
            seed=seed,
        )
        world = generate_synthetic_world(spec)
        inputs = PipelineInputs(
            split=world.split,
            detections=world.detections,
            annotations=world.annotations,
            class_table=world.class_table,
            scene_table=world.scene_table,
            scene_contexts=world.scene_contexts,
        )
        with_pos = run_pipeline(config, inputs)
        without_pos = run_pipeline(config.replaced(pos_enabled=False), inputs)
        assert with_pos.report.map_novel > without_pos.report.map_novel, (
            f"seed {seed}: {with_pos.report.map_novel} <= {without_pos.report.map_novel}"
        )
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s (budget 60s)"
    _report(6, f"mAP_novel improved with POS in 20/20 seeds ({elapsed:.1f}s)")


def test_criterion_7_ablation_sweep(tmp_path):
    """Theta and alpha sweeps emit schema-stable, seed-deterministic tables."""
    spec = SyntheticWorldSpec(
        n_images=20,
        detector_noise=DetectorNoise(0.03, 0.03, 0.4, 0.1),
        seed=9,
    )
    world = generate_synthetic_world(spec)
    inputs = PipelineInputs(
        split=world.split,
        detections=world.detections,
        annotations=world.annotations,
        class_table=world.class_table,
        scene_table=world.scene_table,
        scene_contexts=world.scene_contexts,
    )
    theta_grid = {"theta": [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4]}
    alpha_grid = {"alpha": [0.0, 0.1, 0.2, 0.3, 0.4]}
    theta_rows = sweep(Config(), inputs, theta_grid)
    alpha_rows = sweep(Config(), inputs, alpha_grid)
    assert len(theta_rows) == 7 and len(alpha_rows) == 5
    for rows, param in ((theta_rows, "theta"), (alpha_rows, "alpha")):
        for row in rows:
            assert set(row) == {param, "map_base", "map_novel", "map_all"}
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_sweep(theta_rows, p1)
    save_sweep(sweep(Config(), inputs, theta_grid), p2)
    assert p1.read_bytes() == p2.read_bytes()
    _report(7, "theta sweep emits 7 rows, alpha sweep 5 rows, parameter + mAP "
               "columns, byte-identical across reruns")


def test_criterion_8_format_roundtrips(tmp_path):
    """save -> load -> save is byte-identical for embtab text and binary,
    scene contexts, and detections on 100 random tables."""
    rng = np.random.default_rng(8)
    for trial in range(100):
        n = int(rng.integers(1, 12))
        dim = int(rng.integers(2, 40))
        vecs = rng.standard_normal((n, dim))
        table = EmbeddingTable(
            [f"name {trial}-{i}" for i in range(n)],
            vecs,
            normalized=False,
            comments=[f"# trial {trial}"],
        )
        t1, t2 = tmp_path / "t1", tmp_path / "t2"
        formats.save_embedding_table(table, t1)
        formats.save_embedding_table(formats.load_embedding_table(t1), t2)
        assert t1.read_bytes() == t2.read_bytes()
        formats.save_embedding_table(table, t1, binary=True)
        formats.save_embedding_table(formats.load_embedding_table(t1), t2, binary=True)
        assert t1.read_bytes() == t2.read_bytes()

        n_scene = int(rng.integers(1, 8))
        probs = sorted(rng.dirichlet(np.ones(n_scene)), reverse=True)
        ctx = SceneContext(trial, tuple((f"s{i}", float(p)) for i, p in enumerate(probs)))
        formats.save_scene_contexts([ctx], t1)
        formats.save_scene_contexts(formats.load_scene_contexts(t1), t2)
        assert t1.read_bytes() == t2.read_bytes()

        dets = []
        for _ in range(int(rng.integers(0, 9))):
            x, y = rng.uniform(0, 500, 2)
            w, h = rng.uniform(0.5, 90, 2)
            dets.append(
                Detection(
                    int(rng.integers(1, 4)),
                    int(rng.integers(1, 6)),
                    BBox(x, y, x + w, y + h),
                    float(rng.uniform(0, 1)),
                )
            )
        formats.save_detections(dets, t1)
        formats.save_detections(formats.load_detections(t1), t2)
        assert t1.read_bytes() == t2.read_bytes()
    _report(8, "embtab text+binary, scene-context, and detection files "
               "round-trip byte-identically over 100 random tables")
