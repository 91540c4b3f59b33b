import math

import numpy as np
import pytest

from ovpost.background import (
    BackgroundEmbedding,
    EmbeddingTable,
    RescoreEntry,
    RescoreTable,
    SceneContext,
    apply_prompt,
    blend_scores,
    build_background_embedding,
    normalize_table,
    rescore_coefficients,
    rescore_detections,
    score_regions,
)
from ovpost.errors import (
    DegenerateSimilaritiesWarning,
    DimensionMismatch,
    DomainError,
    DuplicateName,
    InsufficientScenes,
    MissingCategory,
    MissingSceneEmbedding,
    ValidationError,
    ZeroVector,
)
from ovpost.geometry import BBox
from ovpost.suppression import Detection


def _unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _table(names, rows, normalized=True):
    return EmbeddingTable(names, np.asarray(rows, dtype=float), normalized=normalized)


class TestEmbeddingTable:
    def test_duplicate_names_rejected(self):
        with pytest.raises(DuplicateName):
            _table(["a", "a"], [[1, 0], [0, 1]])

    def test_lookup(self):
        t = _table(["a", "b"], [[1, 0], [0, 1]])
        assert "a" in t
        assert np.array_equal(t["b"], [0, 1])
        assert t.dim == 2


class TestNormalizeTable:
    def test_unit_vector_unchanged(self):
        t = normalize_table(_table(["a"], [[1.0, 0.0]], normalized=False))
        assert np.array_equal(t["a"], [1.0, 0.0])

    def test_three_four_five(self):
        t = normalize_table(_table(["a"], [[3.0, 4.0]], normalized=False))
        assert np.allclose(t["a"], [0.6, 0.8])

    def test_random_512_dim(self):
        rng = np.random.default_rng(0)
        t = normalize_table(_table(["a"], [rng.standard_normal(512)], normalized=False))
        # recompute the norm independently of numpy.linalg
        norm = math.sqrt(math.fsum(float(v) * float(v) for v in t["a"]))
        assert abs(norm - 1.0) < 1e-9

    def test_zero_vector_named(self):
        with pytest.raises(ZeroVector, match="bad"):
            normalize_table(_table(["ok", "bad"], [[1, 0], [0, 0]], normalized=False))


class TestSceneContext:
    def test_sorted_required(self):
        with pytest.raises(ValidationError):
            SceneContext(1, (("a", 0.2), ("b", 0.5)))

    def test_sum_cap(self):
        with pytest.raises(ValidationError):
            SceneContext(1, (("a", 0.8), ("b", 0.7)))


class TestBuildBackgroundEmbedding:
    def make_inputs(self):
        ctx = SceneContext(1, (("kitchen", 0.6), ("bar", 0.3), ("attic", 0.1)))
        names = [apply_prompt("Part of {scene}", s) for s in ("kitchen", "bar", "attic")]
        vecs = np.eye(3)
        return ctx, _table(names, vecs)

    def test_k1_is_top_scene_embedding(self):
        ctx, table = self.make_inputs()
        bg = build_background_embedding(ctx, table, 1)
        assert np.array_equal(bg.vector, table["Part of kitchen"])
        assert bg.source_scenes == ("kitchen",)

    def test_k2_orthogonal_mean(self):
        ctx, table = self.make_inputs()
        bg = build_background_embedding(ctx, table, 2)
        u, v = table["Part of kitchen"], table["Part of bar"]
        assert np.allclose(bg.vector, (u + v) / math.sqrt(2.0))
        assert abs(np.linalg.norm(bg.vector) - 1.0) < 1e-12

    def test_k5_mean_of_five_unit_norm(self):
        rng = np.random.default_rng(4)
        scenes = [f"s{i}" for i in range(6)]
        probs = sorted(rng.dirichlet(np.ones(6)), reverse=True)
        ctx = SceneContext(1, tuple(zip(scenes, probs)))
        table = _table(
            [apply_prompt("Part of {scene}", s) for s in scenes],
            [_unit(rng, 32) for _ in scenes],
        )
        bg = build_background_embedding(ctx, table, 5)
        assert bg.k == 5
        assert len(bg.source_scenes) == 5
        assert abs(np.linalg.norm(bg.vector) - 1.0) < 1e-12
        mean = np.mean([table[apply_prompt("Part of {scene}", s)] for s in scenes[:5]], axis=0)
        assert np.allclose(bg.vector, mean / np.linalg.norm(mean))

    def test_no_renormalize_flag(self):
        ctx, table = self.make_inputs()
        bg = build_background_embedding(ctx, table, 2, renormalize=False)
        assert np.allclose(np.linalg.norm(bg.vector), math.sqrt(2.0) / 2.0)

    def test_missing_scene(self):
        ctx, table = self.make_inputs()
        with pytest.raises(MissingSceneEmbedding, match="A photo of kitchen"):
            build_background_embedding(ctx, table, 2, template="A photo of {scene}")

    def test_insufficient_scenes(self):
        ctx, table = self.make_inputs()
        with pytest.raises(InsufficientScenes):
            build_background_embedding(ctx, table, 4)

    def test_top_k_ignores_tail_order(self):
        # equal-probability scenes beyond rank k don't affect the embedding
        names = ["a", "b", "c", "d"]
        vecs = np.eye(4)
        table = _table([f"Part of {n}" for n in names], vecs)
        ctx1 = SceneContext(1, (("a", 0.5), ("b", 0.3), ("c", 0.1), ("d", 0.1)))
        ctx2 = SceneContext(1, (("a", 0.5), ("b", 0.3), ("d", 0.1), ("c", 0.1)))
        bg1 = build_background_embedding(ctx1, table, 2)
        bg2 = build_background_embedding(ctx2, table, 2)
        assert np.array_equal(bg1.vector, bg2.vector)


def _bg(vec):
    v = np.asarray(vec, dtype=float)
    return BackgroundEmbedding(v / np.linalg.norm(v), ("fixed",), 1)


class TestRescoreCoefficients:
    def test_two_category_closed_form(self):
        s = 0.6
        c = math.sqrt(1 - s * s)
        table = _table(["near", "far"], [[s, c], [-s, c]])
        bg = _bg([1.0, 0.0])
        out = rescore_coefficients(table, bg)
        assert out["near"].raw_similarity == pytest.approx(s)
        assert out["far"].raw_similarity == pytest.approx(-s)
        assert out["near"].normalized == pytest.approx(1.0)
        assert out["far"].normalized == pytest.approx(-1.0)
        assert out["near"].coefficient == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-12)
        assert out["far"].coefficient == pytest.approx(1 / (1 + math.exp(1)), abs=1e-12)

    def test_degenerate_all_equal(self):
        table = _table(["a", "b"], [[0.0, 1.0], [0.0, -1.0]])
        bg = _bg([1.0, 0.0])  # both similarities exactly 0
        with pytest.warns(DegenerateSimilaritiesWarning):
            out = rescore_coefficients(table, bg)
        assert all(e.coefficient == 0.5 for e in out.entries.values())

    def test_argmax_category_gets_max_coefficient(self):
        rng = np.random.default_rng(9)
        vecs = [_unit(rng, 16) for _ in range(8)]
        bg = _bg(vecs[3])
        table = _table([f"c{i}" for i in range(8)], vecs)
        out = rescore_coefficients(table, bg)
        best = max(out.entries, key=lambda n: out[n].coefficient)
        assert best == "c3"

    def test_ordering_preserved(self):
        rng = np.random.default_rng(10)
        for norm in ("zscore", "minmax", "none"):
            vecs = [_unit(rng, 8) for _ in range(6)]
            table = _table([f"c{i}" for i in range(6)], vecs)
            out = rescore_coefficients(table, _bg(_unit(rng, 8)), normalization=norm)
            phis = [out[f"c{i}"].raw_similarity for i in range(6)]
            coeffs = [out[f"c{i}"].coefficient for i in range(6)]
            assert np.argsort(phis).tolist() == np.argsort(coeffs).tolist()

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(11)
        vecs = [_unit(rng, 8) for _ in range(5)]
        names = [f"c{i}" for i in range(5)]
        bg = _bg(_unit(rng, 8))
        direct = rescore_coefficients(_table(names, vecs), bg)
        perm = [3, 0, 4, 1, 2]
        shuffled = rescore_coefficients(
            _table([names[i] for i in perm], [vecs[i] for i in perm]), bg
        )
        for name in names:
            assert direct[name].coefficient == pytest.approx(
                shuffled[name].coefficient, abs=1e-15
            )

    def test_needs_two_categories(self):
        with pytest.raises(ValidationError):
            rescore_coefficients(_table(["a"], [[1.0, 0.0]]), _bg([1, 0]))


class TestBlendScores:
    def test_alpha_zero_identity(self):
        assert blend_scores(0.37, 0.9, 0.0) == 0.37

    def test_alpha_one_returns_r(self):
        assert blend_scores(0.37, 0.9, 1.0) == 0.9

    def test_geometric_mean_case(self):
        # sqrt(0.64 * 0.25) = 0.4, confirmed with high-precision arithmetic
        from mpmath import mp, mpf

        mp.dps = 50
        expected = float(mpf("0.64") ** mpf("0.5") * mpf("0.25") ** mpf("0.5"))
        got = blend_scores(0.64, 0.25, 0.5)
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(0.4, abs=1e-12)

    def test_zero_score_stays_zero(self):
        assert blend_scores(0.0, 0.5, 0.3) == 0.0

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            blend_scores(1.2, 0.5, 0.5)
        with pytest.raises(DomainError):
            blend_scores(0.5, 1.0, 0.5)
        with pytest.raises(DomainError):
            blend_scores(0.5, 0.5, -0.1)

    def test_monotone_in_both_arguments(self):
        grid = np.linspace(0.01, 0.99, 25)
        for alpha in (0.2, 0.5, 0.8):
            for r in (0.25, 0.75):
                vals = [blend_scores(s, r, alpha) for s in grid]
                assert all(b >= a for a, b in zip(vals, vals[1:]))
            for s in (0.25, 0.75):
                vals = [blend_scores(s, r, alpha) for r in grid]
                assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestScoreRegions:
    def setup_method(self):
        rng = np.random.default_rng(12)
        self.class_vecs = np.stack([_unit(rng, 24) for _ in range(5)])
        self.table = _table([f"c{i}" for i in range(5)], self.class_vecs)
        self.bg = _bg(_unit(rng, 24))

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(13)
        regions = np.stack([_unit(rng, 24) for _ in range(7)])
        probs = score_regions(regions, self.table, self.bg, temperature=0.05)
        assert probs.shape == (7, 6)
        assert np.all(probs >= 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_matching_class_takes_mass_at_low_temperature(self):
        probs = score_regions(self.class_vecs[2][None, :], self.table, self.bg, 0.01)
        assert probs[0, 2] > 0.99

    def test_background_column_argmax(self):
        probs = score_regions(self.bg.vector[None, :], self.table, self.bg, 0.01)
        assert int(np.argmax(probs[0])) == 5

    def test_matches_bruteforce_softmax(self):
        rng = np.random.default_rng(14)
        region = _unit(rng, 24)
        probs = score_regions(region[None, :], self.table, self.bg, 0.07)
        sims = [float(region @ v) for v in self.class_vecs] + [float(region @ self.bg.vector)]
        raw = [math.exp(s / 0.07) for s in sims]
        expected = [v / math.fsum(raw) for v in raw]
        assert np.allclose(probs[0], expected, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            score_regions(np.zeros((1, 8)), self.table, self.bg, 0.05)


class TestRescoreDetections:
    def _dets(self, rng, n, cats):
        out = []
        for i in range(n):
            x, y = rng.uniform(0, 50, size=2)
            cat = cats[int(rng.integers(0, len(cats)))]
            out.append(Detection(1, cat, BBox(x, y, x + 5, y + 5), float(rng.uniform(0, 1))))
        return out

    def test_alpha_zero_identity(self):
        rng = np.random.default_rng(15)
        table = RescoreTable({"a": RescoreEntry(0.1, 0.5, 0.62)})
        dets = self._dets(rng, 5, ["a"])
        assert rescore_detections(dets, table, 0.0) == dets

    def test_fixed_point(self):
        table = RescoreTable({"a": RescoreEntry(0.0, 0.0, 0.5)})
        d = Detection(1, "a", BBox(0, 0, 5, 5), 0.5)
        for alpha in (0.0, 0.2, 0.7, 1.0):
            assert rescore_detections([d], table, alpha)[0].score == pytest.approx(0.5)

    def test_elementwise_matches_scalar_blend(self):
        rng = np.random.default_rng(16)
        coeffs = {c: RescoreEntry(0.0, 0.0, float(rng.uniform(0.1, 0.9))) for c in "abc"}
        table = RescoreTable(coeffs)
        dets = self._dets(rng, 100, list("abc"))
        out = rescore_detections(dets, table, 0.2)
        for before, after in zip(dets, out):
            expected = blend_scores(before.score, coeffs[before.category_id].coefficient, 0.2)
            assert after.score == expected
            assert after.bbox == before.bbox
            assert after.category_id == before.category_id

    def test_missing_category(self):
        table = RescoreTable({"a": RescoreEntry(0.0, 0.0, 0.5)})
        d = Detection(1, "zz", BBox(0, 0, 5, 5), 0.5)
        with pytest.raises(MissingCategory):
            rescore_detections([d], table, 0.2)

    def test_id_mapping(self):
        table = RescoreTable({"name_7": RescoreEntry(0.0, 0.0, 0.25)})
        d = Detection(1, 7, BBox(0, 0, 5, 5), 0.64)
        out = rescore_detections([d], table, 0.5, id_to_name={7: "name_7"})
        assert out[0].score == pytest.approx(0.4, abs=1e-12)
