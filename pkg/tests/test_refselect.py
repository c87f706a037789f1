"""Reference selection: embedding, scoring, argmax, and the directory flow."""

import io

import numpy as np
import pytest
from PIL import Image

from mask4d.errors import (
    DegenerateEmbeddingError,
    FormatError,
    ValidationError,
)
from mask4d.refselect import (
    CANONICAL_DEGENERATE,
    BaselineEmbedder,
    HttpEmbedder,
    baseline_embed,
    is_degenerate,
    masked_object_crop,
    score_candidates,
    select_reference,
    select_reference_from_dirs,
)


def _png(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


class TestBaselineEmbed:
    def test_byte_identical_images_identical_vectors(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(40, 40, 3), dtype=np.uint8)
        blob = _png(img)
        np.testing.assert_array_equal(baseline_embed(blob), baseline_embed(bytes(blob)))

    def test_brightness_shift_invariance(self):
        # grayscale path: integer arithmetic makes the invariance exact
        rng = np.random.default_rng(1)
        gray = rng.integers(0, 200, size=(32, 32)).astype(np.float64)
        np.testing.assert_array_equal(
            baseline_embed(gray), baseline_embed(gray + 10.0)
        )

    def test_brightness_shift_invariance_rgb(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 200, size=(48, 48, 3), dtype=np.uint8)
        v1 = baseline_embed(img.astype(np.float64))
        v2 = baseline_embed(img.astype(np.float64) + 10.0)
        np.testing.assert_allclose(v1, v2, atol=1e-12)

    def test_gradient_matches_scripted_oracle(self):
        # independent oracle: 2x2 block mean, mean-subtract, L2-normalize
        u = np.arange(32, dtype=np.float64)
        gray = np.add.outer(2.0 * u, 3.0 * u)  # plane ramp
        blocks = gray.reshape(16, 2, 16, 2).mean(axis=(1, 3))
        expect = blocks.ravel() - blocks.mean()
        expect = expect / np.linalg.norm(expect)
        np.testing.assert_allclose(baseline_embed(gray), expect, atol=1e-13)

    def test_constant_image_canonical_vector(self):
        vec = baseline_embed(np.full((20, 20), 77.0))
        np.testing.assert_array_equal(vec, CANONICAL_DEGENERATE)
        assert is_degenerate(vec)

    def test_unit_norm(self):
        rng = np.random.default_rng(3)
        vec = baseline_embed(rng.uniform(0, 255, size=(33, 57)))
        assert abs(np.linalg.norm(vec) - 1.0) < 1e-9
        assert vec.shape == (256,)

    def test_undecodable_bytes_rejected(self):
        with pytest.raises(FormatError):
            baseline_embed(b"this is not an image")

    def test_nonuniform_sizes_supported(self):
        # odd sizes exercise the fractional-overlap weights
        rng = np.random.default_rng(4)
        vec = baseline_embed(rng.uniform(0, 255, size=(17, 23)))
        assert vec.shape == (256,)
        assert np.isfinite(vec).all()


class TestScoreCandidates:
    def test_identical_embedding_scores_one(self):
        v = np.array([[0.6, 0.8, 0.0]])
        scores = score_candidates(v, v)
        np.testing.assert_allclose(scores, [1.0], atol=1e-12)

    def test_orthogonal_scores_zero(self):
        cand = np.array([[1.0, 0.0, 0.0]])
        frames = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        np.testing.assert_allclose(score_candidates(cand, frames), [0.0], atol=1e-15)

    def test_matches_bruteforce_double_loop(self):
        rng = np.random.default_rng(5)
        cand = rng.normal(size=(3, 16))
        frames = rng.normal(size=(4, 16))
        got = score_candidates(cand, frames)
        # oracle: explicit double loop over (candidate, frame) pairs
        want = np.zeros(3)
        for k in range(3):
            total = 0.0
            for j in range(4):
                ck = cand[k] / np.linalg.norm(cand[k])
                fj = frames[j] / np.linalg.norm(frames[j])
                total += float(np.dot(ck, fj))
            want[k] = total / 4
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_scores_bounded(self):
        rng = np.random.default_rng(6)
        scores = score_candidates(rng.normal(size=(8, 32)), rng.normal(size=(5, 32)))
        assert np.all(scores <= 1.0 + 1e-12) and np.all(scores >= -1.0 - 1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateEmbeddingError):
            score_candidates(np.zeros((1, 4)), np.ones((1, 4)))

    def test_frame_order_invariance(self):
        rng = np.random.default_rng(7)
        cand = rng.normal(size=(3, 8))
        frames = rng.normal(size=(5, 8))
        s1 = score_candidates(cand, frames)
        s2 = score_candidates(cand, frames[::-1])
        np.testing.assert_allclose(s1, s2, atol=1e-12)


class TestSelectReference:
    def test_argmax(self):
        assert select_reference([0.2, 0.9, 0.5]) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert select_reference([0.7, 0.7]) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            select_reference([])

    def test_argmax_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            scores = rng.normal(size=6)
            base = select_reference(scores)
            assert select_reference(np.exp(scores)) == base
            assert select_reference(3.0 * scores + 11.0) == base
            assert select_reference(np.tanh(scores)) == base

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(9)
        scores = rng.normal(size=7)
        perm = rng.permutation(7)
        k = select_reference(scores)
        k_perm = select_reference(scores[perm])
        assert perm[k_perm] == k

    def test_self_selection(self):
        rng = np.random.default_rng(10)
        frames = np.tile(rng.normal(size=16), (4, 1))
        cands = rng.normal(size=(5, 16))
        cands[3] = frames[0]
        scores = score_candidates(cands, frames)
        assert scores[3] == pytest.approx(1.0, abs=1e-12)
        assert select_reference(scores) == 3


class TestMaskedCrop:
    def test_crop_is_bbox_with_white_background(self):
        frame = np.full((10, 10, 3), 50, dtype=np.uint8)
        mask = np.zeros((10, 10), dtype=np.uint8)
        mask[3:6, 4:8] = 255
        mask[4, 5] = 0  # interior background pixel
        crop = masked_object_crop(frame, mask)
        assert crop.shape == (3, 4, 3)
        assert tuple(crop[0, 0]) == (50, 50, 50)
        assert tuple(crop[1, 1]) == (255, 255, 255)  # masked-out goes white

    def test_empty_mask_returns_none(self):
        frame = np.zeros((5, 5, 3), dtype=np.uint8)
        assert masked_object_crop(frame, np.zeros((5, 5), dtype=np.uint8)) is None


class TestPlantedCandidate:
    def test_planted_crop_wins_among_distractors(self, tmp_path):
        # build preview frames of a rendered synthetic scene, crop the
        # object, plant that crop among noise candidates
        from mask4d.geometry import RigidPlacement
        from mask4d.propagation import PlacementTrajectory
        from mask4d.render import render_sequence
        from mask4d.synthetic import (
            SyntheticSceneSpec,
            make_ball_cloud,
            synthesize_scene,
        )

        bundle, truth = synthesize_scene(SyntheticSceneSpec(kind="ground-plane"))
        cloud = make_ball_cloud(radius=0.18, count=500)
        traj = PlacementTrajectory.constant(
            RigidPlacement(1.0, np.eye(3), np.array([0.0, 0.2, 2.2])),
            bundle.frame_count,
        )
        seq = render_sequence(cloud, traj, bundle)

        frames_dir = tmp_path / "frames"
        masks_dir = tmp_path / "masks"
        cands_dir = tmp_path / "cands"
        for d in (frames_dir, masks_dir, cands_dir):
            d.mkdir()
        for t in range(4):
            Image.fromarray(seq.previews[t]).save(frames_dir / f"{t:05d}.png")
            Image.fromarray(seq.masks[t]).save(masks_dir / f"{t:05d}.png")

        planted = masked_object_crop(seq.previews[0], seq.masks[0])
        rng = np.random.default_rng(11)
        distract_a = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        gradient = np.tile(
            np.linspace(0, 255, 24, dtype=np.uint8)[None, :, None], (24, 1, 3)
        )
        Image.fromarray(distract_a).save(cands_dir / "a.png")
        Image.fromarray(gradient).save(cands_dir / "b.png")
        Image.fromarray(planted).save(cands_dir / "c_planted.png")

        result = select_reference_from_dirs(frames_dir, masks_dir, cands_dir)
        assert result["candidates"][result["selected"]] == "c_planted.png"
        assert result["provider"] == "baseline-16x16"
        assert result["frames_used"] == 4
        assert len(result["scores"]) == 3


class TestHttpEmbedder:
    def test_posts_bytes_and_normalizes_response(self):
        import httpx

        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["content-type"] = request.headers.get("content-type")
            seen["n_bytes"] = len(request.content)
            return httpx.Response(200, json=[3.0, 0.0, 4.0])

        provider = HttpEmbedder(
            "http://embedder.test/embed",
            client=httpx.Client(transport=httpx.MockTransport(handler)),
        )
        vec = provider.embed(b"\x89PNG fake")
        np.testing.assert_allclose(vec, [0.6, 0.0, 0.8])
        assert provider.dimension == 3
        assert seen["content-type"] == "image/png"
        assert seen["n_bytes"] == 9

    def test_zero_vector_response_rejected(self):
        import httpx

        provider = HttpEmbedder(
            "http://embedder.test/embed",
            client=httpx.Client(
                transport=httpx.MockTransport(
                    lambda req: httpx.Response(200, json=[0.0, 0.0])
                )
            ),
        )
        with pytest.raises(DegenerateEmbeddingError):
            provider.embed(b"x")

    def test_embed_many_bounded_pool(self):
        import httpx

        provider = HttpEmbedder(
            "http://embedder.test/embed",
            max_in_flight=2,
            client=httpx.Client(
                transport=httpx.MockTransport(
                    lambda req: httpx.Response(200, json=[1.0, float(len(req.content))])
                )
            ),
        )
        out = provider.embed_many([b"a", b"bb", b"ccc"])
        assert len(out) == 3
        assert all(abs(np.linalg.norm(v) - 1.0) < 1e-12 for v in out)


class TestProviderProtocol:
    def test_baseline_satisfies_protocol(self):
        from mask4d.refselect import EmbeddingProvider

        assert isinstance(BaselineEmbedder(), EmbeddingProvider)

    def test_baseline_deterministic(self):
        rng = np.random.default_rng(13)
        blob = _png(rng.integers(0, 256, size=(30, 30, 3), dtype=np.uint8))
        e = BaselineEmbedder()
        np.testing.assert_array_equal(e.embed(blob), e.embed(blob))
