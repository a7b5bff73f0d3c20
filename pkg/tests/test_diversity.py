import math
import random

import numpy as np
import pytest

from ifdkit.data import Dataset, InstructionSample
from ifdkit.diversity import (
    DiversityConfig,
    EmbeddingSet,
    diversify,
    facility_location_greedy,
    hashed_bow_embed,
    load_embeddings,
    save_embeddings,
)
from ifdkit.errors import ConfigError, DataError
from ifdkit.scoring import ScoredSample
from ifdkit.selection import SelectionConfig, select_top_ifd
from oracles import clipped_cosine_matrix, facility_opt, facility_value


def embeddings_from(vectors, ids=None) -> EmbeddingSet:
    arr = np.asarray(vectors, dtype=np.float32)
    ids = ids or [f"{i:06d}" for i in range(arr.shape[0])]
    return EmbeddingSet(ids=ids, vectors=arr, embedder="test")


def sample(i, text) -> InstructionSample:
    return InstructionSample(id=f"{i:06d}", instruction=text, input=None, response=text)


class TestHashedBow:
    def test_identical_texts_identical_vectors(self):
        samples = [sample(0, "the quick brown fox"), sample(1, "the quick brown fox")]
        emb = hashed_bow_embed(samples, dim=256)
        np.testing.assert_array_equal(emb.vectors[0], emb.vectors[1])
        cos = float(emb.vectors[0] @ emb.vectors[1])
        assert cos == pytest.approx(1.0, abs=1e-6)

    def test_disjoint_tokens_orthogonal_at_large_dim(self):
        samples = [sample(0, "alpha beta gamma"), sample(1, "delta epsilon zeta")]
        emb = hashed_bow_embed(samples, dim=1 << 16)
        assert float(emb.vectors[0] @ emb.vectors[1]) == 0.0

    def test_vectors_unit_norm(self):
        samples = [sample(i, f"text number {i} with words") for i in range(5)]
        emb = hashed_bow_embed(samples, dim=64)
        norms = np.linalg.norm(emb.vectors, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_golden_vectors_fixed_corpus(self):
        """Regression pin from a reference run; catches hash or tokenizer drift."""
        samples = [sample(0, "write a story"), sample(1, "the story"), sample(2, "list numbers")]
        emb = hashed_bow_embed(samples, dim=8)
        expected = np.array([
            [0.57735026, 0.0, 0.0, 0.0, 0.57735026, 0.57735026, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.70710677, 0.70710677, 0.0],
            [0.0, 0.0, 0.70710677, 0.0, 0.0, 0.0, 0.0, 0.70710677],
        ], dtype=np.float32)
        np.testing.assert_allclose(emb.vectors, expected, atol=1e-7)

    def test_empty_text_is_data_error(self):
        # whitespace-only pieces leave no tokens
        bad = InstructionSample(id="x", instruction=" ", input=None, response="\t")
        with pytest.raises(DataError, match="no tokens"):
            hashed_bow_embed([bad], dim=16)


class TestRemoteEmbedder:
    def test_golden_replay_with_bearer_token(self, monkeypatch):
        import json
        from pathlib import Path

        import httpx

        from ifdkit.diversity import remote_embed

        golden_path = Path(__file__).resolve().parents[1] / "protocol" / "golden" / "embed_responses.json"
        if not golden_path.exists():
            pytest.skip("embed goldens not captured yet")
        golden = json.loads(golden_path.read_text())[1]   # three-text corpus

        monkeypatch.setenv("IFDKIT_SCORER_TOKEN", "sesame")
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json=golden)

        samples = [sample(i, f"text {i}") for i in range(3)]
        client = httpx.Client(transport=httpx.MockTransport(handler),
                              headers={"Authorization": "Bearer sesame"})
        emb = remote_embed(samples, "http://scorer", client=client)
        assert seen["auth"] == "Bearer sesame"
        assert len(seen["body"]["texts"]) == 3
        assert emb.vectors.shape == (3, golden["dim"])
        assert emb.embedder == golden["model"]
        np.testing.assert_allclose(
            emb.vectors, np.asarray(golden["vectors"], dtype=np.float32), atol=1e-7
        )

    def test_http_error_is_backend_error(self):
        import httpx

        from ifdkit.diversity import remote_embed
        from ifdkit.errors import BackendError

        client = httpx.Client(transport=httpx.MockTransport(
            lambda request: httpx.Response(500, text="boom")
        ))
        with pytest.raises(BackendError, match="500"):
            remote_embed([sample(0, "x")], "http://scorer", client=client)


class TestEmbeddingCache:
    def test_round_trip(self, tmp_path):
        rng = np.random.RandomState(4)
        emb = embeddings_from(rng.rand(7, 12))
        path = tmp_path / "emb.bin"
        save_embeddings(emb, path)
        back = load_embeddings(path)
        assert back.ids == emb.ids
        assert back.dim == 12
        assert back.embedder == "test"
        np.testing.assert_array_equal(back.vectors, emb.vectors)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTEMB00" + b"\x00" * 64)
        with pytest.raises(DataError, match="magic"):
            load_embeddings(path)

    def test_layout_is_stable(self, tmp_path):
        emb = embeddings_from([[1.0, 0.0], [0.0, 1.0]], ids=["a", "b"])
        path = tmp_path / "emb.bin"
        save_embeddings(emb, path)
        blob = path.read_bytes()
        assert blob[:8] == b"IFDEMB01"
        assert int.from_bytes(blob[8:12], "little") == 2   # dim
        assert int.from_bytes(blob[12:16], "little") == 2  # count


class TestFacilityLocationGreedy:
    def test_full_selection_returns_ground_set(self):
        rng = np.random.RandomState(0)
        emb = embeddings_from(rng.rand(6, 4))
        picked = facility_location_greedy(emb, set(emb.ids), k=6)
        assert sorted(picked) == sorted(emb.ids)

    def test_redundancy_avoidance(self):
        # two identical points and one distant point: k=2 takes one duplicate
        # plus the distant point
        emb = embeddings_from([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        picked = facility_location_greedy(emb, set(emb.ids), k=2)
        assert set(picked) == {"000000", "000002"}  # tie -> earliest duplicate

    def test_tie_break_is_original_order(self):
        emb = embeddings_from([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        picked = facility_location_greedy(emb, set(emb.ids), k=1)
        assert picked == ["000000"]

    def test_k_out_of_range(self):
        emb = embeddings_from([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ConfigError):
            facility_location_greedy(emb, set(emb.ids), k=0)
        with pytest.raises(ConfigError):
            facility_location_greedy(emb, set(emb.ids), k=3)

    def test_missing_ground_ids(self):
        emb = embeddings_from([[1.0, 0.0]])
        with pytest.raises(DataError, match="missing"):
            facility_location_greedy(emb, {"nope"}, k=1)

    def test_greedy_approximation_and_diminishing_gains(self):
        rng = np.random.RandomState(77)
        bound = 1.0 - 1.0 / math.e
        for trial in range(100):
            n = rng.randint(3, 9)
            k = rng.randint(1, 4)
            k = min(k, n)
            vectors = rng.randn(n, rng.randint(2, 5))
            emb = embeddings_from(vectors)
            picked = facility_location_greedy(emb, set(emb.ids), k=k)
            sim = clipped_cosine_matrix(vectors)
            picked_idx = [emb.ids.index(p) for p in picked]
            got = facility_value(sim, picked_idx)
            opt = facility_opt(sim, k)
            assert got >= bound * opt - 1e-9
            # diminishing marginal gains along the pick order
            gains = []
            for t in range(len(picked_idx)):
                gains.append(facility_value(sim, picked_idx[: t + 1]) -
                             facility_value(sim, picked_idx[:t]))
            for earlier, later in zip(gains, gains[1:]):
                assert earlier >= later - 1e-9

    def test_lazy_equals_naive_bit_identical(self):
        rng = np.random.RandomState(123)
        for trial in range(60):
            n = rng.randint(2, 16)
            k = rng.randint(1, n + 1)
            if trial % 3 == 0:
                # duplicated rows force gain ties
                base = rng.rand(max(2, (n + 1) // 2), 3)
                vectors = np.vstack([base, base])[:n]
            else:
                vectors = rng.randn(n, 4)
            emb = embeddings_from(vectors)
            lazy = facility_location_greedy(emb, set(emb.ids), k=k, lazy=True)
            naive = facility_location_greedy(emb, set(emb.ids), k=k, lazy=False)
            assert lazy == naive

    def test_ground_subset_restricts_objective(self):
        vectors = [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]]
        emb = embeddings_from(vectors)
        picked = facility_location_greedy(emb, {"000000", "000001"}, k=1)
        assert picked[0] in ("000000", "000001")


def rows_from_ifds(ifds):
    return [
        ScoredSample(id=f"{i:06d}", ppl_cond=2.0 * max(ifd, 1.0),
                     ppl_uncond=2.0 * max(ifd, 1.0) / ifd, ifd=ifd, n_tokens=3, scorer="t")
        for i, ifd in enumerate(ifds)
    ]


class TestTwoStagePipeline:
    def make_inputs(self, n, seed=0, dim=8):
        rng = np.random.RandomState(seed)
        samples = [sample(i, f"text {i}") for i in range(n)]
        dataset = Dataset(samples=samples)
        rows = rows_from_ifds(rng.uniform(0.0, 1.3, size=n).tolist())
        emb = embeddings_from(rng.rand(n, dim))
        return dataset, rows, emb

    def test_toy_pipeline_sizes_and_containment(self):
        dataset, rows, emb = self.make_inputs(20, seed=2)
        config = DiversityConfig(pre_ratio=0.5, final_ratio=0.2)
        result = diversify(dataset, rows, emb, config)
        assert result.pool_size == len(result.stage1_ids)
        assert result.k == 4
        assert len(result.selected_ids) == 4
        assert set(result.selected_ids) <= set(result.stage1_ids)

    def test_stage1_equals_select_top_ifd(self):
        dataset, rows, emb = self.make_inputs(30, seed=5)
        config = DiversityConfig(pre_ratio=0.4, final_ratio=0.1)
        result = diversify(dataset, rows, emb, config)
        direct = select_top_ifd(rows, SelectionConfig(ratio=0.4, ifd_cap=1.0))
        assert result.stage1_ids == direct.selected_ids

    def test_equal_ratios_forbidden(self):
        with pytest.raises(ConfigError):
            DiversityConfig(pre_ratio=0.2, final_ratio=0.2)

    def test_pool_smaller_than_k_is_config_error(self):
        dataset, rows, emb = self.make_inputs(20, seed=3)
        # every ifd >= 1 -> empty-ish pool
        rows = rows_from_ifds([1.1] * 19 + [0.5])
        with pytest.raises(ConfigError, match="stage-1 pool"):
            diversify(dataset, rows, emb, DiversityConfig(pre_ratio=0.5, final_ratio=0.25))

    def test_deterministic(self):
        dataset, rows, emb = self.make_inputs(40, seed=9)
        config = DiversityConfig(pre_ratio=0.5, final_ratio=0.1)
        a = diversify(dataset, rows, emb, config)
        b = diversify(dataset, rows, emb, config)
        assert a.selected_ids == b.selected_ids

    def test_metadata_records_policies(self):
        dataset, rows, emb = self.make_inputs(20, seed=4)
        result = diversify(dataset, rows, emb, DiversityConfig(pre_ratio=0.5, final_ratio=0.1))
        assert result.metadata["similarity"] == "cosine-clipped"
        assert result.metadata["ground_set"] == "stage-1 pool"
        assert result.metadata["tie_break"] == "original-order"
