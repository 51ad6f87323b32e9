"""Provider clients: mock backends, batching, retries, and the on-disk cache."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from taxonomine.errors import ConfigurationError, ProviderError
from taxonomine.providers import (
    EmbeddingCache,
    EmbeddingClient,
    EmbeddingVector,
    ChatClient,
    ProviderConfig,
    build_clients,
    cosine_similarity,
    load_roster,
    mock_chat_config,
    mock_embed_text,
    mock_embedding_config,
    mock_roster,
    normalize,
)


class TestMockEmbedding:
    def test_unit_norm_and_determinism(self):
        a = mock_embed_text("build neural models", "m1")
        b = mock_embed_text("build neural models", "m1")
        assert a.shape == (64,)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)
        assert np.array_equal(a, b)

    def test_word_order_invariance(self):
        a = mock_embed_text("alpha beta gamma", "m1")
        b = mock_embed_text("gamma ALPHA beta", "m1")
        assert np.array_equal(a, b)

    def test_token_counts_matter(self):
        a = mock_embed_text("torch analysis", "m1")
        b = mock_embed_text("torch torch analysis", "m1")
        assert not np.array_equal(a, b)

    def test_models_disagree(self):
        a = mock_embed_text("torch analysis", "m1")
        b = mock_embed_text("torch analysis", "m2")
        assert not np.array_equal(a, b)

    def test_tokenless_text_still_embeds(self):
        vec = mock_embed_text("!!! ???", "m1")
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


class TestVectors:
    def test_cosine_of_identical_unit_vectors(self):
        v = EmbeddingVector(values=normalize(np.ones(4)), model_id="m")
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_cosine_length_mismatch(self):
        a = EmbeddingVector(values=normalize(np.ones(4)), model_id="m")
        b = EmbeddingVector(values=normalize(np.ones(5)), model_id="m")
        with pytest.raises(ProviderError):
            cosine_similarity(a, b)

    def test_embedding_vector_rejects_non_unit(self):
        with pytest.raises(ProviderError):
            EmbeddingVector(values=np.ones(4), model_id="m")

    def test_normalize_zero_vector(self):
        with pytest.raises(ProviderError):
            normalize(np.zeros(3))


class TestProviderConfig:
    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            ProviderConfig(kind="image", endpoint="mock://x", model_id="m")

    def test_mock_detection(self):
        assert mock_embedding_config().is_mock
        http = ProviderConfig(
            kind="embedding", endpoint="https://api.example/v1/embeddings", model_id="m"
        )
        assert not http.is_mock

    def test_missing_api_key_env(self, monkeypatch):
        monkeypatch.delenv("EXAMPLE_KEY", raising=False)
        config = ProviderConfig(
            kind="embedding",
            endpoint="https://api.example/v1/embeddings",
            model_id="m",
            api_key_env="EXAMPLE_KEY",
        )
        with pytest.raises(ConfigurationError, match="EXAMPLE_KEY"):
            EmbeddingClient(config)


class TestEmbeddingClient:
    def test_matches_mock_backend_and_preserves_order(self):
        client = EmbeddingClient(mock_embedding_config())
        texts = ["first sentence", "second sentence", "third sentence"]
        out = client.embed(texts)
        for text, vector in zip(texts, out):
            assert np.allclose(
                vector.values, mock_embed_text(text, "mock-embed-a"), atol=1e-12
            )

    def test_batching_respects_max_batch(self):
        batches: list[list[str]] = []

        def transport(batch):
            batches.append(list(batch))
            return [[1.0, float(len(batch))] for _ in batch]

        config = replace(mock_embedding_config(), max_batch=2)
        client = EmbeddingClient(config, transport=transport)
        client.embed([f"text {i}" for i in range(5)])
        assert [len(b) for b in batches] == [2, 2, 1]
        assert client.request_count == 3

    def test_duplicates_embedded_once(self):
        client = EmbeddingClient(mock_embedding_config())
        out = client.embed(["same text", "same text", "other text"])
        assert client.embedded_text_count == 2
        assert np.array_equal(out[0].values, out[1].values)

    def test_memory_cache_skips_backend(self):
        client = EmbeddingClient(mock_embedding_config())
        client.embed(["alpha", "beta"])
        first = client.request_count
        client.embed(["alpha", "beta"])
        assert client.request_count == first

    def test_persistent_cache_shared_between_clients(self, tmp_path):
        config = mock_embedding_config()
        first = EmbeddingClient(config, cache_dir=tmp_path)
        vectors = first.embed(["alpha", "beta"])
        second = EmbeddingClient(config, cache_dir=tmp_path)
        out = second.embed(["alpha", "beta"])
        assert second.request_count == 0
        for a, b in zip(vectors, out):
            assert np.allclose(a.values, b.values, atol=1e-6)

    def test_retries_then_succeeds(self):
        calls = {"n": 0}
        delays: list[float] = []

        def transport(batch):
            calls["n"] += 1
            if calls["n"] < 3:
                raise RuntimeError("transient network failure")
            return [[1.0, 0.0] for _ in batch]

        config = replace(mock_embedding_config(), max_retries=3, backoff=0.5)
        client = EmbeddingClient(config, transport=transport, sleep=delays.append)
        client.embed(["a"])
        assert calls["n"] == 3
        assert client.retries_logged == 2
        assert delays == [0.5, 1.0]

    def test_exhausted_retries_raise(self):
        def transport(batch):
            raise RuntimeError("permanent failure")

        config = replace(mock_embedding_config(), max_retries=1, backoff=0.0)
        client = EmbeddingClient(config, transport=transport, sleep=lambda _: None)
        with pytest.raises(ProviderError, match="after retries"):
            client.embed(["a", "b"])

    def test_wrong_result_count_rejected(self):
        config = replace(mock_embedding_config(), max_retries=0)
        client = EmbeddingClient(config, transport=lambda batch: [[1.0, 0.0]])
        with pytest.raises(ProviderError):
            client.embed(["a", "b"])

    def test_dimension_conflict_rejected(self):
        responses = [[[1.0, 0.0]], [[1.0, 0.0, 0.0]]]
        config = replace(mock_embedding_config(), max_retries=0)
        client = EmbeddingClient(config, transport=lambda batch: responses.pop(0))
        client.embed(["a"])
        with pytest.raises(ProviderError, match="dimension"):
            client.embed(["b"])

    def test_rejects_empty_strings(self):
        client = EmbeddingClient(mock_embedding_config())
        with pytest.raises(ProviderError):
            client.embed(["ok", ""])

    def test_embed_matrix_shape(self):
        client = EmbeddingClient(mock_embedding_config())
        matrix = client.embed_matrix(["a b c", "d e f"])
        assert matrix.shape == (2, 64)
        assert np.allclose(np.linalg.norm(matrix, axis=1), 1.0)


class TestEmbeddingCacheFile:
    def test_round_trip_and_append(self, tmp_path):
        path = tmp_path / "m.embcache"
        cache = EmbeddingCache(path)
        cache.put("alpha", np.array([1.0, 2.0, 3.0]))
        cache.put("beta", np.array([4.0, 5.0, 6.0]))
        reopened = EmbeddingCache(path)
        assert len(reopened) == 2
        assert np.allclose(reopened.get("alpha"), [1.0, 2.0, 3.0], atol=1e-6)
        assert reopened.get("missing") is None

    def test_duplicate_put_appends_once(self, tmp_path):
        path = tmp_path / "m.embcache"
        cache = EmbeddingCache(path)
        cache.put("alpha", np.array([1.0, 2.0]))
        size = path.stat().st_size
        cache.put("alpha", np.array([1.0, 2.0]))
        assert path.stat().st_size == size

    def test_dimension_mismatch_rejected(self, tmp_path):
        cache = EmbeddingCache(tmp_path / "m.embcache")
        cache.put("alpha", np.array([1.0, 2.0]))
        with pytest.raises(ProviderError, match="dimension"):
            cache.put("beta", np.array([1.0, 2.0, 3.0]))

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "m.embcache"
        cache = EmbeddingCache(path)
        cache.put("alpha", np.array([1.0, 2.0]))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(ProviderError, match="truncated"):
            EmbeddingCache(path)


class TestMockChat:
    def test_summarize_top_tokens(self):
        client = ChatClient(mock_chat_config("summarize"))
        prompt = (
            "Here are the statements:\n"
            "alpha alpha alpha beta beta gamma delta epsilon zeta\n"
            "Output:::"
        )
        reply = client.complete(prompt)
        assert "Description:" in reply
        body = reply.split("Description:", 1)[1].strip().rstrip(".")
        assert body.split() == ["alpha", "beta", "delta", "epsilon", "gamma"]

    def test_judge_returns_integer_scores(self):
        import json

        client = ChatClient(mock_chat_config("judge"))
        payload = json.loads(client.complete("judge this taxonomy"))
        assert set(payload) == {
            "Clarity",
            "Hierarchical Coherence",
            "Orthogonality",
            "Completeness",
        }
        for criteria in payload.values():
            for value in criteria.values():
                assert isinstance(value, int)
                assert 1 <= value <= 5

    def test_judge_depends_on_prompt(self):
        client = ChatClient(mock_chat_config("judge"))
        assert client.complete("taxonomy A") != client.complete("taxonomy B")

    def test_label_a_superset_of_label_b(self):
        prompt = (
            "Here are the texts:\n"
            '{"1": "Deploy machine learning models.", '
            '"2": "Maintain python automation scripts.", '
            '"3": "Order catering for the office."}\n'
            "Output:::"
        )
        lenient = ChatClient(mock_chat_config("label-a")).complete(prompt)
        strict = ChatClient(mock_chat_config("label-b")).complete(prompt)
        assert "[1, 2]" in lenient
        assert "[1]" in strict

    def test_unknown_role_rejected(self):
        client = ChatClient(mock_chat_config("mystery"))
        with pytest.raises(ConfigurationError):
            client.complete("hello")

    def test_scripted_transport_and_retry(self):
        replies = [RuntimeError("boom"), "fine"]

        def transport(prompt):
            item = replies.pop(0)
            if isinstance(item, Exception):
                raise item
            return item

        config = replace(mock_chat_config("summarize"), max_retries=2, backoff=0.0)
        client = ChatClient(config, transport=transport, sleep=lambda _: None)
        assert client.complete("x") == "fine"
        assert client.retries_logged == 1

    def test_empty_completion_rejected(self):
        config = replace(mock_chat_config("summarize"), max_retries=0)
        client = ChatClient(config, transport=lambda prompt: "   ")
        with pytest.raises(ProviderError, match="empty"):
            client.complete("x")


class TestRoster:
    def test_mock_roster_shape(self):
        roster = mock_roster(n_embedding=2)
        assert [c.model_id for c in roster.embedding] == [
            "mock-embed-a",
            "mock-embed-b",
        ]
        assert roster.primary_embedding.model_id == "mock-embed-a"
        assert roster.judge.endpoint.endswith("judge")

    def test_empty_roster_json_is_fully_mock(self, tmp_path):
        path = tmp_path / "roster.json"
        path.write_text("{}", encoding="utf-8")
        roster = load_roster(path)
        assert all(c.is_mock for c in roster.embedding)
        assert roster.label.is_mock and roster.judge.is_mock

    def test_roster_json_overrides(self, tmp_path):
        path = tmp_path / "roster.json"
        path.write_text(
            """
            {
              "embedding": [
                {"endpoint": "https://api.example/v1/embeddings",
                 "model_id": "text-embed-1", "max_batch": 16}
              ]
            }
            """,
            encoding="utf-8",
        )
        roster = load_roster(path)
        assert roster.embedding[0].model_id == "text-embed-1"
        assert roster.embedding[0].max_batch == 16
        assert not roster.embedding[0].is_mock
        assert roster.judge.is_mock

    def test_build_clients(self, tmp_path):
        clients = build_clients(mock_roster(n_embedding=2), cache_dir=tmp_path)
        assert clients.model_ids == (
            "mock-embed-a",
            "mock-embed-b",
            "mock-chat-summarize",
            "mock-chat-judge",
            "mock-chat-label-a",
            "mock-chat-label-b",
        )
        assert clients.primary_embedding is clients.embedding[0]
        out = clients.primary_embedding.embed(["hello world"])
        assert len(out) == 1
        assert (tmp_path / "mock-embed-a.embcache").exists()
