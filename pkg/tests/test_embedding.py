"""Embedding layer tests.

The mock embedder's construction is re-derived here from its documented
recipe, with a local FNV implementation, so the package code and these
expectations can only agree if both follow the documented math.
"""

import hashlib
import re
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialmatch.embedding import (
    EmbeddingVector,
    MockEmbeddingProvider,
    RemoteEmbeddingProvider,
    VectorCache,
    cosine,
    embed,
    text_hash,
)
from trialmatch.errors import ContractViolationError, TransportError


def ref_fnv1a64(data: bytes) -> int:
    value = 0xCBF29CE484222325
    for byte in data:
        value ^= byte
        value = (value * 0x100000001B3) % (1 << 64)
    return value


def ref_mock_vector(text: str, dim: int = 256) -> np.ndarray:
    """Independent rebuild of the documented mock construction."""
    tokens = re.findall(r"[a-z0-9]+", text.lower()) or [""]
    acc = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        rng = np.random.default_rng(ref_fnv1a64(token.encode("utf-8")))
        raw = rng.standard_normal(dim)
        acc += raw / np.linalg.norm(raw)
    return (acc / np.linalg.norm(acc)).astype(np.float32)


SAMPLE_TEXTS = [
    "abc",
    "Lung cancer, metastatic. EGFR+.",
    "Cancer type allowed: breast cancer. Biomarkers required: HER2.",
    "a b c a b a",
    "   ",
    "1234 5678",
]


class CountingProvider:
    """Wraps a provider and counts embed_batch calls and texts."""

    def __init__(self, inner):
        self.inner = inner
        self.dimension = inner.dimension
        self.calls = 0
        self.texts_seen = []

    def embed_batch(self, texts):
        self.calls += 1
        self.texts_seen.extend(texts)
        return self.inner.embed_batch(texts)


@pytest.fixture
def provider():
    return MockEmbeddingProvider()


class TestMockConstruction:
    @pytest.mark.parametrize("text", SAMPLE_TEXTS)
    def test_matches_independent_rebuild(self, provider, text):
        got = embed([text], provider)[0]
        expected = ref_mock_vector(text)
        assert np.array_equal(got.values, expected)

    def test_abc_fingerprint(self, provider):
        # First four components, frozen from the reference construction.
        got = embed(["abc"], provider)[0].values[:4]
        expected = [0.019443452, -0.076833814, -0.012282113, -0.017935779]
        assert np.allclose(got, expected, atol=1e-7, rtol=0)

    def test_tokenless_text_uses_empty_token(self, provider):
        spaces = embed(["   "], provider)[0]
        punct = embed(["!!! ---"], provider)[0]
        assert np.array_equal(spaces.values, punct.values)
        assert spaces.source_hash != punct.source_hash

    def test_token_multiplicity_matters(self, provider):
        once, twice = embed(["lung", "lung lung cancer"], provider)
        other = embed(["lung cancer"], provider)[0]
        assert not np.array_equal(twice.values, other.values)
        assert not np.array_equal(once.values, other.values)

    def test_case_and_punctuation_fold_together(self, provider):
        a, b = embed(["Lung CANCER!", "lung, cancer"], provider)
        assert np.array_equal(a.values, b.values)


class TestEmbedContract:
    @pytest.mark.parametrize("text", SAMPLE_TEXTS)
    def test_unit_norm(self, provider, text):
        v = embed([text], provider)[0]
        assert abs(np.linalg.norm(v.values.astype(np.float64)) - 1) <= 1e-5

    def test_same_text_bitwise_identical(self, provider):
        a = embed(["stable text"], provider)[0]
        b = embed(["stable text"], provider)[0]
        assert np.array_equal(a.values, b.values)
        assert a == b

    def test_order_aligned_with_repeats(self, provider):
        counting = CountingProvider(provider)
        vecs = embed(["x y", "z", "x y"], counting)
        assert vecs[0] == vecs[2]
        assert vecs[0].source_hash == text_hash("x y")
        assert vecs[1].source_hash == text_hash("z")
        # duplicate text embedded once
        assert counting.texts_seen == ["x y", "z"]

    def test_values_stored_float32_and_frozen(self, provider):
        v = embed(["abc"], provider)[0]
        assert v.values.dtype == np.float32
        with pytest.raises(ValueError):
            v.values[0] = 0.0

    def test_empty_text_rejected(self, provider):
        with pytest.raises(ValueError):
            embed([""], provider)

    def test_non_string_rejected(self, provider):
        with pytest.raises(ValueError):
            embed(["ok", None], provider)

    def test_wrong_row_count_rejected(self, provider):
        class Short:
            dimension = 256

            def embed_batch(self, texts):
                return [np.ones(256)]

        with pytest.raises(ContractViolationError):
            embed(["a", "b"], Short())

    def test_wrong_dimension_rejected(self):
        class Skewed:
            dimension = 256

            def embed_batch(self, texts):
                return [np.ones(128) for _ in texts]

        with pytest.raises(ContractViolationError):
            embed(["a"], Skewed())

    def test_zero_vector_rejected(self):
        class Zero:
            dimension = 4

            def embed_batch(self, texts):
                return [np.zeros(4) for _ in texts]

        with pytest.raises(ContractViolationError):
            embed(["a"], Zero())

    def test_non_finite_vector_rejected(self):
        class Nan:
            dimension = 4

            def embed_batch(self, texts):
                return [np.array([1.0, np.nan, 0.0, 0.0]) for _ in texts]

        with pytest.raises(ContractViolationError):
            embed(["a"], Nan())

    def test_unnormalized_provider_output_gets_normalized(self):
        class Loud:
            dimension = 3

            def embed_batch(self, texts):
                return [np.array([3.0, 4.0, 0.0]) for _ in texts]

        v = embed(["a"], Loud())[0]
        assert np.allclose(v.values, [0.6, 0.8, 0.0], atol=1e-7)


def unit(values) -> EmbeddingVector:
    arr = np.asarray(values, dtype=np.float64)
    arr = arr / np.linalg.norm(arr)
    return EmbeddingVector(values=arr.astype(np.float32),
                           source_hash="00" * 32)


class TestCosine:
    def test_self_similarity_one(self, provider):
        v = embed(["self match"], provider)[0]
        assert abs(cosine(v, v) - 1.0) <= 1e-6

    def test_orthogonal_zero(self):
        e1 = unit([1, 0, 0, 0])
        e2 = unit([0, 1, 0, 0])
        assert abs(cosine(e1, e2)) <= 1e-6

    def test_opposite_minus_one(self):
        v = unit([0.3, -0.8, 0.5])
        w = unit([-0.3, 0.8, -0.5])
        assert abs(cosine(v, w) + 1.0) <= 1e-6

    def test_symmetry_and_float64_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = unit(rng.standard_normal(64))
            b = unit(rng.standard_normal(64))
            expected = float(np.dot(a.values.astype(np.float64),
                                    b.values.astype(np.float64)))
            assert cosine(a, b) == pytest.approx(expected, abs=1e-6)
            assert cosine(a, b) == cosine(b, a)
            assert abs(cosine(a, b)) <= 1 + 1e-6

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine(unit([1, 0]), unit([1, 0, 0]))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.text(alphabet="abcxyz 0189", min_size=1, max_size=20),
                    min_size=2, max_size=2))
    def test_mock_cosine_bounded(self, texts):
        prov = MockEmbeddingProvider()
        a, b = embed([t + "." for t in texts], prov)
        assert abs(cosine(a, b)) <= 1 + 1e-6


class TestVectorCache:
    def test_roundtrip_bit_identity(self, provider, tmp_path):
        path = tmp_path / "vectors.bin"
        cache = VectorCache(path, "mock-256", provider.dimension)
        first = embed(SAMPLE_TEXTS, provider, cache)

        reopened = VectorCache(path, "mock-256", provider.dimension)
        counting = CountingProvider(provider)
        second = embed(SAMPLE_TEXTS, counting, reopened)
        assert counting.calls == 0
        for a, b in zip(first, second):
            assert a == b

    def test_warm_cache_skips_provider(self, provider, tmp_path):
        cache = VectorCache(tmp_path / "v.bin", "mock-256", 256)
        counting = CountingProvider(provider)
        embed(["alpha", "beta"], counting, cache)
        embed(["alpha", "beta", "gamma"], counting, cache)
        assert counting.calls == 2
        assert counting.texts_seen == ["alpha", "beta", "gamma"]

    def test_file_layout(self, provider, tmp_path):
        path = tmp_path / "v.bin"
        cache = VectorCache(path, "mock-256", 256)
        vecs = embed(["one", "two"], provider, cache)

        blob = path.read_bytes()
        assert blob[:4] == b"TMVC"
        assert blob[4] == 1
        assert struct.unpack_from("<I", blob, 5)[0] == 256
        pid_len = struct.unpack_from("<H", blob, 9)[0]
        assert blob[11:11 + pid_len].decode() == "mock-256"
        body = blob[11 + pid_len:]
        record = 32 + 4 * 256
        assert len(body) == 2 * record
        stored_hashes = {body[i:i + 32].hex()
                         for i in range(0, len(body), record)}
        assert stored_hashes == {v.source_hash for v in vecs}
        first = body[:record]
        assert first[:32] == bytes.fromhex(
            hashlib.sha256(b"one").hexdigest())
        values = np.frombuffer(first, dtype="<f4", count=256, offset=32)
        assert np.array_equal(values, vecs[0].values)

    def test_provider_mismatch_rejected(self, provider, tmp_path):
        path = tmp_path / "v.bin"
        VectorCache(path, "mock-256", 256)
        with pytest.raises(ContractViolationError):
            VectorCache(path, "other-model", 256)
        with pytest.raises(ContractViolationError):
            VectorCache(path, "mock-256", 128)

    def test_corrupt_header_rejected(self, tmp_path):
        path = tmp_path / "v.bin"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ContractViolationError):
            VectorCache(path, "mock-256", 256)

    def test_put_ignores_duplicates(self, tmp_path):
        cache = VectorCache(tmp_path / "v.bin", "p", 4)
        row = np.array([1, 0, 0, 0], dtype=np.float32)
        cache.put("aa" * 32, row)
        cache.put("aa" * 32, row)
        assert len(cache) == 1


class FakeResponse:
    def __init__(self, payload, status_code=200):
        self._payload = payload
        self.status_code = status_code

    def raise_for_status(self):
        if self.status_code >= 400:
            raise httpx_status_error(self.status_code)

    def json(self):
        return self._payload


def httpx_status_error(code):
    import httpx

    return httpx.HTTPStatusError(f"{code}", request=None, response=None)


class TestRemoteProvider:
    def test_pins_dimension_from_first_response(self, monkeypatch):
        def fake_post(url, json=None, timeout=None):
            rows = [[1.0, 0.0], [0.0, 2.0]][:len(json["texts"])]
            return FakeResponse({"vectors": rows, "dimension": 2})

        monkeypatch.setattr("trialmatch.embedding.httpx.post", fake_post)
        remote = RemoteEmbeddingProvider("http://svc")
        vecs = embed(["a", "b"], remote)
        assert remote.dimension == 2
        assert np.allclose(vecs[0].values, [1.0, 0.0])

    def test_dimension_drift_rejected(self, monkeypatch):
        responses = iter([
            FakeResponse({"vectors": [[1.0, 0.0]], "dimension": 2}),
            FakeResponse({"vectors": [[1.0]], "dimension": 1}),
        ])
        monkeypatch.setattr("trialmatch.embedding.httpx.post",
                            lambda *a, **k: next(responses))
        remote = RemoteEmbeddingProvider("http://svc")
        embed(["a"], remote)
        with pytest.raises(ContractViolationError):
            embed(["b"], remote)

    def test_transport_failure_propagates(self, monkeypatch):
        import httpx

        def fake_post(url, json=None, timeout=None):
            raise httpx.ConnectError("refused")

        monkeypatch.setattr("trialmatch.embedding.httpx.post", fake_post)
        with pytest.raises(TransportError):
            embed(["a"], RemoteEmbeddingProvider("http://svc"))

    def test_malformed_payload_is_transport_error(self, monkeypatch):
        monkeypatch.setattr("trialmatch.embedding.httpx.post",
                            lambda *a, **k: FakeResponse({"oops": []}))
        with pytest.raises(TransportError):
            embed(["a"], RemoteEmbeddingProvider("http://svc"))
