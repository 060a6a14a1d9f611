"""Embedding providers and vector math.

Two providers sit behind one contract: a deterministic offline mock (bag of
hashed token directions, L2-normalized) and a remote HTTP provider speaking
the common embeddings wire shape ``{model, input: [...]}`` ->
``{data: [{embedding: [...]}]}``.

Vectors are stored at float32; similarity math accumulates at float64.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from .corpus import tokenize


class TransportError(RuntimeError):
    """Transient transport failure talking to a remote endpoint; retryable."""


class DimensionMismatchError(RuntimeError):
    """Remote endpoint returned vectors of the wrong dimension; not retryable."""


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    provider: str  # "remote_http" | "deterministic_mock"
    model_name: str
    dim: int
    endpoint: str | None = None
    api_key_env: str | None = None

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.provider == "remote_http" and not self.endpoint:
            raise ValueError("remote_http provider requires an endpoint")
        if self.provider not in ("remote_http", "deterministic_mock"):
            raise ValueError(f"unknown provider {self.provider!r}")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1], accumulated at float64."""
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    if a64.shape != b64.shape:
        raise ValueError(f"dimension mismatch: {a64.shape} vs {b64.shape}")
    na = float(np.linalg.norm(a64))
    nb = float(np.linalg.norm(b64))
    if na == 0.0 or nb == 0.0:
        raise ValueError("undefined similarity: zero vector")
    return float(np.dot(a64, b64) / (na * nb))


def _token_axis(token: str, dim: int) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dim


class MockEmbedder:
    """Deterministic embedder: L2-normalized bag of hashed token directions.

    Each lowercased token contributes one unit basis vector whose axis is a
    stable hash of the token, so texts sharing vocabulary score high cosine
    similarity and vocabulary-disjoint texts score (up to hash collisions)
    exactly zero. Pure function of (text, dim).
    """

    def __init__(self, dim: int):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("texts must be non-empty")
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in tokenize(text):
                out[row, _token_axis(token.lower(), self.dim)] += 1.0
            norm = np.linalg.norm(out[row])
            if norm > 0.0:
                out[row] /= norm
        return out.astype(np.float32)


class RemoteEmbedder:
    """HTTP embeddings client; bounds in-flight requests with a semaphore."""

    def __init__(
        self,
        cfg: EmbeddingProviderConfig,
        max_in_flight: int = 4,
        max_retries: int = 2,
        retry_backoff: float = 0.5,
        timeout: float = 60.0,
    ):
        if cfg.provider != "remote_http":
            raise ValueError("RemoteEmbedder requires a remote_http config")
        self.cfg = cfg
        self.dim = cfg.dim
        self.max_retries = max_retries
        self.retry_backoff = retry_backoff
        self.timeout = timeout
        self._slots = threading.Semaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key_env:
            key = os.environ.get(self.cfg.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("texts must be non-empty")
        body = {"model": self.cfg.model_name, "input": list(texts)}
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt and self.retry_backoff:
                time.sleep(self.retry_backoff * attempt)
            try:
                with self._slots:
                    resp = requests.post(
                        self.cfg.endpoint,
                        json=body,
                        headers=self._headers(),
                        timeout=self.timeout,
                    )
                if resp.status_code >= 500:
                    last_exc = TransportError(f"server error {resp.status_code}")
                    continue
                resp.raise_for_status()
                payload = resp.json()
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = TransportError(str(exc))
                continue
            rows = [item["embedding"] for item in payload["data"]]
            for vec in rows:
                if len(vec) != self.dim:
                    raise DimensionMismatchError(
                        f"endpoint returned dim {len(vec)}, config says {self.dim}"
                    )
            matrix = np.asarray(rows, dtype=np.float32)
            if not np.all(np.isfinite(matrix)):
                raise ValueError("endpoint returned non-finite embedding values")
            return matrix
        raise TransportError(f"embedding request failed after retries: {last_exc}")


def make_embedder(cfg: EmbeddingProviderConfig, **remote_kwargs):
    if cfg.provider == "deterministic_mock":
        return MockEmbedder(cfg.dim)
    return RemoteEmbedder(cfg, **remote_kwargs)


def embed_batch(texts: list[str], cfg: EmbeddingProviderConfig) -> np.ndarray:
    return make_embedder(cfg).embed_batch(texts)


def save_vectors(base_path: str | Path, matrix: np.ndarray, ids: list[str]) -> None:
    """Persist a vector matrix as little-endian float32 rows plus a manifest.

    Writes ``<base>.bin`` and ``<base>.manifest.json`` with
    ``{dim, count, chunk_ids}``.
    """
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    mat = np.ascontiguousarray(np.asarray(matrix, dtype="<f4"))
    if mat.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if mat.shape[0] != len(ids):
        raise ValueError("one id per row required")
    base.with_suffix(".bin").write_bytes(mat.tobytes(order="C"))
    manifest = {"dim": int(mat.shape[1]), "count": int(mat.shape[0]), "chunk_ids": list(ids)}
    base.with_suffix(".manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, ensure_ascii=False), encoding="utf-8"
    )


def load_vectors(base_path: str | Path) -> tuple[np.ndarray, list[str]]:
    base = Path(base_path)
    manifest = json.loads(base.with_suffix(".manifest.json").read_text(encoding="utf-8"))
    raw = base.with_suffix(".bin").read_bytes()
    mat = np.frombuffer(raw, dtype="<f4").reshape(manifest["count"], manifest["dim"])
    return mat.astype(np.float32), list(manifest["chunk_ids"])
