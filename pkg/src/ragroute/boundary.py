"""Knowledge-boundary profiles: cluster an agent's chunk embeddings and
export per-cluster centroids for routing.

Clustering is complete-linkage agglomerative on distance 1 - cosine, run
until ``max(1, floor(sqrt(m)))`` clusters remain. Centroids are plain
arithmetic means of member embeddings (not re-normalized: cosine scoring is
scale-invariant, so normalization cannot change routing order). Only
centroids ever leave the agent; raw chunk text stays local.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import load_vectors, save_vectors


@dataclass(frozen=True)
class Cluster:
    cluster_id: int
    member_chunk_ids: tuple[str, ...]
    centroid: np.ndarray


@dataclass(frozen=True)
class AgentProfile:
    agent_id: str
    num_chunks: int
    num_clusters: int
    clusters: tuple[Cluster, ...]


@dataclass(frozen=True)
class CentroidEntry:
    """One exported centroid tagged with its owning agent."""

    agent_id: str
    cluster_id: int
    centroid: np.ndarray


def cluster_count(m: int) -> int:
    """Cluster budget for an agent holding m chunks: max(1, floor(sqrt(m)))."""
    if m <= 0:
        raise ValueError("m must be >= 1")
    return max(1, math.isqrt(m))


def _pairwise_cosine_distance(matrix: np.ndarray) -> np.ndarray:
    mat = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    if not np.all(norms > 0.0):
        raise ValueError("undefined similarity: zero vector")
    unit = mat / norms[:, None]
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    return 1.0 - sims


def cluster_indices(embeddings: np.ndarray, n: int) -> list[list[int]]:
    """Complete-linkage agglomerative clustering down to n clusters.

    Returns the partition as sorted member-index lists, ordered by smallest
    member. At each step the pair of clusters with the smallest
    complete-linkage distance (max pairwise member distance) merges; ties
    break on the smallest (min member, min member) pair, so the result is
    deterministic. Linkage distances are maintained by max-updates, which is
    exact for complete linkage.
    """
    m = len(embeddings)
    if not (1 <= n <= m):
        raise ValueError(f"need 1 <= n <= {m}, got n={n}")
    members: dict[int, list[int]] = {i: [i] for i in range(m)}
    link = _pairwise_cosine_distance(embeddings)
    np.fill_diagonal(link, np.inf)
    while len(members) > n:
        dmin = link.min()
        best_pair: tuple[int, int] | None = None
        best_key: tuple[int, int] | None = None
        for r, c in np.argwhere(link == dmin):
            if r >= c:
                continue
            key = (min(members[r][0], members[c][0]), max(members[r][0], members[c][0]))
            if best_key is None or key < best_key:
                best_key = key
                best_pair = (int(r), int(c))
        i, j = best_pair
        keep, drop = (i, j) if members[i][0] < members[j][0] else (j, i)
        members[keep] = sorted(members[keep] + members.pop(drop))
        merged = np.maximum(link[keep], link[drop])
        link[keep, :] = merged
        link[:, keep] = merged
        link[keep, keep] = np.inf
        link[drop, :] = np.inf
        link[:, drop] = np.inf
    return sorted(members.values(), key=lambda ms: ms[0])


def cluster_chunks(chunk_ids: list[str], embeddings: np.ndarray, n: int) -> list[Cluster]:
    """Cluster chunk embeddings and build Cluster records with mean centroids."""
    if len(chunk_ids) != len(embeddings):
        raise ValueError("one chunk_id per embedding required")
    mat = np.asarray(embeddings, dtype=np.float64)
    out: list[Cluster] = []
    for cid, members in enumerate(cluster_indices(mat, n)):
        centroid = mat[members].mean(axis=0).astype(np.float32)
        out.append(
            Cluster(
                cluster_id=cid,
                member_chunk_ids=tuple(chunk_ids[i] for i in members),
                centroid=centroid,
            )
        )
    return out


def build_profile(agent_id: str, chunk_ids: list[str], embeddings: np.ndarray) -> AgentProfile:
    """Cluster an agent's chunks into max(1, floor(sqrt(m))) clusters."""
    m = len(chunk_ids)
    if m == 0:
        raise ValueError("agent has no chunks")
    n = cluster_count(m)
    clusters = cluster_chunks(chunk_ids, embeddings, n)
    return AgentProfile(agent_id=agent_id, num_chunks=m, num_clusters=n, clusters=tuple(clusters))


def export_centroids(profile: AgentProfile) -> list[CentroidEntry]:
    """Centroids tagged with the owning agent; never includes chunk text."""
    return [
        CentroidEntry(agent_id=profile.agent_id, cluster_id=c.cluster_id, centroid=c.centroid)
        for c in profile.clusters
    ]


def save_profile(profile: AgentProfile, json_path: str | Path, vectors_base: str | Path) -> None:
    """Persist the profile manifest plus its centroid vector file."""
    matrix = np.stack([c.centroid for c in profile.clusters])
    ids = [str(c.cluster_id) for c in profile.clusters]
    save_vectors(vectors_base, matrix, ids)
    manifest = {
        "agent_id": profile.agent_id,
        "m": profile.num_chunks,
        "n": profile.num_clusters,
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "member_chunk_ids": list(c.member_chunk_ids),
                "centroid_ref": str(c.cluster_id),
            }
            for c in profile.clusters
        ],
    }
    Path(json_path).write_text(
        json.dumps(manifest, sort_keys=True, ensure_ascii=False), encoding="utf-8"
    )


def load_profile(json_path: str | Path, vectors_base: str | Path) -> AgentProfile:
    manifest = json.loads(Path(json_path).read_text(encoding="utf-8"))
    matrix, ids = load_vectors(vectors_base)
    by_ref = {ref: matrix[i] for i, ref in enumerate(ids)}
    clusters = tuple(
        Cluster(
            cluster_id=int(rec["cluster_id"]),
            member_chunk_ids=tuple(rec["member_chunk_ids"]),
            centroid=by_ref[rec["centroid_ref"]],
        )
        for rec in manifest["clusters"]
    )
    return AgentProfile(
        agent_id=manifest["agent_id"],
        num_chunks=int(manifest["m"]),
        num_clusters=int(manifest["n"]),
        clusters=clusters,
    )
