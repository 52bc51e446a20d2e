"""Text/observation embedding and monotone trajectory segmentation.

Small trainable encoders stand in for the pretrained dual encoder: prior
descriptions and observations map into one unit-norm embedding space, cosine
similarity scores every (skill, step) pair, and dynamic programming places the
monotone skill boundaries that maximize the summed per-skill similarity.
"""

from __future__ import annotations

import zlib

import numpy as np

from . import autodiff as ad
from .types import (ArgumentError, CognitivePrior, InfeasibleSegmentationError, Observation,
                    RunConfig, Trajectory)


def _tokenize(text: str) -> list[str]:
    return text.lower().split()


def _token_bucket(token: str, buckets: int) -> int:
    # stable across processes (unlike built-in hash)
    return zlib.crc32(token.encode("utf-8")) % buckets


class TextEncoder:
    """Hashing bag-of-tokens embedding with a small feed-forward head."""

    def __init__(self, cfg: RunConfig, rng: np.random.Generator, prefix: str = "text_enc"):
        d = cfg.embedding_dim
        self.buckets = cfg.hash_buckets
        self.output_dim = d
        self.prefix = prefix
        self.params = {
            f"{prefix}.table": ad.parameter((cfg.hash_buckets, d), rng=rng),
            f"{prefix}.w1": ad.parameter((d, cfg.encoder_hidden), rng=rng),
            f"{prefix}.b1": ad.parameter((cfg.encoder_hidden,), rng=rng, scale=0.1),
            f"{prefix}.w2": ad.parameter((cfg.encoder_hidden, d), rng=rng),
            f"{prefix}.b2": ad.parameter((d,), rng=rng, scale=0.1),
        }

    def embed(self, text: str) -> ad.Tensor:
        """Unit-norm embedding of one text."""
        if not text:
            raise ArgumentError("cannot embed empty text")
        p = self.params
        rows = np.zeros(self.buckets, dtype=np.float64)
        for tok in _tokenize(text):
            rows[_token_bucket(tok, self.buckets)] += 1.0
        rows /= max(len(_tokenize(text)), 1)
        pooled = ad.matmul(ad.Tensor(rows), p[f"{self.prefix}.table"])
        h = ad.tanh(ad.matmul(pooled, p[f"{self.prefix}.w1"]) + p[f"{self.prefix}.b1"])
        out = ad.matmul(h, p[f"{self.prefix}.w2"]) + p[f"{self.prefix}.b2"] + pooled
        return ad.l2_normalize(out, axis=-1)

    def embed_many(self, texts: list[str]) -> ad.Tensor:
        return ad.stack([self.embed(t) for t in texts], axis=0)


class ObsEncoder:
    """Two-layer feed-forward map from raw observation features to unit vectors."""

    def __init__(self, obs_dim: int, cfg: RunConfig, rng: np.random.Generator,
                 prefix: str = "obs_enc"):
        self.obs_dim = obs_dim
        self.output_dim = cfg.embedding_dim
        self.prefix = prefix
        self.params = {
            f"{prefix}.w1": ad.parameter((obs_dim, cfg.encoder_hidden), rng=rng),
            f"{prefix}.b1": ad.zeros_param(cfg.encoder_hidden),
            f"{prefix}.w2": ad.parameter((cfg.encoder_hidden, cfg.embedding_dim), rng=rng),
            f"{prefix}.b2": ad.zeros_param(cfg.embedding_dim),
        }

    def embed(self, obs: Observation) -> ad.Tensor:
        return self.embed_batch(np.asarray(obs, dtype=np.float64)[None, :])[0]

    def embed_batch(self, obs: np.ndarray) -> ad.Tensor:
        """(N, obs_dim) -> (N, output_dim), each row unit norm."""
        if obs.ndim != 2 or obs.shape[1] != self.obs_dim:
            raise ArgumentError(f"expected (N, {self.obs_dim}) observations, got {obs.shape}")
        p = self.params
        h = ad.tanh(ad.matmul(ad.Tensor(obs), p[f"{self.prefix}.w1"]) + p[f"{self.prefix}.b1"])
        out = ad.matmul(h, p[f"{self.prefix}.w2"]) + p[f"{self.prefix}.b2"]
        return ad.l2_normalize(out, axis=-1)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ArgumentError("cosine similarity is undefined for zero vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def build_similarity_matrix(text_enc: TextEncoder, obs_enc: ObsEncoder,
                            prior: CognitivePrior, trajectory: Trajectory) -> np.ndarray:
    """K x T cosine similarities; row k scores prior description k against each step."""
    with ad.no_grad():
        texts = text_enc.embed_many(list(prior.descriptions)).data  # (K, d)
        obs = obs_enc.embed_batch(trajectory.observations).data  # (T, d)
    return np.clip(texts @ obs.T, -1.0, 1.0)


def segment_trajectory(sim: np.ndarray) -> tuple[int, ...]:
    """Monotone boundaries maximizing sum_k sim[k][b_k], ties toward earliest steps.

    Returns 1-based end boundaries b_1 < ... < b_K with b_K = T. Computed with a
    suffix DP plus greedy front-to-back reconstruction, which yields the
    lexicographically smallest maximizer.
    """
    sim = np.asarray(sim, dtype=np.float64)
    K, T = sim.shape
    if T < K:
        raise InfeasibleSegmentationError(
            f"cannot place {K} strictly increasing boundaries in {T} steps")
    # suffix[k][t]: best score of skills k..K-1 with b_{k+1..} placed after t, given
    # boundary k sits at 0-based step t; boundary K-1 is pinned to T-1.
    suffix = np.full((K, T), -np.inf)
    suffix[K - 1, T - 1] = sim[K - 1, T - 1]
    for k in range(K - 2, -1, -1):
        # rightmost feasible position for boundary k leaves room for those after it
        hi = T - (K - k)
        # best_after[t] = max over t' > t of suffix[k+1][t']
        right_cummax = np.maximum.accumulate(suffix[k + 1][::-1])[::-1]
        best_after = np.full(T, -np.inf)
        best_after[:-1] = right_cummax[1:]
        suffix[k, k:hi + 1] = sim[k, k:hi + 1] + best_after[k:hi + 1]
    # greedy earliest-argmax reconstruction
    boundaries = []
    prev = -1
    for k in range(K):
        hi = T - (K - k)
        lo = prev + 1
        seg = suffix[k, lo:hi + 1]
        t = lo + int(np.argmax(seg))  # argmax takes the first maximum: earliest tie-break
        boundaries.append(t)
        prev = t
    return tuple(b + 1 for b in boundaries)


def segment_brute_force(sim: np.ndarray) -> tuple[int, ...]:
    """Exhaustive maximizer over all monotone boundary placements (oracle)."""
    from itertools import combinations

    sim = np.asarray(sim, dtype=np.float64)
    K, T = sim.shape
    if T < K:
        raise InfeasibleSegmentationError("T < K")
    best, best_score = None, -np.inf
    for mids in combinations(range(T - 1), K - 1):
        cand = mids + (T - 1,)
        score = float(sum(sim[k, t] for k, t in enumerate(cand)))
        if score > best_score:
            best, best_score = cand, score
    return tuple(b + 1 for b in best)


def compute_durations(boundaries, T: int) -> tuple[int, ...]:
    """H(t) = b_t - b_{t-1} with b_0 = 0; requires a valid boundary list ending at T."""
    bs = tuple(int(b) for b in boundaries)
    if not bs or bs[-1] != T or any(b2 <= b1 for b1, b2 in zip(bs, bs[1:])) or bs[0] < 1:
        raise ArgumentError(f"invalid boundary list {bs} for T={T}")
    prev = 0
    out = []
    for b in bs:
        out.append(b - prev)
        prev = b
    return tuple(out)


def dump_similarity_matrix(path, sim: np.ndarray) -> None:
    """Debug dump of a similarity matrix as structured text (flag-gated by callers)."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(sim):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
