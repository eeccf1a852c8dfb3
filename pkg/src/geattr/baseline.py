"""Alignment-free attribution baselines.

``KmerIndex`` stands in for a nucleotide search database: a query's score
against a training sequence is the number of k-mers they share (counted with
multiplicity), and a pseudo E-value ``D / (1 + score)`` keeps the "lower is
better" orientation of real search hits. The hit ranking procedure around it
(sort by E-value, keep the first hit per lab, rank labs by first occurrence,
softmax over reversed ranks) is the benchmark procedure itself.
"""

from __future__ import annotations

import json
import math
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from .data import PredictionMatrix, SequenceRecord

DEFAULT_K = 8
DEFAULT_EVALUE_THRESHOLD = 10.0

_BASE_CODE = np.full(256, 4, dtype=np.uint8)
for _i, _b in enumerate(b"ACGT"):
    _BASE_CODE[_b] = _i
    _BASE_CODE[ord(chr(_b).lower())] = _i


def kmer_codes(dna: str, k: int, canonical: bool = False) -> np.ndarray:
    """Integer code of every k-mer window that contains no N (base-4, A=0 .. T=3)."""
    bases = _BASE_CODE[np.frombuffer(dna.encode("ascii"), dtype=np.uint8)]
    if len(bases) < k:
        return np.empty(0, dtype=np.int64)
    windows = sliding_window_view(bases, k)
    ok = ~(windows == 4).any(axis=1)
    windows = windows[ok].astype(np.int64)
    weights = 4 ** np.arange(k - 1, -1, -1, dtype=np.int64)
    codes = windows @ weights
    if canonical:
        # reverse complement: complement each base and reverse positional weights
        rc = (3 - windows) @ weights[::-1]
        codes = np.minimum(codes, rc)
    return codes


def kmer_counts(dna: str, k: int, canonical: bool = False) -> tuple[np.ndarray, np.ndarray]:
    codes, counts = np.unique(kmer_codes(dna, k, canonical), return_counts=True)
    return codes, counts.astype(np.int64)


def encode_kmer(kmer: str) -> int:
    code = 0
    for ch in kmer.upper():
        code = code * 4 + "ACGT".index(ch)
    return code


def decode_kmer(code: int, k: int) -> str:
    out = []
    for _ in range(k):
        code, b = divmod(code, 4)
        out.append("ACGT"[b])
    return "".join(reversed(out))


@dataclass(frozen=True, eq=False)
class KmerIndex:
    """CSR-style postings: k-mer code -> (training ordinal, count)."""

    k: int
    canonical: bool
    train_ids: tuple[str, ...]
    train_labels: tuple[str, ...]  # aligned with train_ids; ordinal = insertion order
    vocab: np.ndarray  # sorted unique k-mer codes
    offsets: np.ndarray  # len(vocab) + 1
    post_ids: np.ndarray
    post_counts: np.ndarray

    @property
    def n_sequences(self) -> int:
        return len(self.train_ids)

    @property
    def insertion_order(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.train_ids)}

    @property
    def categories(self) -> list[str]:
        return sorted(set(self.train_labels))

    def postings(self, kmer: str) -> list[tuple[str, int]]:
        if len(kmer) != self.k:
            raise ValueError(f"expected a {self.k}-mer, got {kmer!r}")
        code = encode_kmer(kmer)
        if self.canonical:
            code = min(code, encode_kmer(reverse_complement(kmer)))
        pos = np.searchsorted(self.vocab, code)
        if pos == len(self.vocab) or self.vocab[pos] != code:
            return []
        lo, hi = self.offsets[pos], self.offsets[pos + 1]
        return [(self.train_ids[i], int(c)) for i, c in zip(self.post_ids[lo:hi], self.post_counts[lo:hi])]

    def kmers(self) -> list[str]:
        return [decode_kmer(int(c), self.k) for c in self.vocab]

    def save(self, path: str | Path) -> None:
        meta = {
            "k": self.k,
            "canonical": self.canonical,
            "train_ids": list(self.train_ids),
            "train_labels": list(self.train_labels),
        }
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh,
                meta=np.array(json.dumps(meta)),
                vocab=self.vocab,
                offsets=self.offsets,
                post_ids=self.post_ids,
                post_counts=self.post_counts,
            )

    @classmethod
    def load(cls, path: str | Path) -> KmerIndex:
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            return cls(
                meta["k"],
                meta["canonical"],
                tuple(meta["train_ids"]),
                tuple(meta["train_labels"]),
                data["vocab"],
                data["offsets"],
                data["post_ids"],
                data["post_counts"],
            )


def reverse_complement(dna: str) -> str:
    return dna.upper().translate(str.maketrans("ACGTN", "TGCAN"))[::-1]


def build_kmer_index(
    train: Sequence[SequenceRecord],
    labels: Mapping[str, str] | None = None,
    k: int = DEFAULT_K,
    canonical: bool = False,
) -> KmerIndex:
    """Index training sequences; ``labels`` defaults to each record's lab_id."""
    if not train:
        raise ValueError("cannot build an index from an empty training set")
    if not 1 <= k <= 31:
        raise ValueError(f"k must be in [1, 31], got {k}")
    train_labels = []
    for rec in train:
        lab = labels.get(rec.sequence_id) if labels is not None else rec.lab_id
        if lab is None:
            raise KeyError(f"no label for training sequence {rec.sequence_id!r}")
        train_labels.append(lab)

    codes, ids, counts = [], [], []
    for ordinal, rec in enumerate(train):
        c, n = kmer_counts(rec.dna, k, canonical)
        codes.append(c)
        counts.append(n)
        ids.append(np.full(len(c), ordinal, dtype=np.int32))
    all_codes = np.concatenate(codes)
    all_ids = np.concatenate(ids)
    all_counts = np.concatenate(counts)
    order = np.lexsort((all_ids, all_codes))
    all_codes, all_ids, all_counts = all_codes[order], all_ids[order], all_counts[order]
    vocab, starts = np.unique(all_codes, return_index=True)
    offsets = np.append(starts, len(all_codes)).astype(np.int64)
    return KmerIndex(
        k,
        canonical,
        tuple(r.sequence_id for r in train),
        tuple(train_labels),
        vocab,
        offsets,
        all_ids,
        all_counts.astype(np.int32),
    )


def _lookup(index: KmerIndex, dna: str) -> tuple[np.ndarray, np.ndarray]:
    """Vocabulary positions and query counts of the query k-mers present in the index."""
    codes, counts = kmer_counts(dna, index.k, index.canonical)
    if len(index.vocab) == 0 or len(codes) == 0:
        return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.int64)
    pos = np.searchsorted(index.vocab, codes)
    pos_clipped = np.minimum(pos, len(index.vocab) - 1)
    found = (pos < len(index.vocab)) & (index.vocab[pos_clipped] == codes)
    return pos[found], counts[found]


def shared_kmer_scores(query: SequenceRecord, index: KmerIndex) -> np.ndarray:
    """Sum over shared k-mers of min(query count, training count), per training sequence."""
    pos, qcounts = _lookup(index, query.dna)
    if len(pos) == 0:
        return np.zeros(index.n_sequences, dtype=np.int64)
    lo = index.offsets[pos]
    lengths = index.offsets[pos + 1] - lo
    total = int(lengths.sum())
    # flat positions of every posting entry touched by the query
    starts = np.repeat(lo - np.cumsum(lengths) + lengths, lengths)
    flat = starts + np.arange(total)
    shared = np.minimum(np.repeat(qcounts, lengths), index.post_counts[flat])
    scores = np.bincount(index.post_ids[flat], weights=shared, minlength=index.n_sequences)
    return scores.astype(np.int64)


class Hit(NamedTuple):
    train_id: str
    score: int
    pseudo_evalue: float
    input_order: int


@dataclass(frozen=True)
class HitList:
    query_id: str
    hits: tuple[Hit, ...]


def score_hits(
    query: SequenceRecord,
    index: KmerIndex,
    evalue_threshold: float = DEFAULT_EVALUE_THRESHOLD,
    k: int | None = None,
) -> HitList:
    """Hits of one query against the index, in database (insertion) order."""
    if k is not None and k != index.k:
        raise ValueError(f"query k={k} does not match index k={index.k}")
    scores = shared_kmer_scores(query, index)
    d = index.n_sequences
    hits = []
    for ordinal in np.flatnonzero(scores > 0):
        score = int(scores[ordinal])
        evalue = d / (1 + score)
        if evalue <= evalue_threshold:
            hits.append(Hit(index.train_ids[ordinal], score, evalue, int(ordinal)))
    return HitList(query.sequence_id, tuple(hits))


@dataclass(frozen=True)
class LabRanking:
    query_id: str
    labs: tuple[tuple[str, int], ...]  # (category, rank) with ranks 1..L

    def rank_of(self, lab: str) -> int | None:
        for name, rank in self.labs:
            if name == lab:
                return rank
        return None


def sort_hits(hits: Sequence[Hit], mode: str = "stable", rng: random.Random | None = None) -> list[Hit]:
    """Order hits by ascending pseudo E-value.

    ``stable`` keeps database order within ties, like a merge sort.
    ``unstable`` leaves tie order to ``rng``, standing in for a quicksort's
    arbitrary but reproducible treatment of equal keys.
    """
    hits = list(hits)
    if mode == "unstable":
        if rng is None:
            raise ValueError("unstable sorting needs a seeded rng")
        rng.shuffle(hits)
    elif mode != "stable":
        raise ValueError(f"unknown sort mode {mode!r}")
    return sorted(hits, key=lambda h: h.pseudo_evalue)


def rank_labs(
    hits: HitList,
    index: KmerIndex,
    mode: str = "stable",
    seed: int | None = None,
) -> LabRanking:
    rng = None
    if mode == "unstable":
        if seed is None:
            raise ValueError("unstable mode needs an explicit seed")
        # per-query stream: results do not depend on query processing order
        rng = random.Random(f"{seed}/{hits.query_id}")
    ordered = sort_hits(hits.hits, mode, rng)
    labs: dict[str, int] = {}
    for hit in ordered:
        lab = index.train_labels[hit.input_order]
        if lab not in labs:
            labs[lab] = len(labs) + 1
    return LabRanking(hits.query_id, tuple(labs.items()))


def ranking_to_probabilities(ranking: LabRanking, category_ids: Sequence[str]) -> np.ndarray:
    """Softmax over reversed ranks of the hit labs; uniform when nothing hit."""
    k = len(category_ids)
    if not ranking.labs:
        return np.full(k, 1.0 / k)
    col = {c: i for i, c in enumerate(category_ids)}
    n_labs = len(ranking.labs)
    # reversed rank L - r + 1, shifted by its maximum L for numerical stability
    logits = np.array([(n_labs - rank + 1) - n_labs for _, rank in ranking.labs], dtype=np.float64)
    weights = np.exp(logits)
    row = np.zeros(k)
    for (lab, _), w in zip(ranking.labs, weights / weights.sum()):
        if lab not in col:
            raise KeyError(f"hit lab {lab!r} is not in the category set")
        row[col[lab]] = w
    return row


def predict_kmer(
    queries: Sequence[SequenceRecord],
    index: KmerIndex,
    mode: str = "stable",
    seed: int | None = None,
    evalue_threshold: float = DEFAULT_EVALUE_THRESHOLD,
    category_ids: Sequence[str] | None = None,
) -> PredictionMatrix:
    cats = tuple(category_ids) if category_ids is not None else tuple(index.categories)
    rows = np.empty((len(queries), len(cats)))
    for i, query in enumerate(queries):
        ranking = rank_labs(score_hits(query, index, evalue_threshold), index, mode, seed)
        rows[i] = ranking_to_probabilities(ranking, cats)
    return PredictionMatrix(tuple(q.sequence_id for q in queries), cats, rows)


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    """Multinomial naive Bayes over k-mer counts with additive smoothing."""

    k: int
    canonical: bool
    alpha: float
    category_ids: tuple[str, ...]
    vocab: np.ndarray
    log_prior: np.ndarray
    # log(1 + N_cv / alpha), nonzero only where category c saw k-mer v
    log_excess: sparse.csc_matrix
    log_norm: np.ndarray  # log(N_c + alpha * V)


def nb_from_index(index: KmerIndex, alpha: float = 1.0) -> NaiveBayesModel:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    cats = tuple(index.categories)
    cat_col = {c: i for i, c in enumerate(cats)}
    label_idx = np.array([cat_col[lab] for lab in index.train_labels], dtype=np.int64)
    n_vocab = len(index.vocab)
    lengths = np.diff(index.offsets)
    vocab_idx = np.repeat(np.arange(n_vocab), lengths)
    counts = sparse.coo_matrix(
        (index.post_counts.astype(np.float64), (label_idx[index.post_ids], vocab_idx)),
        shape=(len(cats), n_vocab),
    ).tocsc()
    counts.sum_duplicates()
    totals = np.asarray(counts.sum(axis=1)).ravel()
    log_excess = counts.copy()
    log_excess.data = np.log1p(log_excess.data / alpha)
    priors = np.bincount(label_idx, minlength=len(cats)) / len(label_idx)
    return NaiveBayesModel(
        index.k,
        index.canonical,
        float(alpha),
        cats,
        index.vocab,
        np.log(priors),
        log_excess,
        np.log(totals + alpha * n_vocab),
    )


def nb_train(
    train: Sequence[SequenceRecord],
    labels: Mapping[str, str] | None = None,
    k: int = DEFAULT_K,
    alpha: float = 1.0,
    canonical: bool = False,
) -> NaiveBayesModel:
    return nb_from_index(build_kmer_index(train, labels, k, canonical), alpha)


def nb_log_posterior(model: NaiveBayesModel, query: SequenceRecord) -> np.ndarray:
    """Unnormalized log posterior; k-mers never seen in training are ignored."""
    codes, counts = kmer_counts(query.dna, model.k, model.canonical)
    if len(codes) and len(model.vocab):
        pos = np.searchsorted(model.vocab, codes)
        clipped = np.minimum(pos, len(model.vocab) - 1)
        found = (pos < len(model.vocab)) & (model.vocab[clipped] == codes)
        pos, counts = pos[found], counts[found].astype(np.float64)
    else:
        pos, counts = np.empty(0, dtype=np.intp), np.empty(0)
    n = counts.sum()
    evidence = model.log_excess[:, pos] @ counts if len(pos) else np.zeros(len(model.category_ids))
    return model.log_prior + n * math.log(model.alpha) + np.asarray(evidence).ravel() - n * model.log_norm


def nb_predict(model: NaiveBayesModel, query: SequenceRecord) -> np.ndarray:
    logp = nb_log_posterior(model, query)
    weights = np.exp(logp - logp.max())
    return weights / weights.sum()


def predict_nb(
    queries: Sequence[SequenceRecord],
    model: NaiveBayesModel,
    category_ids: Sequence[str] | None = None,
) -> PredictionMatrix:
    cats = tuple(category_ids) if category_ids is not None else model.category_ids
    col = {c: i for i, c in enumerate(cats)}
    missing = [c for c in model.category_ids if c not in col]
    if missing:
        raise KeyError(f"model categories missing from output columns: {missing[:5]}")
    place = np.array([col[c] for c in model.category_ids], dtype=np.intp)
    rows = np.zeros((len(queries), len(cats)))
    for i, query in enumerate(queries):
        rows[i, place] = nb_predict(model, query)
    return PredictionMatrix(tuple(q.sequence_id for q in queries), cats, rows)
