"""LETOR ingestion and semi-synthetic attractiveness generation.

Public ranking corpora carry one graded relevance label per document;
this module expands each label into one attractiveness value per
presentation length. Labels partition [0, 1] into 5L bins ordered by
(label, length); a document's position inside its bin comes from the
rank of a seeded random projection of its features among the documents
sharing the bin. Half the documents (chosen by one extra projection)
then get their per-length values permuted, so that longer is not always
better.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import AttractTable
from .seeding import rng_for, stable_qid_key

N_GRADES = 5  # relevance labels 0..4
DEFAULT_MAX_DOCS = 250


@dataclass
class QueryInstance:
    qid: str
    features: np.ndarray
    labels: np.ndarray
    attract: AttractTable | None = None
    reordered: np.ndarray | None = None

    @property
    def num_docs(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class BinScheme:
    """5L attractiveness bins covering [0, 1], ordered by (label, length)."""

    kind: str
    max_len: int
    boundaries: np.ndarray = field(repr=False)

    def interval(self, label: int, length: int) -> tuple[float, float]:
        idx = label * self.max_len + (length - 1)
        return float(self.boundaries[idx]), float(self.boundaries[idx + 1])


def make_bins(kind: str, max_len: int) -> BinScheme:
    """``equal``: all bins the same width. ``doubling``: each bin twice as
    wide as the previous, widest at the highest (label, length)."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    n = N_GRADES * max_len
    if kind == "equal":
        bounds = np.linspace(0.0, 1.0, n + 1)
    elif kind == "doubling":
        widths = np.array([2.0 ** (i - 1) for i in range(1, n + 1)])
        widths /= widths.sum()
        bounds = np.concatenate([[0.0], np.cumsum(widths)])
        bounds[-1] = 1.0
    else:
        raise ValueError(f"unknown bin scheme {kind!r}")
    return BinScheme(kind=kind, max_len=max_len, boundaries=bounds)


def parse_letor(path, max_docs: int = DEFAULT_MAX_DOCS):
    """Parse an SVMlight-style ranking file into per-query instances.

    Lines look like ``label qid:ID idx:value ... # comment``. Documents
    are grouped by qid in file order; queries with more than ``max_docs``
    documents are dropped and reported. Returns (queries, report).
    """
    raw: dict[str, list[tuple[int, dict[int, float]]]] = {}
    order: list[str] = []
    max_index = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2 or not parts[1].startswith("qid:"):
                raise ValueError(f"{path}:{lineno}: expected 'label qid:<id> ...'")
            try:
                label = int(float(parts[0]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            if not (0 <= label < N_GRADES):
                raise ValueError(
                    f"{path}:{lineno}: label {label} outside 0..{N_GRADES - 1}"
                )
            qid = parts[1][4:]
            feats: dict[int, float] = {}
            for tok in parts[2:]:
                if ":" not in tok:
                    raise ValueError(f"{path}:{lineno}: bad feature token {tok!r}")
                idx_s, val_s = tok.split(":", 1)
                try:
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad feature token {tok!r}") from None
                if idx < 1:
                    raise ValueError(f"{path}:{lineno}: feature indices start at 1")
                feats[idx] = val
                max_index = max(max_index, idx)
            if qid not in raw:
                raw[qid] = []
                order.append(qid)
            raw[qid].append((label, feats))
    queries: list[QueryInstance] = []
    skipped: list[str] = []
    for qid in order:
        docs = raw[qid]
        if len(docs) > max_docs:
            skipped.append(qid)
            continue
        feats = np.zeros((len(docs), max_index))
        labels = np.zeros(len(docs), dtype=np.int64)
        for i, (label, fmap) in enumerate(docs):
            labels[i] = label
            for idx, val in fmap.items():
                feats[i, idx - 1] = val
        queries.append(QueryInstance(qid=qid, features=feats, labels=labels))
    report = {
        "num_queries": len(queries),
        "skipped_queries": len(skipped),
        "skipped_qids": skipped,
        "feature_dim": max_index,
        "max_docs": max_docs,
    }
    return queries, report


def _midrank_quantiles(values: np.ndarray) -> np.ndarray:
    """Quantiles by average rank over ties: midrank / (count + 1), always
    strictly inside (0, 1)."""
    n = len(values)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n)
    sorted_vals = values[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks / (n + 1.0)


def generate_attractiveness(queries, max_len: int, scheme: BinScheme, seed) -> list[QueryInstance]:
    """Attach a per-length attractiveness table to every query's documents."""
    if scheme.max_len != max_len:
        raise ValueError("bin scheme was built for a different max_len")
    if not queries:
        return []
    dim = queries[0].features.shape[1]
    projections = rng_for(seed, 9001).normal(size=(max_len + 1, dim))

    # Flatten the corpus so that bin groups span all queries.
    doc_index: list[tuple[int, int]] = []
    all_scores = []
    all_labels = []
    for qi, q in enumerate(queries):
        if q.features.shape[1] != dim:
            raise ValueError("queries disagree on feature dimension")
        s = q.features @ projections.T
        for di in range(q.num_docs):
            doc_index.append((qi, di))
            all_scores.append(s[di])
            all_labels.append(q.labels[di])
    scores = np.array(all_scores)
    labels = np.array(all_labels)
    n = len(doc_index)

    rho = np.zeros((n, max_len))
    for l in range(1, max_len + 1):
        for grade in range(N_GRADES):
            members = np.flatnonzero(labels == grade)
            if members.size == 0:
                continue
            q = _midrank_quantiles(scores[members, l - 1])
            lo, hi = scheme.interval(grade, l)
            rho[members, l - 1] = lo + q * (hi - lo)

    # Lower half by the extra projection score loses the monotone length
    # ordering: its per-length values are shuffled.
    extra = scores[:, max_len]
    reorder_set = set(np.argsort(extra, kind="stable")[: n // 2].tolist())
    reordered = np.zeros(n, dtype=bool)
    for g, (qi, di) in enumerate(doc_index):
        if g in reorder_set:
            prng = rng_for(seed, stable_qid_key(queries[qi].qid), di, 77)
            rho[g] = rho[g][prng.permutation(max_len)]
            reordered[g] = True

    out: list[QueryInstance] = []
    cursor = 0
    for q in queries:
        nq = q.num_docs
        out.append(
            QueryInstance(
                qid=q.qid,
                features=q.features,
                labels=q.labels,
                attract=AttractTable(rho[cursor : cursor + nq]),
                reordered=reordered[cursor : cursor + nq].copy(),
            )
        )
        cursor += nq
    return out


def write_attract_file(queries, path, meta: dict) -> None:
    """Columnar dump: ``qid doc label rho_1 .. rho_L flag`` plus a JSON
    manifest next to it."""
    with open(path, "w") as fh:
        for q in queries:
            for di in range(q.num_docs):
                rho = " ".join(repr(float(v)) for v in q.attract.values[di])
                flag = int(bool(q.reordered[di])) if q.reordered is not None else 0
                fh.write(f"{q.qid} {di} {int(q.labels[di])} {rho} {flag}\n")
    with open(str(path) + ".manifest.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def read_attract_file(path):
    """Load the columnar dump; returns (per-qid arrays, manifest)."""
    with open(str(path) + ".manifest.json") as fh:
        meta = json.load(fh)
    per_qid: dict[str, dict] = {}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            qid, di, label = parts[0], int(parts[1]), int(parts[2])
            rho = [float(v) for v in parts[3:-1]]
            flag = bool(int(parts[-1]))
            entry = per_qid.setdefault(qid, {"rows": []})
            entry["rows"].append((di, label, rho, flag))
    out: dict[str, dict] = {}
    for qid, entry in per_qid.items():
        rows = sorted(entry["rows"])
        out[qid] = {
            "labels": np.array([r[1] for r in rows], dtype=np.int64),
            "attract": AttractTable(np.array([r[2] for r in rows])),
            "reordered": np.array([r[3] for r in rows], dtype=bool),
        }
    return out, meta


def make_sample_corpus(path, n_queries: int = 20, n_features: int = 8, seed: int = 7) -> None:
    """Write a small synthetic LETOR file for end-to-end runs and tests."""
    rng = rng_for(seed, 4242)
    direction = rng.normal(size=n_features)
    direction /= np.linalg.norm(direction)
    with open(path, "w") as fh:
        for q in range(1, n_queries + 1):
            n_docs = int(rng.integers(14, 36))
            feats = rng.normal(size=(n_docs, n_features))
            latent = feats @ direction + rng.normal(0, 0.35, size=n_docs)
            edges = np.quantile(latent, [0.35, 0.6, 0.8, 0.93])
            labels = np.digitize(latent, edges)
            for i in range(n_docs):
                toks = " ".join(
                    f"{j + 1}:{feats[i, j]:.6f}" for j in range(n_features)
                )
                fh.write(f"{labels[i]} qid:{q} {toks}\n")
