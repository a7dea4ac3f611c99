"""TREC-style evaluation: mAP, nDCG@10, Recall@1000, plus run/qrels file IO."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class TrecFormatError(ValueError):
    """Raised when a run or qrels file cannot be parsed."""


@dataclass
class Qrels:
    """Graded relevance judgments keyed by (query_id, doc_id)."""

    judgments: dict[str, dict[str, int]] = field(default_factory=dict)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.judgments.get(query_id, {}).get(doc_id, 0)

    def query_ids(self) -> list[str]:
        return sorted(self.judgments)

    @classmethod
    def read(cls, path: str) -> "Qrels":
        qrels = cls()
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise TrecFormatError(f"{path}:{line_no}: expected 4 fields, got {len(parts)}")
                qid, _, docid, grade = parts
                try:
                    g = int(grade)
                except ValueError:
                    raise TrecFormatError(f"{path}:{line_no}: grade {grade!r} is not an integer")
                if g < 0:
                    raise TrecFormatError(f"{path}:{line_no}: negative grade")
                qrels.judgments.setdefault(qid, {})[docid] = g
        return qrels


@dataclass
class RunFile:
    """Per-query ranked doc lists with scores, TREC run-file semantics."""

    rankings: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    tag: str = "iterqe"

    def add(self, query_id: str, doc_id: str, score: float) -> None:
        ranking = self.rankings.setdefault(query_id, [])
        if any(d == doc_id for d, _ in ranking):
            raise ValueError(f"duplicate doc {doc_id!r} for query {query_id!r}")
        ranking.append((doc_id, score))

    def doc_ids(self, query_id: str) -> list[str]:
        return [d for d, _ in self.rankings.get(query_id, [])]

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for qid in sorted(self.rankings):
                for rank, (docid, score) in enumerate(self.rankings[qid], 1):
                    fh.write(f"{qid} Q0 {docid} {rank} {score:.6f} {self.tag}\n")

    @classmethod
    def read(cls, path: str) -> "RunFile":
        run = cls()
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                parts = line.split()
                if len(parts) != 6:
                    raise TrecFormatError(f"{path}:{line_no}: expected 6 fields, got {len(parts)}")
                qid, _, docid, _rank, score, tag = parts
                try:
                    s = float(score)
                except ValueError:
                    raise TrecFormatError(f"{path}:{line_no}: score {score!r} is not a number")
                try:
                    run.add(qid, docid, s)
                except ValueError as exc:
                    raise TrecFormatError(f"{path}:{line_no}: {exc}")
                run.tag = tag
        return run


def ndcg_at_k(ranking: list[str], grades: dict[str, int], k: int) -> float:
    """Exponential-gain nDCG over the top k; 0 when nothing is relevant."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = 0.0
    for i, doc_id in enumerate(ranking[:k], 1):
        g = grades.get(doc_id, 0)
        dcg += (2**g - 1) / math.log2(i + 1)
    ideal = sorted(grades.values(), reverse=True)[:k]
    idcg = sum((2**g - 1) / math.log2(i + 1) for i, g in enumerate(ideal, 1))
    return dcg / idcg if idcg > 0 else 0.0


def average_precision(ranking: list[str], relevant: set[str]) -> float:
    """Binary AP normalized by the total number of judged-relevant docs."""
    if not relevant:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for i, doc_id in enumerate(ranking, 1):
        if doc_id in relevant:
            hits += 1
            precision_sum += hits / i
    return precision_sum / len(relevant)


def recall_at_k(ranking: list[str], relevant: set[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        return 0.0
    return len(relevant & set(ranking[:k])) / len(relevant)


@dataclass
class EvalResult:
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]


def evaluate_run(run: RunFile, qrels: Qrels, binary_threshold: int = 1,
                 ndcg_k: int = 10, recall_k: int = 1000) -> EvalResult:
    """Per-query and mean mAP / nDCG@10 / Recall@1000 over the qrels query set."""
    query_ids = qrels.query_ids()
    if not set(query_ids) & set(run.rankings):
        raise ValueError("run and qrels share no query ids")
    per_query: dict[str, dict[str, float]] = {}
    for qid in query_ids:
        grades = qrels.judgments[qid]
        relevant = {d for d, g in grades.items() if g >= binary_threshold}
        ranking = run.doc_ids(qid)
        per_query[qid] = {
            "map": average_precision(ranking, relevant),
            f"ndcg@{ndcg_k}": ndcg_at_k(ranking, grades, ndcg_k),
            f"recall@{recall_k}": recall_at_k(ranking, relevant, recall_k),
        }
    metrics = ["map", f"ndcg@{ndcg_k}", f"recall@{recall_k}"]
    means = {
        m: sum(per_query[q][m] for q in query_ids) / len(query_ids) for m in metrics
    }
    return EvalResult(per_query=per_query, means=means)
