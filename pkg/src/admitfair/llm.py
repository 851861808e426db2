"""Pseudo personal statements, pluggable admission-likelihood scorers and the ``LLM_score`` feature."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import string
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import requests

from .data import DataTable
from .features import FeatureMatrix

logger = logging.getLogger(__name__)

LLM_FEATURE = "LLM_score"

DEFAULT_TEMPLATE = (
    "I am applying with a GRE score of {GRE} and a TOEFL score of {TOEFL}. "
    "My cumulative GPA is {CGPA} out of 10. My statement of purpose is rated {SOP} "
    "and my letters of recommendation {LOR} on a five-point scale. "
    "Research experience: {Research}."
)
DEFAULT_RUBRIC = (
    "Read the personal statement and return JSON {\"score\": p} where p in [0, 1] is the "
    "likelihood that the applicant is admitted to a competitive graduate program."
)


class ScorerError(RuntimeError):
    def __init__(self, message, raw_response=None):
        super().__init__(message)
        self.raw_response = raw_response


@dataclass(frozen=True)
class StatementTemplate:
    text: str = DEFAULT_TEMPLATE

    @property
    def fields(self) -> list[str]:
        return [name for _, name, _, _ in string.Formatter().parse(self.text) if name]

    def validate(self, columns: Sequence[str]) -> None:
        missing = [f for f in self.fields if f not in columns]
        if missing:
            raise ValueError(f"template placeholders name unknown columns: {missing}")


@dataclass(frozen=True)
class LlmScore:
    row_id: int
    score: float
    scorer_id: str
    raw_response: str | None = None


def _format(value) -> str:
    if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
        return f"{float(value):.1f}"
    return str(value)


def render_statement(row: Mapping, template: StatementTemplate = StatementTemplate()) -> str:
    values = {}
    for name in template.fields:
        value = row.get(name) if hasattr(row, "get") else None
        if value is None or (isinstance(value, float) and math.isnan(value)):
            raise ValueError(f"missing field {name}")
        values[name] = _format(value)
    return template.text.format(**values)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class MockScorer:
    """Deterministic stand-in for an LLM grader.

    ``score = sigmoid(1.5 z_GRE + 1.5 z_TOEFL + 2.0 z_CGPA + 0.5 Research)``.
    With ``reference`` statistics the raw row values are standardized first;
    without them the row is taken as already standardized.
    """

    scorer_id = "mock-v1"
    WEIGHTS = {"GRE": 1.5, "TOEFL": 1.5, "CGPA": 2.0}
    RESEARCH_WEIGHT = 0.5

    def __init__(self, reference: Mapping[str, tuple[float, float]] | None = None):
        self.reference = dict(reference) if reference else None

    @classmethod
    def fit(cls, table: DataTable) -> "MockScorer":
        ref = {}
        for name in cls.WEIGHTS:
            col = table.column(name).to_numpy(dtype=float)
            ref[name] = (float(col.mean()), float(col.std()))
        return cls(ref)

    def _z(self, name, value):
        if self.reference is None:
            return float(value)
        mean, std = self.reference[name]
        return (float(value) - mean) / std if std > 0 else 0.0

    def score(self, statement: str, row: Mapping) -> tuple[float, str | None]:
        z = sum(w * self._z(name, row[name]) for name, w in self.WEIGHTS.items())
        z += self.RESEARCH_WEIGHT * float(row.get("Research", 0.0))
        return _sigmoid(z), None


class RemoteScorer:
    """POST ``{statement, rubric}`` to an HTTP endpoint that answers ``{"score": number}``.

    Connection errors, timeouts, 429/5xx responses and unparseable bodies are
    retried up to ``retries`` times with exponential backoff.
    """

    def __init__(self, url: str, token: str | None = None, rubric: str = DEFAULT_RUBRIC,
                 timeout: float = 30.0, retries: int = 3, backoff: float = 0.5, session=None):
        self.url = url
        self.token = token
        self.rubric = rubric
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()
        self.scorer_id = f"remote:{url}"

    @classmethod
    def from_env(cls, **overrides) -> "RemoteScorer":
        url = overrides.pop("url", None) or os.environ.get("ADMITFAIR_SCORER_URL")
        if not url:
            raise ScorerError("remote scorer needs a URL (set ADMITFAIR_SCORER_URL)")
        token = overrides.pop("token", None) or os.environ.get("ADMITFAIR_SCORER_TOKEN")
        if "timeout" not in overrides and os.environ.get("ADMITFAIR_SCORER_TIMEOUT"):
            overrides["timeout"] = float(os.environ["ADMITFAIR_SCORER_TIMEOUT"])
        return cls(url, token, **overrides)

    def _parse(self, text: str) -> float:
        payload = json.loads(text)
        value = float(payload["score"])
        if not math.isfinite(value):
            raise ValueError("non-finite score")
        return value

    def score(self, statement: str, row: Mapping | None = None) -> tuple[float, str | None]:
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        body = {"statement": statement, "rubric": self.rubric}
        raw = None
        last_error = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(self.url, json=body, headers=headers, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                continue
            raw = resp.text
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = ScorerError(f"HTTP {resp.status_code}", raw)
                continue
            if resp.status_code >= 400:
                raise ScorerError(f"scorer rejected the request: HTTP {resp.status_code}", raw)
            try:
                value = self._parse(raw)
            except (ValueError, KeyError, TypeError) as exc:
                last_error = exc
                continue
            if not 0.0 <= value <= 1.0:
                logger.warning("remote score %r outside [0, 1]; clamped", value)
                value = min(1.0, max(0.0, value))
            return value, raw
        raise ScorerError(f"remote scoring failed after {self.retries + 1} attempts: {last_error}", raw)


class ScoreCache:
    """Directory of JSON records keyed by ``sha256(scorer_id, statement)``.

    Writes go through a temporary file and an atomic rename, so concurrent
    readers never see a partial record.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(scorer_id: str, statement: str) -> str:
        return hashlib.sha256(f"{scorer_id}\n{statement}".encode("utf-8")).hexdigest()

    def get(self, scorer_id: str, statement: str):
        path = self.directory / f"{self.key(scorer_id, statement)}.json"
        try:
            with open(path) as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def put(self, scorer_id: str, statement: str, score: float, raw: str | None) -> None:
        key = self.key(scorer_id, statement)
        record = {"scorer_id": scorer_id, "key": key, "score": score, "raw_response": raw}
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump(record, fh, sort_keys=True)
        os.replace(tmp, self.directory / f"{key}.json")


def score_statement(scorer, statement: str, row: Mapping, row_id: int = 0,
                    cache: ScoreCache | None = None) -> LlmScore:
    if cache is not None:
        hit = cache.get(scorer.scorer_id, statement)
        if hit is not None:
            return LlmScore(row_id, float(hit["score"]), scorer.scorer_id, hit.get("raw_response"))
    value, raw = scorer.score(statement, row)
    if not 0.0 <= value <= 1.0:
        logger.warning("score %r from %s outside [0, 1]; clamped", value, scorer.scorer_id)
        value = min(1.0, max(0.0, value))
    if cache is not None:
        cache.put(scorer.scorer_id, statement, value, raw)
    return LlmScore(row_id, float(value), scorer.scorer_id, raw)


def score_table(table: DataTable, scorer, template: StatementTemplate = StatementTemplate(),
                cache: ScoreCache | None = None, max_workers: int = 1):
    """Render and score every row; returns ``(statements, scores)`` in row order."""
    template.validate(table.columns)
    rows = table.frame.to_dict(orient="records")
    statements = [render_statement(r, template) for r in rows]
    ids = table.row_ids

    def work(i):
        return score_statement(scorer, statements[i], rows[i], ids[i], cache)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scores = list(pool.map(work, range(len(rows))))
    else:
        scores = [work(i) for i in range(len(rows))]
    return statements, scores


def augment_features(matrix: FeatureMatrix, scores: Sequence[LlmScore]) -> FeatureMatrix:
    """Append the scores as a trailing ``LLM_score`` column."""
    if len(scores) != len(matrix):
        raise ValueError(f"{len(scores)} scores for {len(matrix)} rows")
    column = np.asarray([s.score for s in scores], dtype=float).reshape(-1, 1)
    return FeatureMatrix(np.hstack([matrix.values, column]), list(matrix.feature_names) + [LLM_FEATURE],
                         matrix.labels.copy(), dict(matrix.sensitive), matrix.row_ids)


def statements_csv(statements: Sequence[str], scores: Sequence[LlmScore]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_id", "scorer_id", "score", "statement"])
    for text, s in zip(statements, scores):
        writer.writerow([s.row_id, s.scorer_id, repr(s.score), text])
    return buf.getvalue()
