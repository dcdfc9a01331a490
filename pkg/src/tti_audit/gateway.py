"""Boundary to external ML models over HTTP, plus precomputed-file ingestion.

The toolkit never embeds model runtimes: captions, VQA answers and dense
embeddings come either from a small inference API (POST /caption, /vqa,
/embed) or from files written by an earlier run. Embedding rows are always
re-normalized here rather than trusting the server, and constrained VQA
answers outside the allowed vocabulary map to the UNRESOLVED sentinel
instead of being coerced to a nearby label.
"""

from __future__ import annotations

import base64
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from . import vocab
from .corpus import Corpus, image_path
from .errors import FormatError, GatewayError, RetryExhausted, ValidationError

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 0.25
DEFAULT_WIDTH = 8
DEFAULT_TIMEOUT = 30.0

DEFAULT_CONSTRAINTS = {
    "gender": vocab.VQA_GENDER_ANSWERS,
    "ethnicity": vocab.VQA_ETHNICITY_ANSWERS,
}


@dataclass
class Annotation:
    image_id: str
    caption: str
    vqa: dict[str, str]
    source: str = "remote"

    def __post_init__(self):
        unknown = set(self.vqa) - set(vocab.QUESTION_KEYS)
        if unknown:
            raise ValidationError(f"{self.image_id}: unknown question keys {sorted(unknown)}")
        if self.source not in ("remote", "file"):
            raise ValidationError(f"bad annotation source {self.source!r}")


@dataclass
class EmbeddingMatrix:
    """Dense, L2-normalized image embeddings; row i belongs to ids[i]."""

    ids: list[str]
    rows: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2:
            raise ValidationError("embedding rows must be a 2-D matrix")
        if len(self.ids) != self.rows.shape[0]:
            raise ValidationError("id/row count mismatch")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("duplicate embedding ids")
        if self.rows.size and not np.isfinite(self.rows).all():
            raise ValidationError("embedding rows must be finite")

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def row(self, image_id: str) -> np.ndarray:
        return self.rows[self.ids.index(image_id)]


def _normalize_rows(rows: np.ndarray, context: str) -> np.ndarray:
    rows64 = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows64, axis=1)
    degenerate = np.nonzero(norms == 0)[0]
    if degenerate.size:
        raise GatewayError(f"degenerate embedding (zero norm) at {context} row {degenerate[0]}")
    return (rows64 / norms[:, None]).astype(np.float32)


def _encode_image(record, root: Path | None) -> str:
    return base64.b64encode(image_path(record, root).read_bytes()).decode("ascii")


class _Client:
    """Thin POST helper with bounded exponential-backoff retries."""

    def __init__(self, endpoint: str, timeout: float, transport=None):
        self._client = httpx.Client(base_url=endpoint, timeout=timeout, transport=transport)

    def close(self):
        self._client.close()

    def post(self, path: str, payload: dict) -> dict:
        last_error = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                resp = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt + 1 < RETRY_ATTEMPTS:
                    time.sleep(RETRY_BASE_DELAY * 2**attempt)
                continue
            if 400 <= resp.status_code < 500:
                raise GatewayError(
                    f"endpoint rejected {path}: HTTP {resp.status_code} {resp.text[:200]}"
                )
            if resp.status_code >= 500:
                last_error = GatewayError(f"HTTP {resp.status_code} from {path}")
                if attempt + 1 < RETRY_ATTEMPTS:
                    time.sleep(RETRY_BASE_DELAY * 2**attempt)
                continue
            return resp.json()
        raise RetryExhausted(f"{path} failed after {RETRY_ATTEMPTS} attempts: {last_error}")


def fetch_annotations(
    corpus: Corpus,
    endpoint: str,
    questions: tuple[str, ...] = vocab.QUESTION_KEYS,
    constraints: dict[str, tuple[str, ...]] | None = None,
    width: int = DEFAULT_WIDTH,
    timeout: float = DEFAULT_TIMEOUT,
    transport=None,
    image_root: Path | None = None,
) -> tuple[list[Annotation], list[dict]]:
    """Fetch caption + VQA answers per image.

    Returns (annotations, error_records): retryable per-image failures are
    recorded and the batch continues; a 4xx aborts immediately. Results
    follow corpus order regardless of completion order.
    """
    if constraints is None:
        constraints = DEFAULT_CONSTRAINTS
    client = _Client(endpoint, timeout, transport)

    def one(record):
        image_b64 = _encode_image(record, image_root)
        caption = client.post("/caption", {"image": image_b64})["text"]
        vqa = {}
        for key in questions:
            payload = {"image": image_b64, "question": vocab.VQA_QUESTIONS[key]}
            allowed = constraints.get(key)
            if allowed is not None:
                payload["allowed"] = list(allowed)
            answer = client.post("/vqa", payload)["answer"]
            if allowed is not None and answer not in allowed:
                answer = vocab.UNRESOLVED
            vqa[key] = answer
        return Annotation(image_id=record.id, caption=caption, vqa=vqa, source="remote")

    annotations, errors = [], []
    try:
        with ThreadPoolExecutor(max_workers=width) as pool:
            futures = [pool.submit(one, rec) for rec in corpus.records]
            for record, future in zip(corpus.records, futures):
                try:
                    annotations.append(future.result())
                except RetryExhausted as exc:
                    errors.append({"image_id": record.id, "error": str(exc)})
    finally:
        client.close()
    return annotations, errors


def fetch_embeddings(
    corpus: Corpus,
    endpoint: str,
    question_key: str = "appearance",
    width: int = DEFAULT_WIDTH,
    timeout: float = DEFAULT_TIMEOUT,
    transport=None,
    image_root: Path | None = None,
) -> EmbeddingMatrix:
    """Fetch one embedding per image and L2-normalize the rows locally.

    An incomplete matrix is useless downstream, so any per-image failure
    (after retries), dimension mismatch, or zero vector aborts the fetch.
    """
    if question_key not in vocab.QUESTION_KEYS:
        raise ValidationError(f"unknown question key {question_key!r}")
    client = _Client(endpoint, timeout, transport)

    def one(record):
        payload = {
            "image": _encode_image(record, image_root),
            "question": vocab.VQA_QUESTIONS[question_key],
        }
        vector = client.post("/embed", payload)["vector"]
        return np.asarray(vector, dtype=np.float64)

    try:
        with ThreadPoolExecutor(max_workers=width) as pool:
            vectors = list(pool.map(one, corpus.records))
    finally:
        client.close()
    dims = {v.shape for v in vectors}
    if len(dims) > 1:
        raise GatewayError(f"dimension mismatch across responses: {sorted(dims)}")
    rows = _normalize_rows(np.stack(vectors), endpoint)
    return EmbeddingMatrix(ids=corpus.ids, rows=rows)


# -- EMB1 embedding file format ------------------------------------------------

EMB_MAGIC = b"EMB1"


def save_embeddings(matrix: EmbeddingMatrix, path) -> None:
    """EMB1 layout: magic, u32 count, u32 dim, count ids (u16 length +
    UTF-8), count*dim little-endian f32 row-major."""
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(np.array([len(matrix), matrix.dim], dtype="<u4").tobytes())
        for image_id in matrix.ids:
            blob = image_id.encode("utf-8")
            fh.write(np.array([len(blob)], dtype="<u2").tobytes())
            fh.write(blob)
        fh.write(matrix.rows.astype("<f4").tobytes())


def load_embeddings(path) -> EmbeddingMatrix:
    raw = Path(path).read_bytes()
    if raw[:4] != EMB_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    count, dim = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    offset = 12
    ids = []
    for _ in range(count):
        if offset + 2 > len(raw):
            raise FormatError(f"{path}: truncated id table")
        length = int(np.frombuffer(raw, dtype="<u2", count=1, offset=offset)[0])
        offset += 2
        ids.append(raw[offset : offset + length].decode("utf-8"))
        offset += length
    floats = np.frombuffer(raw, dtype="<f4", offset=offset)
    if floats.size != count * dim:
        raise FormatError(f"{path}: expected {count * dim} floats, found {floats.size}")
    if not np.isfinite(floats).all():
        raise FormatError(f"{path}: NaN/Inf in embedding payload")
    rows = floats.reshape(count, dim)
    if count:
        norms = np.linalg.norm(rows.astype(np.float64), axis=1)
        worst = float(np.abs(norms - 1.0).max())
        if worst > 1e-6:
            raise FormatError(f"{path}: rows are not unit-normalized (off by {worst:.2e})")
    return EmbeddingMatrix(ids=ids, rows=rows)


# -- Annotation JSONL ------------------------------------------------------------

def save_annotations(annotations: list[Annotation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(
                json.dumps(
                    {"image_id": ann.image_id, "caption": ann.caption, "vqa": ann.vqa},
                    sort_keys=True,
                )
                + "\n"
            )


def load_annotations(path) -> list[Annotation]:
    """Line-delimited {image_id, caption, vqa} records; constrained answers
    must be in-vocabulary or UNRESOLVED."""
    annotations = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: malformed record ({exc.msg})") from None
            for key in ("image_id", "caption", "vqa"):
                if key not in raw:
                    raise ValidationError(f"{where}: missing field {key!r}")
            vqa = dict(raw["vqa"])
            for key, allowed in DEFAULT_CONSTRAINTS.items():
                answer = vqa.get(key)
                if answer is not None and answer not in allowed and answer != vocab.UNRESOLVED:
                    raise ValidationError(
                        f"{where}: constrained answer {answer!r} for {key!r} is out of vocabulary"
                    )
            annotations.append(
                Annotation(image_id=raw["image_id"], caption=raw["caption"], vqa=vqa, source="file")
            )
    return annotations
