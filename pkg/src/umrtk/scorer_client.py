"""Client for external sentence scorers (e.g. a multilingual BERTScore service).

Wire protocol: each batch is an HTTP POST whose body is JSON lines, one
object per pair::

    {"id": "3", "candidate": "...", "reference": "...", "language": "en"}

The service answers with JSON lines ``{"id": "3", "score": 0.81}``. Every
requested id must come back exactly once with a score in [0, 1]. The corpus
score is the mean over pairs.
"""
from __future__ import annotations

import json
import math
import socket
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .metrics import EvalPair

CONTENT_TYPE = "application/x-ndjson"


class ScorerError(RuntimeError):
    pass


class EndpointUnreachable(ScorerError):
    pass


class MalformedResponse(ScorerError):
    pass


class PartialBatch(ScorerError):
    def __init__(self, missing: Sequence[str]):
        super().__init__(f"endpoint returned no score for ids {list(missing)}")
        self.missing = list(missing)


@dataclass(frozen=True)
class ScorerEndpoint:
    name: str
    url: str
    batch_size: int = 32
    max_concurrency: int = 4
    timeout: float = 30.0


def encode_request(pairs: Sequence[EvalPair], ids: Sequence[str]) -> bytes:
    lines = [
        json.dumps(
            {"id": i, "candidate": p.candidate_text, "reference": p.reference_text,
             "language": p.language},
            ensure_ascii=False,
        )
        for i, p in zip(ids, pairs)
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def decode_response(body: bytes, expected: Sequence[str]) -> dict[str, float]:
    """Parse a JSON-lines response and check it against the requested ids."""
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as err:
        raise MalformedResponse("response is not UTF-8") from err
    scores: dict[str, float] = {}
    wanted = set(expected)
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            sid, score = obj["id"], obj["score"]
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise MalformedResponse(f"line {n}: {line[:80]!r}") from err
        sid = str(sid)
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise MalformedResponse(f"line {n}: non-numeric score {score!r}")
        if not math.isfinite(score) or not 0.0 <= score <= 1.0:
            raise MalformedResponse(f"line {n}: score {score} outside [0, 1]")
        if sid not in wanted:
            raise MalformedResponse(f"line {n}: unrequested id {sid!r}")
        if sid in scores:
            raise MalformedResponse(f"line {n}: duplicate id {sid!r}")
        scores[sid] = float(score)
    missing = [i for i in expected if i not in scores]
    if missing:
        raise PartialBatch(missing)
    return scores


def _post(endpoint: ScorerEndpoint, body: bytes) -> bytes:
    req = urllib.request.Request(
        endpoint.url, data=body, method="POST",
        headers={"Content-Type": CONTENT_TYPE, "Accept": CONTENT_TYPE},
    )
    try:
        with urllib.request.urlopen(req, timeout=endpoint.timeout) as resp:
            return resp.read()
    except urllib.error.HTTPError as err:
        raise MalformedResponse(f"HTTP {err.code} from {endpoint.url}") from err
    except (urllib.error.URLError, socket.timeout, ConnectionError) as err:
        raise EndpointUnreachable(f"{endpoint.url}: {err}") from err


def score_pairs(pairs: Sequence[EvalPair], endpoint: ScorerEndpoint) -> dict[str, float]:
    """Per-pair scores keyed by pair id (position when a pair has no id)."""
    ids = [p.id or str(n) for n, p in enumerate(pairs)]
    if len(set(ids)) != len(ids):
        raise ValueError("pair ids must be unique")
    size = max(1, endpoint.batch_size)
    batches = [(pairs[i:i + size], ids[i:i + size]) for i in range(0, len(pairs), size)]

    def run(batch):
        bp, bi = batch
        return decode_response(_post(endpoint, encode_request(bp, bi)), bi)

    scores: dict[str, float] = {}
    with ThreadPoolExecutor(max_workers=max(1, endpoint.max_concurrency)) as pool:
        for part in pool.map(run, batches):
            scores.update(part)
    return scores


def external_score(pairs: Sequence[EvalPair], endpoint: ScorerEndpoint) -> dict[str, float]:
    """Corpus mean under one external scorer, as ``{endpoint.name: mean}``."""
    if not pairs:
        raise ValueError("no pairs to score")
    scores = score_pairs(pairs, endpoint)
    return {endpoint.name: sum(scores.values()) / len(scores)}
