"""Two-tier per-scope memory: a bounded short-term queue that overflows
into a vector-searchable long-term store.

Each session and each NPC gets its own scope, so knowledge never bleeds
between characters. Records pushed out of the short-term queue are
embedded and kept in an exact-search long-term index; at game scale
(thousands of records at most) exact cosine search is cheap and lets the
brute-force oracle in the test suite check rankings exactly.
"""

from __future__ import annotations

import hashlib
import logging
import re
import threading
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

import numpy as np

if TYPE_CHECKING:
    from .gateway import Gateway
    from .prompts import TemplateRegistry

logger = logging.getLogger(__name__)

SCOPE_KINDS = ("session_persistent", "npc")

RECORD_KINDS = ("conversation", "action", "event", "generated_asset")

SUMMARIZE_TEMPLATE_ID = "summarize_memory"


@dataclass(frozen=True)
class MemoryScope:
    """Key for one memory instance. Scopes compare equal only on all fields."""

    kind: str
    session_id: str
    npc_id: str | None = None

    def __post_init__(self):
        if self.kind not in SCOPE_KINDS:
            raise ValueError(f"scope kind must be one of {SCOPE_KINDS}, got {self.kind!r}")
        if self.kind == "npc" and not self.npc_id:
            raise ValueError("npc scope requires an npc_id")
        if self.kind == "session_persistent" and self.npc_id is not None:
            raise ValueError("session scope must not carry an npc_id")

    @classmethod
    def session(cls, session_id: str) -> "MemoryScope":
        return cls(kind="session_persistent", session_id=session_id)

    @classmethod
    def npc(cls, session_id: str, npc_id: str) -> "MemoryScope":
        return cls(kind="npc", session_id=session_id, npc_id=npc_id)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "session_id": self.session_id, "npc_id": self.npc_id}

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryScope":
        return cls(kind=data["kind"], session_id=data["session_id"], npc_id=data.get("npc_id"))


@dataclass(eq=False)
class MemoryRecord:
    """One remembered utterance, action, event, or generated asset.

    ``embedding`` is set exactly when the record lives in the long-term
    store; ``seq`` is the store-wide insertion counter used for
    chronological ordering and tie-breaking.
    """

    id: str
    scope: MemoryScope
    kind: str
    text: str
    turn_index: int
    seq: int
    embedding: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scope": self.scope.to_dict(),
            "kind": self.kind,
            "text": self.text,
            "turn_index": self.turn_index,
            "seq": self.seq,
            "embedding": None if self.embedding is None else [float(x) for x in self.embedding],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryRecord":
        embedding = data.get("embedding")
        return cls(
            id=data["id"],
            scope=MemoryScope.from_dict(data["scope"]),
            kind=data["kind"],
            text=data["text"],
            turn_index=int(data["turn_index"]),
            seq=int(data["seq"]),
            embedding=None if embedding is None else np.asarray(embedding, dtype=np.float64),
        )


@dataclass(frozen=True)
class MemoryConfig:
    short_term_capacity: int = 20
    recall_top_k: int = 5
    summary_max_chars: int = 1200
    embedding_dim: int = 256

    def __post_init__(self):
        for name in ("short_term_capacity", "recall_top_k", "summary_max_chars", "embedding_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "short_term_capacity": self.short_term_capacity,
            "recall_top_k": self.recall_top_k,
            "summary_max_chars": self.summary_max_chars,
            "embedding_dim": self.embedding_dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MemoryConfig":
        return cls(**{k: int(v) for k, v in data.items()})


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic token-hash bag-of-words embedder (L2-normalized).

    Stands in for an endpoint-backed embedding model; same contract,
    no network, stable across processes (hashing via blake2, not the
    salted builtin hash).
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        tokens = re.findall(r"[a-z0-9']+", text.lower())
        if not tokens:
            # Non-empty text must map to a non-zero vector even if it has
            # no word characters.
            tokens = [text] if text else []
        for token in tokens:
            vec[self._bucket(token)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0.0:
            vec /= norm
        return vec


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def summarize(
    records: list[MemoryRecord],
    max_chars: int,
    gateway: "Gateway",
    templates: "TemplateRegistry | None" = None,
) -> str:
    """Condense records via the summarization prompt, bounded to ``max_chars``.

    A gateway failure is absorbed: the fallback is a newest-first
    concatenation of the raw texts, truncated the same way.
    """
    if not records:
        raise ValueError("summarize requires at least one record")
    from .prompts import default_templates, render

    registry = templates or default_templates()
    ordered = sorted(records, key=lambda r: r.seq)
    lines = [f"[{r.kind} @turn {r.turn_index}] {r.text}" for r in ordered]
    prompt = render(
        registry.get(SUMMARIZE_TEMPLATE_ID),
        criteria={"record_count": len(ordered)},
        context="\n".join(lines),
    )
    from .gateway import user_message

    try:
        completion = gateway.complete([user_message(prompt.text)])
    except Exception as exc:
        logger.warning("summarizer gateway failed, falling back to concatenation: %s", exc)
        newest_first = sorted(records, key=lambda r: r.seq, reverse=True)
        return "\n".join(r.text for r in newest_first)[:max_chars]
    from .prompts import text_reply

    return text_reply(completion, "summary")[:max_chars]


class MemoryStore:
    """All memory scopes for one session: short-term queues plus long-term indexes.

    Writes to a scope are serialized by a per-scope lock; distinct scopes
    never contend.
    """

    def __init__(self, config: MemoryConfig | None = None, embedder: Embedder | None = None):
        self.config = config or MemoryConfig()
        self.embedder = embedder or HashEmbedder(self.config.embedding_dim)
        self._short: dict[MemoryScope, deque[MemoryRecord]] = {}
        self._long: dict[MemoryScope, list[MemoryRecord]] = {}
        self._locks: dict[MemoryScope, threading.RLock] = {}
        self._last_turn: dict[MemoryScope, int] = {}
        self._registry_lock = threading.Lock()
        self._seq = 0

    def _lock_for(self, scope: MemoryScope) -> threading.RLock:
        with self._registry_lock:
            if scope not in self._locks:
                self._locks[scope] = threading.RLock()
                self._short[scope] = deque()
                self._long[scope] = []
            return self._locks[scope]

    def ensure_scope(self, scope: MemoryScope) -> None:
        self._lock_for(scope)

    def scopes(self) -> list[MemoryScope]:
        with self._registry_lock:
            return list(self._locks)

    def record(self, scope: MemoryScope, kind: str, text: str, turn_index: int) -> MemoryRecord:
        """Append to the scope's short-term queue, spilling FIFO into long-term."""
        if kind not in RECORD_KINDS:
            raise ValueError(f"record kind must be one of {RECORD_KINDS}, got {kind!r}")
        if not text:
            raise ValueError("record text must be non-empty")
        if turn_index < 0:
            raise ValueError("turn_index must be non-negative")
        lock = self._lock_for(scope)
        with lock:
            last = self._last_turn.get(scope, 0)
            if turn_index < last:
                raise ValueError(f"turn_index must be monotone within a scope ({turn_index} < {last})")
            self._last_turn[scope] = turn_index
            with self._registry_lock:
                self._seq += 1
                seq = self._seq
            rec = MemoryRecord(
                id=f"mem_{seq}", scope=scope, kind=kind, text=text, turn_index=turn_index, seq=seq
            )
            queue = self._short[scope]
            queue.append(rec)
            while len(queue) > self.config.short_term_capacity:
                evicted = queue.popleft()
                evicted.embedding = self.embedder.embed(evicted.text)
                self._long[scope].append(evicted)
            return rec

    def recall_short(self, scope: MemoryScope, limit: int | None = None) -> list[MemoryRecord]:
        """Newest-first slice of the scope's short-term queue; [] for unknown scopes."""
        with self._registry_lock:
            queue = self._short.get(scope)
            if queue is None:
                return []
            lock = self._locks[scope]
        with lock:
            newest_first = list(reversed(queue))
        if limit is not None:
            newest_first = newest_first[: max(limit, 0)]
        return newest_first

    def recall_long(self, scope: MemoryScope, query: str, k: int) -> list[tuple[MemoryRecord, float]]:
        """Exact top-k cosine search over the scope's long-term store.

        Descending similarity, ties broken by earlier insertion. The
        per-record dot product keeps the arithmetic identical to a
        brute-force oracle; store sizes stay small enough that this is
        never the bottleneck.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        with self._registry_lock:
            store = self._long.get(scope)
            if not store:
                return []
            lock = self._locks[scope]
        with lock:
            snapshot = list(store)
        query_vec = self.embedder.embed(query)
        scored = [
            (cosine_similarity(rec.embedding, query_vec), idx, rec)
            for idx, rec in enumerate(snapshot)
        ]
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [(rec, sim) for sim, _, rec in scored[:k]]

    def long_term_records(self, scope: MemoryScope) -> list[MemoryRecord]:
        with self._registry_lock:
            return list(self._long.get(scope, []))

    def summarize(self, records, max_chars, gateway, templates=None) -> str:
        return summarize(records, max_chars, gateway, templates)

    def context_pack(
        self,
        scope: MemoryScope,
        query: str,
        gateway: "Gateway",
        templates: "TemplateRegistry | None" = None,
    ) -> str:
        """Summarize short-term plus top-k long-term recalls into a bounded blob."""
        shorts = self.recall_short(scope)
        longs = [rec for rec, _ in self.recall_long(scope, query, self.config.recall_top_k)] if self.long_term_records(scope) else []
        combined = sorted(shorts + longs, key=lambda r: r.seq)
        if not combined:
            return ""
        return summarize(combined, self.config.summary_max_chars, gateway, templates)

    # --- persistence ---

    def to_dict(self) -> dict:
        with self._registry_lock:
            scopes = list(self._locks)
        payload: list[dict] = []
        for scope in scopes:
            with self._locks[scope]:
                payload.append(
                    {
                        "scope": scope.to_dict(),
                        "short_term": [r.to_dict() for r in self._short[scope]],
                        "long_term": [r.to_dict() for r in self._long[scope]],
                        "last_turn": self._last_turn.get(scope, 0),
                    }
                )
        return {"config": self.config.to_dict(), "seq": self._seq, "scopes": payload}

    @classmethod
    def from_dict(cls, data: dict, embedder: Embedder | None = None) -> "MemoryStore":
        store = cls(config=MemoryConfig.from_dict(data["config"]), embedder=embedder)
        store._seq = int(data.get("seq", 0))
        for entry in data.get("scopes", []):
            scope = MemoryScope.from_dict(entry["scope"])
            store.ensure_scope(scope)
            store._short[scope] = deque(MemoryRecord.from_dict(r) for r in entry.get("short_term", []))
            store._long[scope] = [MemoryRecord.from_dict(r) for r in entry.get("long_term", [])]
            store._last_turn[scope] = int(entry.get("last_turn", 0))
        return store
