"""In-memory chat sessions over a loaded model.

Sessions are apprentice-initiated: the model responds to each posted
message with prior-argmax knowledge selection and greedy decoding, then
advances its dialogue state with the generated response. The pool is fixed
per session (no retrieval); sessions expire after an idle timeout.
Parameters are shared read-only; requests within one session serialize on
a per-session lock.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from ..corpus.data import Episode, KnowledgePool
from ..corpus.tokenizer import detokenize, tokenize
from ..corpus.vocab import Vocab
from ..model.pipeline import DialogCarry, InferenceEngine
from ..model.state import ModelState

DEFAULT_IDLE_SECONDS = 30 * 60


class SessionError(Exception):
    def __init__(self, message: str, status: int = 400):
        super().__init__(message)
        self.status = status


@dataclass
class MessageRecord:
    turn: int
    apprentice: str
    response: str
    knowledge_index: int
    knowledge_sentence: str
    prior: list[float]

    def to_json(self) -> dict:
        return {
            "turn": self.turn,
            "apprentice": self.apprentice,
            "response": self.response,
            "knowledge_index": self.knowledge_index,
            "knowledge_sentence": self.knowledge_sentence,
            "prior": self.prior,
        }


@dataclass
class Session:
    id: str
    topic: str
    pool: KnowledgePool
    carry: DialogCarry
    created: float
    last_used: float
    transcript: list[MessageRecord] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def pool_texts(self) -> list[str]:
        return [detokenize(list(s)) for s in self.pool.sentences]


class SessionStore:
    def __init__(self, state: ModelState, vocab: Vocab,
                 topic_pools: dict[str, KnowledgePool] | None = None,
                 idle_seconds: float = DEFAULT_IDLE_SECONDS,
                 max_len: int | None = None):
        self.engine = InferenceEngine(state, vocab)
        self.topic_pools = topic_pools or {}
        self.idle_seconds = idle_seconds
        self.max_len = max_len
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    @classmethod
    def topic_pools_from_episodes(cls, episodes: list[Episode]) -> dict[str, KnowledgePool]:
        pools = {}
        for ep in episodes:
            pools.setdefault(ep.topic, ep.turns[0].pool)
        return pools

    def _expire(self, now: float):
        dead = [sid for sid, s in self._sessions.items()
                if now - s.last_used > self.idle_seconds]
        for sid in dead:
            del self._sessions[sid]

    def create_session(self, topic: str | None = None,
                       pool_texts: list[str] | None = None) -> Session:
        if pool_texts:
            pool = KnowledgePool.from_texts(pool_texts)
            topic = topic or "custom"
        elif topic is not None and topic in self.topic_pools:
            pool = self.topic_pools[topic]
        else:
            raise SessionError(f"unknown topic {topic!r} and no pool given", status=404)
        now = time.time()
        session = Session(
            id=uuid.uuid4().hex,
            topic=topic,
            pool=pool,
            carry=self.engine.new_dialog(),
            created=now,
            last_used=now,
        )
        with self._lock:
            self._expire(now)
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        now = time.time()
        with self._lock:
            self._expire(now)
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session {session_id!r}", status=404)
        return session

    def delete(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise SessionError(f"unknown session {session_id!r}", status=404)
            del self._sessions[session_id]

    def post_message(self, session_id: str, text: str) -> MessageRecord:
        if not text or not text.strip():
            raise SessionError("message text must not be empty", status=400)
        session = self.get(session_id)
        with session.lock:
            tokens = tokenize(text)
            result, carry = self.engine.step(
                session.carry, tokens, session.pool.sentences,
                generate_response=True, max_len=self.max_len,
            )
            session.carry = carry
            record = MessageRecord(
                turn=result.turn,
                apprentice=detokenize(tokens),
                response=self.engine.response_text(result),
                knowledge_index=result.selected_index,
                knowledge_sentence=detokenize(list(session.pool.sentences[result.selected_index])),
                prior=[float(v) for v in result.prior],
            )
            session.transcript.append(record)
            session.last_used = time.time()
        return record

    def transcript(self, session_id: str) -> list[MessageRecord]:
        session = self.get(session_id)
        with session.lock:
            return list(session.transcript)
