"""Synthetic dialogue generator.

Builds desk-scale corpora where knowledge selection is controllable:
``multimodality`` fixes how many pool sentences are consistent with each
context, and ``history_gold`` makes the gold sequence depend on which
sentences were already used earlier in the dialogue, so selection history
carries real signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..nn.rng import Rng
from .data import SENTINEL_TOKENS, CorpusError, Episode, KnowledgePool, Turn

FILLER_WORDS = ("well", "so", "um", "please", "right", "okay", "hmm", "really")
ASK_WORDS = ("tell", "about")


@dataclass
class SynthConfig:
    n_episodes: int = 100
    topic_count: int = 6
    turns_per_episode: int = 3
    pool_size: int = 10          # total pool size including the sentinel
    multimodality: int = 1       # sentences consistent with each context
    copy_rate: float = 0.8       # fraction of response content copied from gold
    vocab_size: int = 400        # budget for the generated word inventory
    seed: int = 0
    history_gold: bool = False   # gold at turn t excludes earlier selections
    split: str = "train"
    fillers_per_utterance: int = 2
    response_content: int = 4
    content_words_per_topic: int = 6
    content_per_sentence: int = 2

    def __post_init__(self):
        n_candidates = self.pool_size - 1
        if self.pool_size < 2:
            raise CorpusError("pool_size must leave room beyond the sentinel")
        if not 1 <= self.multimodality <= n_candidates:
            raise CorpusError(
                f"multimodality {self.multimodality} infeasible for {n_candidates} candidate sentences"
            )
        if not 0.0 <= self.copy_rate <= 1.0:
            raise CorpusError("copy_rate must be in [0, 1]")
        if self.history_gold and self.multimodality < self.turns_per_episode:
            raise CorpusError("history_gold needs multimodality >= turns_per_episode")
        if self.content_words_per_topic - self.content_per_sentence < self.response_content:
            raise CorpusError("not enough content words to fill responses")
        if self.content_per_sentence > self.content_words_per_topic:
            raise CorpusError("content_per_sentence exceeds the topic inventory")


def _inventory(cfg: SynthConfig):
    n_candidates = cfg.pool_size - 1
    n_groups = n_candidates // cfg.multimodality
    topics = []
    total = len(FILLER_WORDS) + len(ASK_WORDS) + len(SENTINEL_TOKENS)
    for t in range(cfg.topic_count):
        inv = {
            "key": f"topic{t}",
            "groups": [f"grp{t}x{g}" for g in range(n_groups)],
            "facts": [f"fact{t}x{j}" for j in range(n_candidates)],
            "content": [f"word{t}x{c}" for c in range(cfg.content_words_per_topic)],
        }
        total += 1 + len(inv["groups"]) + len(inv["facts"]) + len(inv["content"])
        topics.append(inv)
    if total > cfg.vocab_size:
        raise CorpusError(f"vocab_size {cfg.vocab_size} too small for inventory of {total}")
    return topics


def consistency_cue(turn: Turn) -> str | None:
    """The cue token x shares with its consistent pool sentences.

    Group cues take precedence: in history mode the first turn carries an
    extra fact token identifying the walk start, but consistency is still
    defined by the group.
    """
    grp = [t for t in turn.apprentice if t.startswith("grp")]
    if grp:
        return grp[0]
    fact = [t for t in turn.apprentice if t.startswith("fact")]
    return fact[0] if fact else None


def consistent_sentences(turn: Turn) -> list[int]:
    """Pool indices sharing the context cue (sentinel excluded)."""
    cue = consistency_cue(turn)
    if cue is None:
        return []
    return [i for i, s in enumerate(turn.pool.sentences) if i > 0 and cue in s]


def generate_synthetic(cfg: SynthConfig) -> list[Episode]:
    """Deterministic per seed; see SynthConfig for the construction knobs."""
    topics = _inventory(cfg)
    rng = Rng(cfg.seed)
    n_candidates = cfg.pool_size - 1
    m = cfg.multimodality
    n_groups = n_candidates // m
    episodes = []
    for _ in range(cfg.n_episodes):
        inv = topics[rng.randint(cfg.topic_count)]
        sentences: list[tuple[str, ...]] = [SENTINEL_TOKENS]
        for j in range(n_candidates):
            toks = [inv["key"]]
            if m > 1 and j // m < n_groups:
                toks.append(inv["groups"][j // m])
            toks.append(inv["facts"][j])
            toks.extend(rng.choice(inv["content"], k=cfg.content_per_sentence, replace=False))
            sentences.append(tuple(toks))
        pool = KnowledgePool(sentences=list(sentences))

        if cfg.history_gold:
            fixed_group = rng.randint(n_groups)
            members = [fixed_group * m + j for j in range(m)]
            start = rng.randint(m)

        turns = []
        for t in range(cfg.turns_per_episode):
            if m == 1:
                cand = rng.randint(n_candidates)
                cue_tokens = [inv["facts"][cand]]
            elif cfg.history_gold:
                cand = members[(start + t) % m]
                cue_tokens = [inv["groups"][fixed_group]]
                if t == 0:
                    # the opening request quotes the first gold sentence
                    cue_tokens += list(sentences[cand + 1])
                else:
                    # later requests quote unrelated sentences: chatter that
                    # interferes with remembering the opening quote through
                    # the dialogue state, but not with the selection history
                    others = [j for j in range(n_candidates)
                              if j // m != fixed_group and j // m < n_groups]
                    for quoted in rng.choice(others, k=min(2, len(others)), replace=False):
                        cue_tokens += list(sentences[quoted + 1])
            else:
                group = rng.randint(n_groups)
                cand = group * m + rng.randint(m)
                cue_tokens = [inv["groups"][group]]
            gold = cand + 1  # sentinel shift
            gold_tokens = sentences[gold]

            x = list(ASK_WORDS) + [inv["key"]] + cue_tokens
            x += rng.choice(list(FILLER_WORDS), k=cfg.fillers_per_utterance, replace=False)

            n_copy = math.ceil(cfg.copy_rate * cfg.response_content)
            copied = rng.choice(list(gold_tokens), k=min(n_copy, len(gold_tokens)), replace=False)
            others_pool = [w for w in inv["content"] if w not in gold_tokens]
            others = rng.choice(others_pool, k=cfg.response_content - len(copied), replace=False)
            y = [FILLER_WORDS[rng.randint(len(FILLER_WORDS))]] + rng.shuffle(list(copied) + list(others))

            turns.append(Turn(
                apprentice=tuple(x),
                wizard=tuple(y),
                pool=KnowledgePool(sentences=list(pool.sentences)),
                gold=gold,
            ))
        episodes.append(Episode(topic=inv["key"], turns=turns, split=cfg.split))
    return episodes
