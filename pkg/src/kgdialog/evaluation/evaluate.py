"""Split-level evaluation: perplexity, n-gram F1 and selection accuracy.

The test-time pipeline selects knowledge by prior argmax and advances the
dialogue state with the gold response (it is available on evaluation data).
Perplexity defaults to conditioning on the predicted knowledge; a config
switch selects gold-knowledge conditioning instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ..corpus.data import Episode
from ..corpus.vocab import Vocab
from ..model.pipeline import InferenceEngine
from ..model.state import ModelState
from .metrics import bigram_f1, unigram_f1

PER_TURN_BUCKETS = 5  # appendix-style layout: 1st..4th plus a 5th+ bucket


@dataclass
class EvalReport:
    ppl: float
    r1: float
    r2: float
    accuracy: float | None
    per_turn_accuracy: list[float | None]
    split: str = ""
    n_episodes: int = 0
    n_turns: int = 0

    def to_json(self) -> str:
        obj = {
            "split": self.split,
            "n_episodes": self.n_episodes,
            "n_turns": self.n_turns,
            "ppl": self.ppl,
            "r1": self.r1,
            "r2": self.r2,
            "accuracy": self.accuracy,
            "per_turn_accuracy": self.per_turn_accuracy,
        }
        return json.dumps(obj, indent=2, sort_keys=True)

    def to_table(self) -> str:
        def pct(v):
            return "-" if v is None else f"{100.0 * v:.1f}"

        lines = [
            f"split            {self.split or '-'}",
            f"episodes         {self.n_episodes}",
            f"turns            {self.n_turns}",
            f"ppl              {self.ppl:.2f}",
            f"r1               {pct(self.r1)}",
            f"r2               {pct(self.r2)}",
            f"accuracy         {pct(self.accuracy)}",
        ]
        for i, v in enumerate(self.per_turn_accuracy, start=1):
            tag = f"{i}th" if i < PER_TURN_BUCKETS else f"{PER_TURN_BUCKETS}th+"
            lines.append(f"acc turn {tag:<7} {pct(v)}")
        return "\n".join(lines)


def _walk_split(state: ModelState, vocab: Vocab, episodes: list[Episode],
                want_nll: bool, want_generation: bool, gold_knowledge: bool = False):
    """Run the test-time pipeline over every episode, yielding per-turn info."""
    engine = InferenceEngine(state, vocab)
    for ep in episodes:
        carry = engine.new_dialog()
        for turn in ep.turns:
            override = turn.gold if (gold_knowledge and turn.gold is not None) else None
            result, carry = engine.step(
                carry,
                turn.apprentice,
                turn.pool.sentences,
                gold_y_tokens=turn.wizard,
                generate_response=want_generation,
                nll_gold_y=want_nll,
                knowledge_override=override,
            )
            yield ep, turn, result


def perplexity(state: ModelState, episodes: list[Episode], vocab: Vocab,
               knowledge: str | None = None) -> float:
    """exp(mean per-token NLL) with teacher forcing; smoothing off, PAD free."""
    if knowledge is None:
        knowledge = state.config.ppl_knowledge
    total_nll = 0.0
    total_tokens = 0
    for _, _, result in _walk_split(state, vocab, episodes, want_nll=True,
                                    want_generation=False,
                                    gold_knowledge=(knowledge == "gold")):
        total_nll += sum(result.token_nll)
        total_tokens += len(result.token_nll)
    if total_tokens == 0:
        raise ValueError("no tokens evaluated")
    return math.exp(total_nll / total_tokens)


def selection_accuracy(state: ModelState, episodes: list[Episode],
                       vocab: Vocab) -> tuple[float, list[float | None]]:
    """Prior-argmax accuracy; a prediction matching any gold index counts.

    Unlabeled turns are excluded from the denominator. The per-turn list
    buckets turns 1..4 individually and 5-and-later together.
    """
    hits = [0] * PER_TURN_BUCKETS
    counts = [0] * PER_TURN_BUCKETS
    for _, turn, result in _walk_split(state, vocab, episodes,
                                       want_nll=False, want_generation=False):
        if not turn.labeled:
            continue
        bucket = min(result.turn, PER_TURN_BUCKETS) - 1
        counts[bucket] += 1
        if result.selected_index in turn.gold_set():
            hits[bucket] += 1
    total = sum(counts)
    if total == 0:
        raise ValueError("no labeled turns to score")
    per_turn = [h / c if c else None for h, c in zip(hits, counts)]
    return sum(hits) / total, per_turn


def evaluate_split(state: ModelState, episodes: list[Episode], vocab: Vocab,
                   split: str = "", max_len: int | None = None) -> EvalReport:
    """Compose all metrics over one split; greedy generation feeds the F1s."""
    total_nll = 0.0
    total_tokens = 0
    r1_sum = 0.0
    r2_sum = 0.0
    hits = [0] * PER_TURN_BUCKETS
    counts = [0] * PER_TURN_BUCKETS
    n_turns = 0
    gold_ppl = state.config.ppl_knowledge == "gold"
    for _, turn, result in _walk_split(state, vocab, episodes, want_nll=True,
                                       want_generation=True, gold_knowledge=gold_ppl):
        n_turns += 1
        total_nll += sum(result.token_nll)
        total_tokens += len(result.token_nll)
        pred_tokens = vocab.decode(result.response_ids)
        r1_sum += unigram_f1(pred_tokens, turn.references)
        r2_sum += bigram_f1(pred_tokens, turn.references)
        if turn.labeled:
            bucket = min(result.turn, PER_TURN_BUCKETS) - 1
            counts[bucket] += 1
            if result.selected_index in turn.gold_set():
                hits[bucket] += 1
    if total_tokens == 0:
        raise ValueError("no tokens evaluated")
    labeled_total = sum(counts)
    return EvalReport(
        ppl=math.exp(total_nll / total_tokens),
        r1=r1_sum / n_turns,
        r2=r2_sum / n_turns,
        accuracy=(sum(hits) / labeled_total) if labeled_total else None,
        per_turn_accuracy=[h / c if c else None for h, c in zip(hits, counts)],
        split=split,
        n_episodes=len(episodes),
        n_turns=n_turns,
    )
