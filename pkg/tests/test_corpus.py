"""Tokenizer, vocabulary, JSONL ingestion and batching."""

import json

import numpy as np
import pytest

from kgdialog.corpus import (
    BOS, EOS, PAD, UNK,
    CorpusError,
    Episode,
    KnowledgePool,
    Turn,
    build_vocab,
    detokenize,
    encode_episode,
    load_episodes,
    make_batches,
    save_episodes,
    tokenize,
)
from kgdialog.nn import Rng


class TestTokenizer:
    def test_punctuation_split(self):
        assert tokenize("Hello, world!") == ["hello", ",", "world", "!"]

    def test_empty(self):
        assert tokenize("") == []

    def test_idempotent_on_fuzz_strings(self):
        rng = Rng(17)
        alphabet = list("abc XYZ.,!?'0 9-(#)\t\n")
        for trial in range(100):
            n = rng.randint(30)
            s = "".join(alphabet[rng.randint(len(alphabet))] for _ in range(n))
            once = tokenize(s)
            assert tokenize(detokenize(once)) == once


class TestVocab:
    def _episode(self, text):
        pool = KnowledgePool.from_texts(["yyy www"])
        return Episode(topic="t", turns=[Turn(
            apprentice=tuple(tokenize(text)), wizard=("zzz",), pool=pool)])

    def test_frequency_then_lexicographic(self):
        v = build_vocab([self._episode("a b b")], max_size=100)
        assert v.token_to_id["b"] == 4
        # ties at count 1 resolve lexicographically
        assert v.token_to_id["a"] == 5

    def test_specials_fixed(self):
        v = build_vocab([self._episode("x y")], max_size=50)
        assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)
        assert v.id_to_token[:4] == ["<pad>", "<bos>", "<eos>", "<unk>"]

    def test_min_freq_excludes_and_maps_to_unk(self):
        v = build_vocab([self._episode("a b b")], max_size=100, min_freq=2)
        assert "b" in v.token_to_id
        assert "a" not in v.token_to_id
        assert v.encode(["a"]).tolist() == [UNK]

    def test_rebuild_identical(self):
        eps = [self._episode("the cat sat on the mat")]
        v1 = build_vocab(eps, max_size=64)
        v2 = build_vocab(eps, max_size=64)
        assert v1.id_to_token == v2.id_to_token

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            build_vocab([self._episode("a")], max_size=4)


class TestLoader:
    def _write(self, tmp_path, records):
        p = tmp_path / "data.jsonl"
        with p.open("w") as fh:
            for r in records:
                fh.write(json.dumps(r) + "\n")
        return p

    def _record(self, gold=0):
        return {
            "topic": "cats",
            "split": "train",
            "turns": [{
                "x": "tell me about cats",
                "y": "cats are great",
                "pool": ["cats are mammals", "dogs bark"],
                "gold": gold,
                "refs": ["cats are great"],
            }],
        }

    def test_episode_count_reported(self, tmp_path):
        p = self._write(tmp_path, [self._record() for _ in range(7)])
        eps = load_episodes(p, "wow-jsonl")
        assert len(eps) == 7

    def test_sentinel_inserted_and_gold_shifted(self, tmp_path):
        p = self._write(tmp_path, [self._record(gold=1)])
        ep = load_episodes(p)[0]
        turn = ep.turns[0]
        assert turn.pool.sentences[0] == ("no", "passages", "used")
        assert turn.gold == 2
        assert turn.pool.sentences[2] == ("dogs", "bark")

    def test_no_passages_tag_maps_to_sentinel(self, tmp_path):
        p = self._write(tmp_path, [self._record(gold="no_passages_used")])
        ep = load_episodes(p, "holle-jsonl")[0]
        assert ep.turns[0].gold == 0

    def test_missing_gold_is_unlabeled(self, tmp_path):
        p = self._write(tmp_path, [self._record(gold=None)])
        ep = load_episodes(p)[0]
        assert ep.turns[0].gold is None
        assert not ep.turns[0].labeled

    def test_truncated_line_names_line_number(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text(json.dumps(self._record()) + "\n" + '{"topic": "x", "turns": [')
        with pytest.raises(CorpusError, match="line 2"):
            load_episodes(p)

    def test_gold_out_of_range_rejected(self, tmp_path):
        p = self._write(tmp_path, [self._record(gold=5)])
        with pytest.raises(CorpusError, match="out of range"):
            load_episodes(p)

    def test_multi_gold_list(self, tmp_path):
        p = self._write(tmp_path, [self._record(gold=[0, 1])])
        ep = load_episodes(p)[0]
        assert ep.turns[0].gold == 1
        assert ep.turns[0].gold_set() == {1, 2}

    def test_round_trip(self, tmp_path):
        p = self._write(tmp_path, [self._record(gold=1), self._record(gold="no_passages_used")])
        eps = load_episodes(p)
        out = tmp_path / "copy.jsonl"
        save_episodes(eps, out)
        again = load_episodes(out)
        for a, b in zip(eps, again):
            for ta, tb in zip(a.turns, b.turns):
                assert ta.apprentice == tb.apprentice
                assert ta.pool.sentences == tb.pool.sentences
                assert ta.gold == tb.gold


class TestBatching:
    def _episodes(self, n=5, seed=0):
        from kgdialog.corpus import SynthConfig, generate_synthetic
        return generate_synthetic(SynthConfig(n_episodes=n, seed=seed, pool_size=5, turns_per_episode=2))

    def test_batch_size_one_no_cross_episode_padding(self):
        eps = self._episodes(3)
        vocab = build_vocab(eps)
        batches = make_batches(eps, vocab, batch_size=1, seed=0, shuffle=False)
        assert len(batches) == 3
        for batch, ep in zip(batches, eps):
            assert batch.episodes == [ep]
            assert batch.turn_mask.all()

    def test_unbatch_round_trips_token_ids(self):
        eps = self._episodes(6)
        vocab = build_vocab(eps)
        batches = make_batches(eps, vocab, batch_size=4, seed=3)
        seen = 0
        for batch in batches:
            recovered = batch.unbatch()
            for ep, turns in zip(batch.episodes, recovered):
                seen += 1
                ref = encode_episode(ep, vocab)
                assert len(ref) == len(turns)
                for r, t in zip(ref, turns):
                    assert t["x"] == r["x"].tolist()
                    assert t["y"] == r["y"].tolist()
                    assert t["pool"] == [s.tolist() for s in r["pool"]]
                    assert t["gold"] == r["gold"]
        assert seen == 6

    def test_token_counts_preserved(self):
        eps = self._episodes(5)
        vocab = build_vocab(eps)
        batches = make_batches(eps, vocab, batch_size=2, seed=1)
        total_ref = sum(
            len(t["x"]) + len(t["y"]) + sum(len(s) for s in t["pool"])
            for ep in eps for t in encode_episode(ep, vocab)
        )
        total_batched = sum(
            int(b.x_mask.sum() + b.y_mask.sum() + b.pool_token_mask.sum())
            for b in batches
        )
        assert total_ref == total_batched

    def test_every_padded_position_masked(self):
        eps = self._episodes(4)
        vocab = build_vocab(eps)
        for batch in make_batches(eps, vocab, batch_size=4, seed=2):
            assert (batch.x_ids[~batch.x_mask] == PAD).all()
            assert (batch.y_ids[~batch.y_mask] == PAD).all()
            assert (batch.pool_ids[~batch.pool_token_mask] == PAD).all()

    def test_shuffle_deterministic_per_seed_epoch(self):
        eps = self._episodes(8)
        vocab = build_vocab(eps)
        a = make_batches(eps, vocab, batch_size=3, seed=5, epoch=1)
        b = make_batches(eps, vocab, batch_size=3, seed=5, epoch=1)
        c = make_batches(eps, vocab, batch_size=3, seed=5, epoch=2)
        order = lambda bs: [ep.turns[0].apprentice for b_ in bs for ep in b_.episodes]
        assert order(a) == order(b)
        assert order(a) != order(c)
