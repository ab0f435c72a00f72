"""Command line interface: data prep, training, evaluation, chat, serving."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    CorpusError,
    SynthConfig,
    build_vocab,
    generate_synthetic,
    load_episodes,
    save_episodes,
)
from .corpus.vocab import Vocab
from .evaluation import evaluate_split
from .model import ModelConfig
from .service import SessionError, SessionStore, make_app
from .trainer import CheckpointError, TrainConfig, load_checkpoint, save_checkpoint, train


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--topics", type=int, default=6)
    p.add_argument("--turns", type=int, default=3)
    p.add_argument("--pool-size", type=int, default=10)
    p.add_argument("--multimodality", type=int, default=1)
    p.add_argument("--copy-rate", type=float, default=0.8)
    p.add_argument("--history-gold", action="store_true")
    p.add_argument("--split", default="train")
    _add_seed(p)

    p = sub.add_parser("prepare", help="validate a corpus and build a vocabulary")
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="wow-jsonl")
    p.add_argument("--out", help="where to write the vocabulary JSON")
    p.add_argument("--max-vocab", type=int, default=10_000)
    p.add_argument("--min-freq", type=int, default=1)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="wow-jsonl")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--knowledge-weight", type=float, default=1.0)
    p.add_argument("--labeled-fraction", type=float, default=1.0)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--decoder-blocks", type=int, default=2)
    p.add_argument("--sentence-encoder", default="bigru", choices=["bigru", "attention"])
    p.add_argument("--ablate-history", action="store_true")
    p.add_argument("--max-vocab", type=int, default=10_000)
    p.add_argument("--quiet", action="store_true")
    _add_seed(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="wow-jsonl")
    p.add_argument("--split", default="")
    p.add_argument("--json", dest="json_out", help="also write the report as JSON")
    p.add_argument("--max-len", type=int, default=None)

    p = sub.add_parser("chat", help="terminal chat with a trained model")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", help="corpus supplying topic pools")
    p.add_argument("--format", default="wow-jsonl")
    p.add_argument("--topic")
    p.add_argument("--pool", help="inline pool: sentences separated by ' || '")
    p.add_argument("--max-len", type=int, default=None)

    p = sub.add_parser("serve", help="run the HTTP chat service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", help="corpus supplying topic pools")
    p.add_argument("--format", default="wow-jsonl")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--max-len", type=int, default=None)

    return parser


def _cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_episodes=args.episodes, topic_count=args.topics,
        turns_per_episode=args.turns, pool_size=args.pool_size,
        multimodality=args.multimodality, copy_rate=args.copy_rate,
        history_gold=args.history_gold, seed=args.seed, split=args.split,
    )
    episodes = generate_synthetic(cfg)
    save_episodes(episodes, args.out)
    print(f"wrote {len(episodes)} episodes to {args.out}")
    return 0


def _cmd_prepare(args) -> int:
    episodes = load_episodes(args.data, args.format)
    vocab = build_vocab(episodes, max_size=args.max_vocab, min_freq=args.min_freq)
    turns = sum(len(ep.turns) for ep in episodes)
    labeled = sum(t.labeled for ep in episodes for t in ep.turns)
    pool_sizes = [len(t.pool) for ep in episodes for t in ep.turns]
    print(f"episodes         {len(episodes)}")
    print(f"turns            {turns}")
    print(f"labeled turns    {labeled}")
    print(f"mean pool size   {sum(pool_sizes) / len(pool_sizes):.2f}")
    print(f"vocabulary       {vocab.size}")
    if args.out:
        Path(args.out).write_text(json.dumps(vocab.to_json()))
        print(f"wrote vocabulary to {args.out}")
    return 0


def _cmd_train(args) -> int:
    episodes = load_episodes(args.data, args.format)
    vocab = build_vocab(episodes, max_size=args.max_vocab)
    model_cfg = ModelConfig(
        d_model=args.d_model, heads=args.heads, decoder_blocks=args.decoder_blocks,
        sentence_encoder=args.sentence_encoder, history_ablation=args.ablate_history,
    )
    train_cfg = TrainConfig(
        lr=args.lr, tau=args.tau, knowledge_weight=args.knowledge_weight,
        epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
        labeled_fraction=args.labeled_fraction,
    )
    log = None if args.quiet else print
    state, adam, _ = train(episodes, model_cfg, train_cfg, vocab, log=log)
    save_checkpoint(state, train_cfg, vocab, args.out, optimizer=adam)
    print(f"wrote checkpoint to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    state, _, vocab, _ = load_checkpoint(args.ckpt)
    episodes = load_episodes(args.data, args.format)
    report = evaluate_split(state, episodes, vocab, split=args.split, max_len=args.max_len)
    print(report.to_table())
    if args.json_out:
        Path(args.json_out).write_text(report.to_json())
    return 0


def _make_store(args) -> SessionStore:
    state, _, vocab, _ = load_checkpoint(args.ckpt)
    pools = {}
    if args.data:
        episodes = load_episodes(args.data, args.format)
        pools = SessionStore.topic_pools_from_episodes(episodes)
    return SessionStore(state, vocab, topic_pools=pools, max_len=args.max_len)


def _cmd_chat(args) -> int:
    store = _make_store(args)
    pool_texts = args.pool.split(" || ") if args.pool else None
    session = store.create_session(topic=args.topic, pool_texts=pool_texts)
    print(f"topic: {session.topic}")
    print("knowledge pool:")
    for i, text in enumerate(session.pool_texts()):
        print(f"  [{i}] {text}")
    print("type a message (empty line or EOF to quit)")
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            break
        if not line:
            break
        record = store.post_message(session.id, line)
        print(f"bot> {record.response}")
        print(f"     [knowledge {record.knowledge_index}: {record.knowledge_sentence} "
              f"p={record.prior[record.knowledge_index]:.2f}]")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    app = make_app(_make_store(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "prepare": _cmd_prepare,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "chat": _cmd_chat,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CorpusError, CheckpointError, SessionError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
