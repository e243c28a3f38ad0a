"""Command-line interface (train / segment / eval / generate) and the
binary model file format.

Model files start with the magic line "CWSD1", then text header lines
(vocab size, embedding dim, kernel:filter pairs, tag count, mask flag),
the vocabulary one character per line (reserved PAD/UNK indices implicit),
and finally every parameter array as little-endian float64 in a fixed
order: embedding, filters by ascending kernel size, filter biases by
ascending kernel size, projection weights, projection bias, transition
matrix (row-major), start scores, classifier weights, classifier bias.

Exit statuses: 0 success, 1 usage, 2 I/O, 3 data/format.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

import numpy as np

from . import dictgen, evaluate, trainer
from .crf import Transitions
from .dictgen import Dictionary, DictionaryEncodingError, GenerationError
from .encoder import (
    NUM_RESERVED,
    EncoderParams,
    Vocab,
    apply_pretrained,
    load_word2vec_text,
)
from .model import Model, filter_split, init_model, segment
from .tagcodec import NUM_TAGS, labeled_from_words
from .wordclf import ClfHead

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3

MODEL_MAGIC = "CWSD1"


class UsageError(Exception):
    """Bad flags or flag combinations; exits with status 1."""


class DataError(ValueError):
    """Malformed or unusable input data; exits with status 3."""


class ModelFormatError(ValueError):
    """A model file that fails validation; exits with status 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# model serialization


def _payload_arrays(model: Model):
    enc = model.encoder
    yield enc.embedding
    for k in enc.kernel_sizes:
        yield enc.conv_w[k]
    for k in enc.kernel_sizes:
        yield enc.conv_b[k]
    yield enc.proj_w
    yield enc.proj_b
    yield model.transitions.matrix
    yield model.transitions.start
    yield model.head.u
    yield model.head.c


def save_model(model: Model, path) -> None:
    enc = model.encoder
    kernels = " ".join(f"{k}:{enc.conv_w[k].shape[0]}" for k in enc.kernel_sizes)
    header = [
        MODEL_MAGIC,
        f"vocab {len(model.vocab)}",
        f"dim {enc.embed_dim}",
        f"kernels {kernels}",
        f"tags {enc.num_tags}",
        f"mask {'on' if model.transitions.masked else 'off'}",
    ]
    for ch in model.vocab.chars:
        if len(ch) != 1 or ch in "\r\n":
            raise ModelFormatError(f"vocab character {ch!r} cannot be serialized")
        header.append(ch)
    blob = bytearray(("\n".join(header) + "\n").encode("utf-8"))
    for arr in _payload_arrays(model):
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def _header_int(line: str, key: str, offset: int) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise ModelFormatError(
            f"expected '{key} <n>' at offset {offset}, got {line!r}"
        )
    try:
        value = int(parts[1])
    except ValueError:
        raise ModelFormatError(
            f"non-integer {key} at offset {offset}: {parts[1]!r}"
        ) from None
    if value < 1:
        raise ModelFormatError(f"{key} must be positive, got {value}")
    return value


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    pos = 0

    def text_line() -> tuple[str, int]:
        nonlocal pos
        start = pos
        end = blob.find(b"\n", pos)
        if end < 0:
            raise ModelFormatError(f"truncated header at offset {start}")
        pos = end + 1
        try:
            return blob[start:end].decode("utf-8"), start
        except UnicodeDecodeError:
            raise ModelFormatError(f"invalid UTF-8 at offset {start}") from None

    magic, _ = text_line()
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    line, off = text_line()
    vocab_size = _header_int(line, "vocab", off)
    line, off = text_line()
    dim = _header_int(line, "dim", off)
    line, off = text_line()
    parts = line.split()
    if not parts or parts[0] != "kernels" or len(parts) < 2:
        raise ModelFormatError(f"expected kernel spec at offset {off}, got {line!r}")
    filter_counts: dict[int, int] = {}
    for token in parts[1:]:
        try:
            k_text, n_text = token.split(":")
            k, n = int(k_text), int(n_text)
        except ValueError:
            raise ModelFormatError(f"bad kernel token {token!r}") from None
        if k < 1 or n < 1 or k in filter_counts:
            raise ModelFormatError(f"bad kernel token {token!r}")
        filter_counts[k] = n
    line, off = text_line()
    tags = _header_int(line, "tags", off)
    if tags != NUM_TAGS:
        raise ModelFormatError(f"model declares {tags} tags, this build uses {NUM_TAGS}")
    line, off = text_line()
    if line not in ("mask on", "mask off"):
        raise ModelFormatError(f"expected 'mask on|off' at offset {off}, got {line!r}")
    masked = line == "mask on"

    if vocab_size < NUM_RESERVED:
        raise ModelFormatError(f"vocab size {vocab_size} below the reserved count")
    vocab = Vocab()
    for _ in range(vocab_size - NUM_RESERVED):
        ch, off = text_line()
        if len(ch) != 1:
            raise ModelFormatError(
                f"vocab line at offset {off} is not a single character: {ch!r}"
            )
        vocab.add(ch)
    if len(vocab) != vocab_size:
        raise ModelFormatError("duplicate characters in vocab listing")

    kernel_sizes = sorted(filter_counts)
    hidden = sum(filter_counts.values())
    shapes = [(vocab_size, dim)]
    shapes += [(filter_counts[k], k * dim) for k in kernel_sizes]
    shapes += [(filter_counts[k],) for k in kernel_sizes]
    shapes += [(hidden, NUM_TAGS), (NUM_TAGS,), (NUM_TAGS, NUM_TAGS), (NUM_TAGS,),
               (hidden,), (1,)]
    expected = sum(int(np.prod(s)) for s in shapes) * 8
    payload = blob[pos:]
    if len(payload) != expected:
        raise ModelFormatError(
            f"payload length mismatch at offset {pos}: expected {expected} "
            f"bytes, found {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    arrays = []
    cursor = 0
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(flat[cursor:cursor + n].reshape(shape).astype(np.float64))
        cursor += n
    it = iter(arrays)
    embedding = next(it)
    conv_w = {k: next(it) for k in kernel_sizes}
    conv_b = {k: next(it) for k in kernel_sizes}
    encoder = EncoderParams(embedding, conv_w, conv_b, next(it), next(it))
    transitions = Transitions(next(it), next(it), masked)
    head = ClfHead(next(it), next(it))
    return Model(vocab, encoder, transitions, head)


# ---------------------------------------------------------------------------
# commands


def _default_seed() -> int:
    raw = os.environ.get("CWS_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"CWS_SEED is not an integer: {raw!r}") from None


def _resolve_seed(args) -> int:
    return args.seed if args.seed is not None else _default_seed()


def _parse_kernels(spec: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(tok) for tok in spec.split(","))
    except ValueError:
        raise UsageError(f"bad --kernels value {spec!r}") from None
    if not sizes or any(k < 1 for k in sizes) or len(set(sizes)) != len(sizes):
        raise UsageError(f"bad --kernels value {spec!r}")
    return sizes


def _load_dictionaries(paths: Sequence[str], internal_corpus=None) -> Dictionary:
    combined = Dictionary()
    for path in paths:
        combined = combined.union(dictgen.load_dictionary(path))
    if internal_corpus is not None:
        combined = combined.union(dictgen.build_internal_dictionary(internal_corpus))
    return combined


def _emit(lines: Sequence[str], out_path) -> None:
    text = "".join(line + "\n" for line in lines)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_train(args) -> int:
    train_words = [s for s in dictgen.read_segmented_corpus(args.train) if s]
    dev_words = [s for s in dictgen.read_segmented_corpus(args.dev) if s]
    if not train_words:
        raise DataError(f"training corpus {args.train} is empty")
    if not dev_words:
        raise DataError(f"development corpus {args.dev} is empty")
    train_data = [labeled_from_words(s) for s in train_words]
    dev_data = [labeled_from_words(s) for s in dev_words]

    seed = _resolve_seed(args)
    init_seed, gen_seed = np.random.SeedSequence(seed).spawn(2)
    kernel_sizes = _parse_kernels(args.kernels)
    try:
        filter_counts = filter_split(args.filters, kernel_sizes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    vocab = Vocab.from_corpus(train_words)
    model = init_model(
        vocab,
        np.random.default_rng(init_seed),
        embed_dim=args.dim,
        filter_counts=filter_counts,
        masked=args.mask == "on",
    )

    dictionary = None
    if args.dicts or args.internal_dict:
        dictionary = _load_dictionaries(
            args.dicts, train_words if args.internal_dict else None
        )

    gen_rng = np.random.default_rng(gen_seed)
    pseudo_data = word_data = None
    if args.mode == "pseudo":
        if not dictionary or len(dictionary) == 0:
            raise UsageError("--mode pseudo requires --dict and/or --internal-dict")
        n_pseudo = args.n_pseudo if args.n_pseudo is not None else len(train_data)
        pseudo_data = dictgen.gen_pseudo_corpus(
            dictionary, n_pseudo, gen_rng, u_min=args.u_min, u_max=args.u_max
        )
    elif args.mode == "multitask":
        if not dictionary or len(dictionary) == 0:
            raise UsageError("--mode multitask requires --dict and/or --internal-dict")
        word_data = dictgen.gen_classification_set(
            dictionary, gen_rng, n_neg=args.nneg, p=args.p_replace
        )

    if args.embeddings:
        dim, vectors = load_word2vec_text(args.embeddings)
        if dim != model.encoder.embed_dim:
            raise UsageError(
                f"--embeddings dimension {dim} does not match --dim {args.dim}"
            )
        apply_pretrained(model.encoder, vocab, vectors)

    config = trainer.TrainConfig(
        mode=args.mode,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        learning_rate=args.lr,
        batch_size=args.batch,
        dropout=args.dropout,
        patience=args.patience,
        max_epochs=args.max_epochs,
        seed=seed,
        pseudo_mix=args.pseudo_mix,
        freeze_embeddings=args.freeze_embeddings,
    )
    report = trainer.train(
        model, train_data, dev_data, config,
        pseudo_data=pseudo_data, word_data=word_data,
    )
    for line in report.lines():
        print(line)
    save_model(model, args.out)
    return EXIT_OK


def cmd_segment(args) -> int:
    model = load_model(args.model)
    lines = []
    with open(args.input, encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.rstrip("\r\n")
            lines.append(" ".join(segment(model, line)) if line else "")
    _emit(lines, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    result = evaluate.score_files(args.gold, args.pred)
    print(evaluate.format_score(result))
    return EXIT_OK


def cmd_generate_pseudo(args) -> int:
    dictionary = _load_dictionaries(args.dicts)
    if len(dictionary) == 0:
        raise UsageError("dictionary is empty")
    rng = np.random.default_rng(_resolve_seed(args))
    sentences = dictgen.gen_pseudo_corpus(
        dictionary, args.count, rng, u_min=args.u_min, u_max=args.u_max
    )
    _emit([" ".join(s.words) for s in sentences], args.out)
    return EXIT_OK


def cmd_generate_clfdata(args) -> int:
    dictionary = _load_dictionaries(args.dicts)
    if len(dictionary) == 0:
        raise UsageError("dictionary is empty")
    rng = np.random.default_rng(_resolve_seed(args))
    samples = dictgen.gen_classification_set(
        dictionary, rng, n_neg=args.nneg, p=args.p_replace
    )
    _emit(
        [f"{'+1' if s.label > 0 else '-1'}\t{s.chars}" for s in samples],
        args.out,
    )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="cwseg", description="CNN-CRF Chinese word segmenter")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a segmentation model")
    t.add_argument("--train", required=True, help="segmented training corpus")
    t.add_argument("--dev", required=True, help="segmented development corpus")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--mode", choices=trainer.MODES, default="baseline")
    t.add_argument("--dict", action="append", default=[], dest="dicts",
                   help="word list file; repeatable, entries are unioned")
    t.add_argument("--internal-dict", action="store_true",
                   help="also use the words of the training corpus as a dictionary")
    t.add_argument("--embeddings", help="pretrained character vectors, word2vec text format")
    t.add_argument("--lambda1", type=float, default=1.0)
    t.add_argument("--lambda2", type=float, default=0.3)
    t.add_argument("--np", type=int, default=None, dest="n_pseudo",
                   help="pseudo sentences to generate (default: training-set size)")
    t.add_argument("--nneg", type=int, default=None,
                   help="negative word samples (default: dictionary size)")
    t.add_argument("--p-replace", type=float, default=0.5)
    t.add_argument("--u-min", type=int, default=3)
    t.add_argument("--u-max", type=int, default=8)
    t.add_argument("--seed", type=int, default=None,
                   help="rng seed (default: $CWS_SEED or 0)")
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--dropout", type=float, default=0.3)
    t.add_argument("--patience", type=int, default=3)
    t.add_argument("--max-epochs", type=int, default=100)
    t.add_argument("--mask", choices=("on", "off"), default="on",
                   help="pin illegal tag transitions to -inf")
    t.add_argument("--dim", type=int, default=200, help="character embedding dimension")
    t.add_argument("--filters", type=int, default=400,
                   help="total conv filters, split evenly over kernel sizes")
    t.add_argument("--kernels", default="2,3,4,5", help="comma-separated kernel sizes")
    t.add_argument("--pseudo-mix", action="store_true",
                   help="mix pseudo sentences into one weighted pool instead of pairing batches")
    t.add_argument("--freeze-embeddings", action="store_true")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("segment", help="segment raw text with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True, help="one unsegmented sentence per line")
    s.add_argument("--out", help="output file (default: stdout)")
    s.set_defaults(func=cmd_segment)

    e = sub.add_parser("eval", help="score a predicted segmentation against gold")
    e.add_argument("--gold", required=True)
    e.add_argument("--pred", required=True)
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("generate", help="emit dictionary-derived data")
    gsub = g.add_subparsers(dest="what", required=True)

    gp = gsub.add_parser("pseudo", help="pseudo labeled sentences")
    gp.add_argument("--dict", action="append", required=True, dest="dicts")
    gp.add_argument("--np", type=int, required=True, dest="count")
    gp.add_argument("--u-min", type=int, default=3)
    gp.add_argument("--u-max", type=int, default=8)
    gp.add_argument("--seed", type=int, default=None)
    gp.add_argument("--out")
    gp.set_defaults(func=cmd_generate_pseudo)

    gc = gsub.add_parser("clfdata", help="word classification samples")
    gc.add_argument("--dict", action="append", required=True, dest="dicts")
    gc.add_argument("--nneg", type=int, default=None)
    gc.add_argument("--p-replace", type=float, default=0.5)
    gc.add_argument("--seed", type=int, default=None)
    gc.add_argument("--out")
    gc.set_defaults(func=cmd_generate_clfdata)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (evaluate.CorpusMismatch, ModelFormatError, DictionaryEncodingError,
            GenerationError, DataError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
