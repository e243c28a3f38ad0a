"""Training loops for the three objectives: plain CRF loss, the weighted
pseudo-data variant, and the joint segmentation + word-classification loss.
RMSProp updates, mini-batching with per-epoch reshuffling, early stopping on
development loss, and best-epoch parameter snapshots; everything is
deterministic under a fixed seed."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import crf
from .encoder import emission_scores, encode, encoder_backward, encode_cached
from .evaluate import score as score_corpora
from .model import Model, ModelGrads, segment
from .numkit import OptState, rmsprop_step
from .tagcodec import LabeledSentence
from .wordclf import WordSample, clf_backward, clf_loss, score_word_cached

MODES = ("baseline", "pseudo", "multitask")


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``lambda1`` weights the pseudo-sentence loss term; ``lambda2`` in
    [0, 1] balances word classification against segmentation.  With
    ``pseudo_mix`` the pseudo sentences join the gold pool as one shuffled
    stream carrying per-sentence weight lambda1 instead of being paired
    batch-for-batch.
    """

    mode: str = "baseline"
    lambda1: float = 1.0
    lambda2: float = 0.3
    learning_rate: float = 0.001
    batch_size: int = 64
    dropout: float = 0.3
    patience: int = 3
    max_epochs: int = 100
    seed: int = 0
    pseudo_mix: bool = False
    freeze_embeddings: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lambda1 < 0.0:
            raise ValueError(f"lambda1 must be >= 0, got {self.lambda1}")
        if not 0.0 <= self.lambda2 <= 1.0:
            raise ValueError(f"lambda2 must be in [0, 1], got {self.lambda2}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 1:
            raise ValueError(f"max epochs must be >= 1, got {self.max_epochs}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float
    dev_f1: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord]
    best_epoch: int
    stopped_epoch: int
    wall_seconds: float

    @property
    def best_dev_loss(self) -> float:
        return min(r.dev_loss for r in self.epochs)

    def lines(self) -> list[str]:
        """One tab-separated line per epoch: epoch, train, dev, dev F."""
        return [
            f"{r.epoch}\t{r.train_loss:.6f}\t{r.dev_loss:.6f}\t{r.dev_f1:.4f}"
            for r in self.epochs
        ]


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without a strictly better
    development loss."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def observe(self, epoch: int, dev_loss: float) -> bool:
        """Record an epoch; returns True when it set a new best."""
        if dev_loss < self.best:
            self.best = dev_loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


def batch_loss_cws(
    model: Model,
    batch: Sequence[LabeledSentence],
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
    weights: Sequence[float] | None = None,
) -> tuple[float, ModelGrads]:
    """Summed per-sentence NLL over a batch, with accumulated gradients.

    ``weights`` scales individual sentences (used by the mixed pseudo
    pool); omitted means weight 1 everywhere.
    """
    if not batch:
        raise ValueError("empty batch")
    grads = ModelGrads.zeros_like(model)
    total = 0.0
    for j, sent in enumerate(batch):
        w = 1.0 if weights is None else weights[j]
        hidden, cache = encode_cached(
            sent.chars, model.vocab, model.encoder,
            dropout=dropout, rng=rng, training=training,
        )
        scores = emission_scores(hidden, model.encoder)
        loss, d_scores, d_matrix, d_start = crf.nll_with_gradients(
            scores, model.transitions, sent.tags
        )
        total += w * loss
        grads.add_encoder(encoder_backward(cache, d_scores, model.encoder), w)
        grads.add_transitions(d_matrix, d_start, w)
    return total, grads


def batch_loss_words(
    model: Model,
    samples: Sequence[WordSample],
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> tuple[float, ModelGrads]:
    """Summed logistic word-classification loss with gradients."""
    if not samples:
        raise ValueError("empty word batch")
    grads = ModelGrads.zeros_like(model)
    total = 0.0
    for sample in samples:
        s, cache = score_word_cached(
            sample.chars, model.vocab, model.encoder, model.head,
            dropout=dropout, rng=rng, training=training,
        )
        total += clf_loss(s, sample.label)
        du, dc, enc_grads = clf_backward(
            cache, s, sample.label, model.encoder, model.head
        )
        grads.add_head(du, dc)
        grads.add_encoder(enc_grads)
    return total, grads


def loss_pseudo(
    model: Model,
    gold_batch: Sequence[LabeledSentence],
    pseudo_batch: Sequence[LabeledSentence],
    lambda1: float,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> tuple[float, ModelGrads]:
    """Gold loss plus lambda1-weighted pseudo-sentence loss.

    lambda1 == 0 skips the pseudo branch entirely, so the result (and the
    rng stream) is bit-identical to the plain objective.
    """
    if lambda1 < 0.0:
        raise ValueError(f"lambda1 must be >= 0, got {lambda1}")
    total, grads = batch_loss_cws(
        model, gold_batch, dropout=dropout, rng=rng, training=training
    )
    if lambda1 == 0.0 or not pseudo_batch:
        return total, grads
    p_total, p_grads = batch_loss_cws(
        model, pseudo_batch, dropout=dropout, rng=rng, training=training
    )
    grads.add(p_grads, lambda1)
    return total + lambda1 * p_total, grads


def loss_multitask(
    model: Model,
    cws_batch: Sequence[LabeledSentence],
    word_batch: Sequence[WordSample],
    lambda2: float,
    *,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> tuple[float, ModelGrads]:
    """(1-lambda2) * segmentation loss + lambda2 * word-classification loss.

    The endpoints skip the zero-weighted branch: lambda2 == 0 is
    bit-identical to the plain objective, lambda2 == 1 leaves every
    CRF-side parameter with an exactly zero gradient.
    """
    if not 0.0 <= lambda2 <= 1.0:
        raise ValueError(f"lambda2 must be in [0, 1], got {lambda2}")
    if lambda2 == 0.0:
        return batch_loss_cws(
            model, cws_batch, dropout=dropout, rng=rng, training=training
        )
    if lambda2 == 1.0:
        return batch_loss_words(
            model, word_batch, dropout=dropout, rng=rng, training=training
        )
    c_total, c_grads = batch_loss_cws(
        model, cws_batch, dropout=dropout, rng=rng, training=training
    )
    w_total, w_grads = batch_loss_words(
        model, word_batch, dropout=dropout, rng=rng, training=training
    )
    grads = ModelGrads.zeros_like(model)
    grads.add(c_grads, 1.0 - lambda2)
    grads.add(w_grads, lambda2)
    return (1.0 - lambda2) * c_total + lambda2 * w_total, grads


def corpus_nll(model: Model, data: Sequence[LabeledSentence]) -> float:
    """Plain segmentation loss with dropout off and no gradients."""
    total = 0.0
    for sent in data:
        hidden = encode(sent.chars, model.vocab, model.encoder)
        total += crf.nll(
            emission_scores(hidden, model.encoder), model.transitions, sent.tags
        )
    return total


def dev_metrics(model: Model, dev: Sequence[LabeledSentence]) -> tuple[float, float]:
    """(dev loss, dev word F) in inference mode."""
    loss = corpus_nll(model, dev)
    predicted = [segment(model, sent.chars) for sent in dev]
    gold = [sent.words for sent in dev]
    return loss, score_corpora(gold, predicted).f1


class _Cycler:
    """Endless stream over a fixed pool, reshuffled (with the training rng)
    each time the pool is exhausted."""

    def __init__(self, items: Sequence, rng: np.random.Generator):
        if not items:
            raise ValueError("cannot cycle an empty pool")
        self._items = list(items)
        self._rng = rng
        self._order = rng.permutation(len(self._items))
        self._pos = 0

    def take(self, n: int) -> list:
        out = []
        while len(out) < n:
            if self._pos == len(self._order):
                self._order = self._rng.permutation(len(self._items))
                self._pos = 0
            out.append(self._items[self._order[self._pos]])
            self._pos += 1
        return out


def _apply_update(
    model: Model,
    grads: ModelGrads,
    opt: dict[str, OptState],
    config: TrainConfig,
) -> None:
    grad_map = dict(grads.named())
    for name, param in model.named_params():
        if config.freeze_embeddings and name == "embedding":
            continue
        rmsprop_step(param, grad_map[name], opt[name])


def train(
    model: Model,
    train_data: Sequence[LabeledSentence],
    dev_data: Sequence[LabeledSentence],
    config: TrainConfig,
    *,
    pseudo_data: Sequence[LabeledSentence] | None = None,
    word_data: Sequence[WordSample] | None = None,
) -> TrainReport:
    """Run the configured objective to early stopping or the epoch cap.

    Each step pairs one gold batch with an equally sized batch from the
    auxiliary pool (pseudo sentences or word samples), cycled independently
    of the gold shuffle.  The model is left at the parameters of the best
    dev-loss epoch.
    """
    if not train_data or not dev_data:
        raise ValueError("training requires non-empty train and dev sets")
    if config.mode == "pseudo" and not pseudo_data:
        raise ValueError("pseudo mode requires a pseudo corpus")
    if config.mode == "multitask" and not word_data:
        raise ValueError("multitask mode requires word samples")

    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    opt = {
        name: OptState.for_param(param, lr=config.learning_rate)
        for name, param in model.named_params()
    }

    mixed_pool: list[LabeledSentence] = []
    mixed_weights: list[float] = []
    pseudo_cycler = word_cycler = None
    if config.mode == "pseudo":
        if config.pseudo_mix:
            mixed_pool = list(train_data) + list(pseudo_data)
            mixed_weights = [1.0] * len(train_data) + [config.lambda1] * len(pseudo_data)
        else:
            pseudo_cycler = _Cycler(pseudo_data, rng)
    elif config.mode == "multitask":
        word_cycler = _Cycler(word_data, rng)

    records: list[EpochRecord] = []
    stopper = EarlyStopper(config.patience)
    best_snapshot = None
    for epoch in range(1, config.max_epochs + 1):
        epoch_loss = 0.0
        if mixed_pool:
            order = rng.permutation(len(mixed_pool))
            for lo in range(0, len(order), config.batch_size):
                chunk = order[lo:lo + config.batch_size]
                loss, grads = batch_loss_cws(
                    model,
                    [mixed_pool[i] for i in chunk],
                    weights=[mixed_weights[i] for i in chunk],
                    dropout=config.dropout, rng=rng, training=True,
                )
                _apply_update(model, grads, opt, config)
                epoch_loss += loss
        else:
            order = rng.permutation(len(train_data))
            for lo in range(0, len(order), config.batch_size):
                gold = [train_data[i] for i in order[lo:lo + config.batch_size]]
                if config.mode == "baseline":
                    loss, grads = batch_loss_cws(
                        model, gold,
                        dropout=config.dropout, rng=rng, training=True,
                    )
                elif config.mode == "pseudo":
                    loss, grads = loss_pseudo(
                        model, gold, pseudo_cycler.take(len(gold)), config.lambda1,
                        dropout=config.dropout, rng=rng, training=True,
                    )
                else:
                    loss, grads = loss_multitask(
                        model, gold, word_cycler.take(len(gold)), config.lambda2,
                        dropout=config.dropout, rng=rng, training=True,
                    )
                _apply_update(model, grads, opt, config)
                epoch_loss += loss

        dev_loss, dev_f1 = dev_metrics(model, dev_data)
        records.append(EpochRecord(epoch, epoch_loss, dev_loss, dev_f1))
        if stopper.observe(epoch, dev_loss):
            best_snapshot = model.snapshot()
        if stopper.should_stop:
            break

    if best_snapshot is not None:
        model.restore(best_snapshot)
    return TrainReport(
        records, stopper.best_epoch, records[-1].epoch,
        time.perf_counter() - started,
    )
