"""Hierarchical image-to-report decoder.

A sentence-level LSTM cell consumes the pooled image feature once per sentence
and emits a CONTINUE/STOP distribution and a topic vector. A word-level LSTM
stack receives the topic at step 1 and the START embedding at step 2, then its
own previous output: the chosen word's embedding in ``greedy``/``sample`` mode,
or the expected embedding under the temperature-scaled word distribution in
``soft`` mode.

Critic-side view of a decoded report: every sentence contributes its words
followed by one STOPS token. In soft mode those tokens are probability vectors
over the vocabulary; a sentence that ran into the length cap gets a one-hot
STOPS.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pad_sequence

from .. import constants
from ..exceptions import ConfigError, ShapeError

logger = logging.getLogger(__name__)

MODES = ("greedy", "sample", "soft")


@dataclass(frozen=True)
class DecoderConfig:
    vocab_size: int
    feature_dim: int = 128
    embed_dim: int = 64
    sentence_hidden: int = 128
    topic_hidden: int = 128
    word_hidden: int = 128
    word_layers: int = 3
    t_max: int = 6
    l_max: int = 16
    stop_threshold: float = 0.5
    temperature: float = 1.0
    train_encoder: bool = False

    def __post_init__(self):
        if self.vocab_size <= constants.STOPS_ID:
            raise ConfigError("vocabulary must hold at least the special tokens")
        if self.t_max < 1:
            raise ConfigError("t_max must be at least 1")
        if self.l_max < 1:
            raise ConfigError("l_max must be at least 1")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")

    @classmethod
    def from_config(cls, cfg, vocab_size, feature_dim=None):
        return cls(
            vocab_size=vocab_size,
            feature_dim=feature_dim or cfg["classifier.feature_dim"],
            embed_dim=cfg["decoder.embed_dim"],
            sentence_hidden=cfg["decoder.sentence_hidden"],
            topic_hidden=cfg["decoder.topic_hidden"],
            word_hidden=cfg["decoder.word_hidden"],
            word_layers=cfg["decoder.word_layers"],
            t_max=cfg["decoder.t_max"],
            l_max=cfg["decoder.l_max"],
            stop_threshold=cfg["decoder.stop_threshold"],
            temperature=cfg["decoder.temperature"],
            train_encoder=cfg["decoder.train_encoder"],
        )


@dataclass
class EncoderOutput:
    v_bar: torch.Tensor


@dataclass
class SentenceStep:
    h: torch.Tensor
    c: torch.Tensor
    stop_logits: torch.Tensor
    u: torch.Tensor
    t: torch.Tensor

    @property
    def state(self):
        return (self.h, self.c)


@dataclass
class WordDecoding:
    """One sentence per batch row.

    ``ids``/``probs``/``soft_embeddings`` cover every decoding step; only the
    first ``lengths[b]`` steps of row ``b`` are words, and when
    ``terminated[b]`` the next step is the STOPS token.
    """

    ids: torch.Tensor
    lengths: torch.Tensor
    terminated: torch.Tensor
    probs: Optional[torch.Tensor] = None
    soft_embeddings: Optional[torch.Tensor] = None


@dataclass
class DecodedReport:
    sentences: List[Tuple[int, ...]]
    stop_probs: List[float]
    soft_embeddings: Optional[torch.Tensor] = None


@dataclass
class DecodedBatch:
    reports: List[DecodedReport]
    tokens: torch.Tensor
    lengths: torch.Tensor


@dataclass
class TeacherForcedLoss:
    total: torch.Tensor
    word: torch.Tensor
    stop: torch.Tensor


class ReportDecoder(nn.Module):
    def __init__(self, config, encoder):
        super(ReportDecoder, self).__init__()
        self.config = config
        self.encoder = encoder
        if not config.train_encoder:
            for param in self.encoder.parameters():
                param.requires_grad_(False)

        self.sentence_lstm = nn.LSTMCell(config.feature_dim, config.sentence_hidden)
        self.stop_head = nn.Linear(config.sentence_hidden, 2)
        self.topic = nn.Sequential(
            nn.Linear(config.sentence_hidden, config.topic_hidden),
            nn.ReLU(),
            nn.Linear(config.topic_hidden, config.topic_hidden),
            nn.ReLU(),
            nn.Linear(config.topic_hidden, config.embed_dim),
        )
        self.embedding = nn.Embedding(config.vocab_size, config.embed_dim)
        self.word_lstm = nn.LSTM(
            config.embed_dim, config.word_hidden, num_layers=config.word_layers, batch_first=True
        )
        self.word_out = nn.Linear(config.word_hidden, config.vocab_size)

    def encode_image(self, images):
        return EncoderOutput(v_bar=self.encoder.features(images))

    def sentence_step(self, v_bar, state=None):
        h, c = self.sentence_lstm(v_bar, state)
        stop_logits = self.stop_head(h)
        return SentenceStep(h=h, c=c, stop_logits=stop_logits,
                            u=torch.softmax(stop_logits, dim=-1), t=self.topic(h))

    def start_embedding(self, batch_size):
        ids = torch.full((batch_size, 1), constants.START_ID, dtype=torch.long,
                         device=self.embedding.weight.device)
        return self.embedding(ids)

    def word_decode(self, t, mode="greedy", l_max=None, generator=None, temperature=None):
        """Decode one sentence per row of topic vectors ``t`` (N x embed_dim)."""
        if mode not in MODES:
            raise ConfigError("decode mode must be one of {}, got {!r}".format(MODES, mode))
        l_max = self.config.l_max if l_max is None else l_max
        if l_max < 1:
            raise ConfigError("l_max must be at least 1")
        temperature = temperature or self.config.temperature
        n = t.shape[0]

        _, state = self.word_lstm(t.unsqueeze(1))
        inputs = self.start_embedding(n)
        ids, probs, soft = [], [], []
        finished = torch.zeros(n, dtype=torch.bool, device=t.device)
        lengths = torch.zeros(n, dtype=torch.long, device=t.device)
        for _ in range(l_max):
            out, state = self.word_lstm(inputs, state)
            logits = self.word_out(out[:, 0])
            if mode == "soft":
                p = torch.softmax(logits / temperature, dim=-1)
                step_ids = p.argmax(dim=-1)
                expected = p @ self.embedding.weight
                probs.append(p)
                soft.append(expected)
                inputs = expected.unsqueeze(1)
            else:
                if mode == "greedy":
                    step_ids = logits.argmax(dim=-1)
                else:
                    step_ids = torch.multinomial(
                        torch.softmax(logits, dim=-1), 1, generator=generator
                    ).squeeze(1)
                inputs = self.embedding(step_ids).unsqueeze(1)
            ids.append(step_ids)

            is_stop = step_ids == constants.STOPS_ID
            lengths = lengths + (~finished & ~is_stop).long()
            finished = finished | is_stop
            if bool(finished.all()):
                break

        return WordDecoding(
            ids=torch.stack(ids, dim=1),
            lengths=lengths,
            terminated=finished,
            probs=torch.stack(probs, dim=1) if probs else None,
            soft_embeddings=torch.stack(soft, dim=1) if soft else None,
        )

    def decode_batch(self, images, mode="greedy", t_max=None, l_max=None,
                     stop_threshold=None, generator=None, temperature=None):
        """Decode a report for every image.

        :return: DecodedBatch whose ``tokens`` are padded critic inputs: word
                 ids (N x L, PAD-filled) in hard modes, probability vectors
                 (N x L x V, zero-filled) in soft mode.
        """
        cfg = self.config
        t_max = cfg.t_max if t_max is None else t_max
        l_max = cfg.l_max if l_max is None else l_max
        stop_threshold = cfg.stop_threshold if stop_threshold is None else stop_threshold
        soft = mode == "soft"
        n = images.shape[0]
        vocab = cfg.vocab_size

        v_bar = self.encode_image(images).v_bar
        active = [True] * n
        sentences = [[] for _ in range(n)]
        stop_probs = [[] for _ in range(n)]
        pieces = [[] for _ in range(n)]
        state = None
        for _ in range(t_max):
            step = self.sentence_step(v_bar, state)
            state = step.state
            words = self.word_decode(step.t, mode, l_max, generator, temperature)
            stop_now = (step.u[:, constants.STOP] > stop_threshold).tolist()
            for b in range(n):
                if not active[b]:
                    continue
                length = int(words.lengths[b])
                sentences[b].append(tuple(words.ids[b, :length].tolist()))
                stop_probs[b].append(float(step.u[b, constants.STOP]))
                if soft:
                    if bool(words.terminated[b]):
                        piece = words.probs[b, : length + 1]
                    else:
                        closing = F.one_hot(
                            torch.tensor([constants.STOPS_ID], device=images.device), vocab
                        ).to(words.probs.dtype)
                        piece = torch.cat([words.probs[b, :length], closing], dim=0)
                else:
                    piece = torch.cat([
                        words.ids[b, :length],
                        torch.tensor([constants.STOPS_ID], device=images.device),
                    ])
                pieces[b].append(piece)
                if stop_now[b]:
                    active[b] = False
            if not any(active):
                break

        flat = [torch.cat(p, dim=0) for p in pieces]
        lengths = torch.tensor([f.shape[0] for f in flat], dtype=torch.long)
        tokens = pad_sequence(flat, batch_first=True,
                              padding_value=0.0 if soft else constants.PAD_ID)
        reports = [
            DecodedReport(
                sentences=sentences[b],
                stop_probs=stop_probs[b],
                soft_embeddings=flat[b] @ self.embedding.weight if soft else None,
            )
            for b in range(n)
        ]
        return DecodedBatch(reports=reports, tokens=tokens, lengths=lengths)

    def decode_report(self, image, mode="greedy", t_max=None, l_max=None,
                      stop_threshold=None, generator=None):
        """Decode one C x H x W image."""
        if image.dim() != 3:
            raise ShapeError("decode_report expects a single C x H x W image")
        batch = self.decode_batch(image.unsqueeze(0), mode, t_max, l_max, stop_threshold, generator)
        return batch.reports[0]

    def teacher_forced_loss(self, images, sentences, sentence_counts, word_counts):
        """Word cross-entropy (STOPS closes every sentence) plus stop-gate cross-entropy.

        Each part is a mean over its own decisions.

        :param sentences: N x T x L padded word ids.
        :param sentence_counts: N sentence counts.
        :param word_counts: N x T word counts.
        """
        if sentence_counts.numel() == 0 or bool((sentence_counts < 1).any()):
            raise ValueError("empty reference")
        n, t_max, l_max = sentences.shape
        v_bar = self.encode_image(images).v_bar
        columns = torch.arange(l_max + 1, device=sentences.device)

        word_terms, stop_terms = [], []
        state = None
        for i in range(min(t_max, int(sentence_counts.max()))):
            present = sentence_counts > i
            step = self.sentence_step(v_bar, state)
            state = step.state
            stop_target = (sentence_counts - 1 == i).long()
            stop_terms.append(
                F.cross_entropy(step.stop_logits[present], stop_target[present], reduction="none")
            )

            counts = word_counts[:, i]
            targets = torch.cat(
                [sentences[:, i], torch.full((n, 1), constants.PAD_ID, dtype=torch.long,
                                             device=sentences.device)],
                dim=1,
            )
            targets[torch.arange(n), counts] = constants.STOPS_ID
            inputs = torch.cat(
                [step.t.unsqueeze(1), self.start_embedding(n), self.embedding(targets[:, :-1])],
                dim=1,
            )
            out, _ = self.word_lstm(inputs)
            logits = self.word_out(out[:, 1:])
            ce = F.cross_entropy(
                logits.reshape(-1, self.config.vocab_size), targets.reshape(-1), reduction="none"
            ).reshape(n, l_max + 1)
            mask = (columns[None, :] <= counts[:, None]) & present[:, None]
            word_terms.append(ce[mask])

        word = torch.cat(word_terms).mean()
        stop = torch.cat(stop_terms).mean()
        return TeacherForcedLoss(total=word + stop, word=word, stop=stop)
