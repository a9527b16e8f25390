"""Report tokenization and the token <-> id vocabulary.

Text rules: lowercase; newlines act as sentence delimiters like periods; every
character other than letters, digits, whitespace and periods is dropped;
sentences are split on periods and tokenized on whitespace; empty sentences are
dropped.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .. import constants
from ..utils import atomic_write

logger = logging.getLogger(__name__)

_DROP_CHARS = re.compile(r"[^a-z0-9.\s]")


@dataclass(frozen=True)
class Vocabulary:
    id_to_token: Tuple[str, ...]
    token_to_id: Dict[str, int] = field(compare=False, repr=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:4]) != tuple(constants.SPECIAL_TOKENS):
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(self.id_to_token)) != len(self.id_to_token):
            raise ValueError("vocabulary tokens must be unique")

    @classmethod
    def from_tokens(cls, tokens):
        tokens = tuple(tokens)
        return cls(tokens, {token: idx for idx, token in enumerate(tokens)})

    @property
    def size(self):
        return len(self.id_to_token)

    def __len__(self):
        return self.size

    @property
    def specials(self):
        return {
            "PAD": constants.PAD_ID,
            "UNK": constants.UNK_ID,
            "START": constants.START_ID,
            "STOPS": constants.STOPS_ID,
        }

    def encode(self, token):
        return self.token_to_id.get(token, constants.UNK_ID)

    def decode(self, idx):
        return self.id_to_token[idx]


def split_sentences(text):
    """Normalized sentences of a report, each a list of word tokens."""
    text = text.lower().replace("\n", ".")
    text = _DROP_CHARS.sub(" ", text)
    sentences = []
    for chunk in text.split("."):
        words = chunk.split()
        if words:
            sentences.append(words)
    return sentences


def normalize_text(text):
    """Canonical form of a report: ``"w w w. w w."``."""
    return " ".join(" ".join(words) + "." for words in split_sentences(text))


def build_vocabulary(corpus, min_count):
    """Build a vocabulary of every token seen at least ``min_count`` times.

    :param corpus: sequence of report texts.
    :param min_count: occurrence threshold, at least 1.
    :return: a Vocabulary; specials first, then kept tokens sorted by
             descending count and then alphabetically.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    if min_count < 1:
        raise ValueError("min_count must be at least 1")

    counts = Counter()
    for text in corpus:
        for words in split_sentences(text):
            counts.update(words)

    kept = sorted(
        (tok for tok, n in counts.items()
         if n >= min_count and tok not in constants.SPECIAL_TOKENS),
        key=lambda tok: (-counts[tok], tok),
    )
    logger.info(
        "Built vocabulary: {} of {} distinct tokens kept at min_count={}".format(
            len(kept), len(counts), min_count
        )
    )
    return Vocabulary.from_tokens(list(constants.SPECIAL_TOKENS) + kept)


def tokenize_report(text, vocab):
    """Split a report into sentences of word ids.

    A text without any token becomes the empty-report marker: one sentence
    holding only the STOP-sentence id.
    """
    sentences = [[vocab.encode(word) for word in words] for words in split_sentences(text)]
    if not sentences:
        return [[constants.STOPS_ID]]
    return sentences


def detokenize(sentences, vocab):
    """Inverse of ``tokenize_report`` for in-vocabulary text."""
    parts = []
    for sentence in sentences:
        words = [
            vocab.decode(idx)
            for idx in sentence
            if idx not in (constants.PAD_ID, constants.START_ID, constants.STOPS_ID)
        ]
        if words:
            parts.append(" ".join(words) + ".")
    return " ".join(parts)


def save_vocabulary(vocab, path):
    """One token per line; the line number is the id."""
    with atomic_write(path) as fout:
        for token in vocab.id_to_token:
            fout.write(token + "\n")


def load_vocabulary(path):
    with open(path) as fin:
        tokens = [line.rstrip("\n") for line in fin if line.rstrip("\n")]
    return Vocabulary.from_tokens(tokens)


def flatten_report(sentences: Sequence[Sequence[int]], l_max: int) -> List[int]:
    """Critic view of a report: each sentence capped at ``l_max`` words and closed by STOPS."""
    tokens = []
    for sentence in sentences:
        words = [idx for idx in sentence if idx != constants.STOPS_ID][:l_max]
        tokens.extend(words)
        tokens.append(constants.STOPS_ID)
    return tokens
