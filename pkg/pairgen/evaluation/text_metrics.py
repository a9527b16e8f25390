"""BLEU and CIDEr over tokenized reports.

Texts are tokenized with the same rules as the vocabulary (``split_sentences``)
and flattened to one word sequence per report, so sentence boundaries do not
form n-grams of their own.

BLEU is corpus level: clipped n-gram counts and candidate/reference lengths
are summed over the corpus before the precisions and the brevity penalty are
formed. The effective reference length of a candidate is the closest
reference length (the shorter on ties). Zero precisions are replaced by
``epsilon``.

CIDEr weights n-gram counts by ``log(N / df)``, with ``N`` the number of
reference sets and ``df`` the number of sets holding the n-gram, and averages
the cosine similarity to each reference over n = 1..4, times 10. The ``"d"``
variant clips candidate weights at the reference's and applies a Gaussian
length penalty with ``sigma``.
"""

import logging
import math
from collections import Counter

import numpy as np

from ..data.vocabulary import split_sentences

logger = logging.getLogger(__name__)

MAX_ORDER = 4
DEFAULT_EPSILON = 1e-9
CIDER_VARIANTS = ("plain", "d")


def report_tokens(text):
    return [word for sentence in split_sentences(text) for word in sentence]


def ngrams(tokens, n):
    tokens = tuple(tokens)
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


def modified_precision(candidate, references, n):
    """(clipped matches, candidate n-gram count) for one candidate."""
    counts = ngrams(candidate, n)
    max_ref = Counter()
    for reference in references:
        for gram, count in ngrams(reference, n).items():
            max_ref[gram] = max(max_ref[gram], count)
    clipped = sum(min(count, max_ref[gram]) for gram, count in counts.items())
    return clipped, sum(counts.values())


def closest_reference_length(candidate_length, references):
    return min((abs(len(r) - candidate_length), len(r)) for r in references)[1]


def brevity_penalty(candidate_length, reference_length):
    if candidate_length > reference_length:
        return 1.0
    return math.exp(1.0 - float(reference_length) / candidate_length)


def _check_order(n):
    if not 1 <= n <= MAX_ORDER:
        raise ValueError("BLEU order must lie in [1, {}], got {}".format(MAX_ORDER, n))


def corpus_bleu(candidates, references, n=4, epsilon=DEFAULT_EPSILON):
    """Corpus BLEU-n of token sequences against per-candidate reference lists."""
    _check_order(n)
    if len(candidates) != len(references):
        raise ValueError("got {} candidates but {} reference sets".format(
            len(candidates), len(references)))
    if not candidates:
        raise ValueError("empty references")
    matches = np.zeros(n)
    totals = np.zeros(n)
    candidate_length, reference_length = 0, 0
    for candidate, refs in zip(candidates, references):
        if not refs or not any(len(r) for r in refs):
            raise ValueError("empty references")
        if not candidate:
            raise ValueError("empty candidate")
        for order in range(1, n + 1):
            clipped, total = modified_precision(candidate, refs, order)
            matches[order - 1] += clipped
            totals[order - 1] += total
        candidate_length += len(candidate)
        reference_length += closest_reference_length(len(candidate), refs)

    precisions = np.divide(matches, totals, out=np.zeros(n), where=totals > 0)
    precisions[precisions == 0] = epsilon
    penalty = brevity_penalty(candidate_length, reference_length)
    score = penalty * math.exp(np.log(precisions).mean())
    return float(min(score, 1.0))


def bleu_n(candidate, references, n, epsilon=DEFAULT_EPSILON):
    return corpus_bleu([candidate], [references], n, epsilon)


def bleu_scores(candidates, references, epsilon=DEFAULT_EPSILON):
    return {"bleu{}".format(n): corpus_bleu(candidates, references, n, epsilon)
            for n in range(1, MAX_ORDER + 1)}


class CiderScorer(object):
    """TF-IDF n-gram consensus against a fixed reference corpus.

    Document frequencies need at least two distinct reference sets; with fewer
    every n-gram would get zero weight, so construction raises instead.
    """

    def __init__(self, references, n=MAX_ORDER, variant="plain", sigma=6.0):
        if variant not in CIDER_VARIANTS:
            raise ValueError("unknown CIDEr variant {!r}".format(variant))
        distinct = {tuple(sorted(tuple(r) for r in refs)) for refs in references}
        if len(distinct) < 2:
            raise ValueError("IDF undefined: need at least two distinct reference sets")
        self.n = n
        self.variant = variant
        self.sigma = sigma
        self.references = [[self._counts(r) for r in refs] for refs in references]
        self.reference_lengths = [[len(r) for r in refs] for refs in references]
        self.log_corpus_size = math.log(float(len(references)))
        self.document_frequency = Counter()
        for refs in self.references:
            self.document_frequency.update({gram for counts in refs for gram in counts})

    def _counts(self, tokens):
        counts = Counter()
        for order in range(1, self.n + 1):
            counts.update(ngrams(tokens, order))
        return counts

    def _vector(self, counts):
        vec = [{} for _ in range(self.n)]
        for gram, tf in counts.items():
            df = max(1.0, self.document_frequency[gram])
            vec[len(gram) - 1][gram] = tf * (self.log_corpus_size - math.log(df))
        norms = [math.sqrt(sum(w * w for w in v.values())) for v in vec]
        return vec, norms

    def _similarity(self, hyp, ref, delta):
        (vec_h, norm_h), (vec_r, norm_r) = hyp, ref
        values = np.zeros(self.n)
        for order in range(self.n):
            total = 0.0
            for gram, weight in vec_h[order].items():
                ref_weight = vec_r[order].get(gram, 0.0)
                if self.variant == "d":
                    weight = min(weight, ref_weight)
                total += weight * ref_weight
            if norm_h[order] and norm_r[order]:
                total /= norm_h[order] * norm_r[order]
            values[order] = total
        if self.variant == "d":
            values *= math.exp(-(delta ** 2) / (2 * self.sigma ** 2))
        return values

    def score(self, index, candidate):
        hyp = self._vector(self._counts(candidate))
        per_ref = [
            self._similarity(hyp, self._vector(ref), float(len(candidate) - length)).mean()
            for ref, length in zip(self.references[index], self.reference_lengths[index])
        ]
        return 10.0 * float(np.mean(per_ref))

    def scores(self, candidates):
        if len(candidates) != len(self.references):
            raise ValueError("got {} candidates but {} reference sets".format(
                len(candidates), len(self.references)))
        return np.array([self.score(i, c) for i, c in enumerate(candidates)])


def cider(candidates, references, variant="plain", sigma=6.0):
    """Mean CIDEr of token sequences; ``references[i]`` lists the references of candidate ``i``."""
    return float(CiderScorer(references, variant=variant, sigma=sigma).scores(candidates).mean())


def text_metrics(candidate_texts, reference_texts, epsilon=DEFAULT_EPSILON, cider_variant="plain"):
    """BLEU-1..4 and CIDEr of decoded reports against one reference report each."""
    candidates = [report_tokens(t) for t in candidate_texts]
    references = [[report_tokens(t)] for t in reference_texts]
    # an empty decode scores zero rather than aborting the run
    scored = [(c if c else ["<empty>"]) for c in candidates]
    metrics = bleu_scores(scored, references, epsilon)
    metrics["cider"] = cider(scored, references, variant=cider_variant)
    return metrics
