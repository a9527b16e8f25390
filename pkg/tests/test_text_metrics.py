import math

import pytest

from pairgen.evaluation.text_metrics import (
    CiderScorer,
    bleu_n,
    bleu_scores,
    cider,
    closest_reference_length,
    corpus_bleu,
    modified_precision,
    report_tokens,
    text_metrics,
)


def toks(text):
    return text.split()


def test_report_tokens_flattens_sentences():
    assert report_tokens("The heart is normal. No effusion!") == [
        "the", "heart", "is", "normal", "no", "effusion",
    ]


def test_modified_precision_clips_counts():
    assert modified_precision(toks("a a a"), [toks("a b")], 1) == (1, 3)


def test_bleu_1_with_clipping():
    assert bleu_n(toks("a a a"), [toks("a b")], 1) == pytest.approx(1.0 / 3.0)


def test_brevity_penalty():
    score = bleu_n(toks("a b c d"), [toks("a b c d e")], 4)
    assert score == pytest.approx(math.exp(1.0 - 5.0 / 4.0))
    assert score == pytest.approx(0.7788, abs=1e-4)


def test_perfect_match():
    assert bleu_n(toks("a b c d e"), [toks("a b c d e")], 4) == pytest.approx(1.0)


def test_zero_overlap_uses_epsilon():
    assert bleu_n(toks("x y"), [toks("a b")], 1) == pytest.approx(1e-9)
    assert bleu_n(toks("x y"), [toks("a b")], 1, epsilon=1e-3) == pytest.approx(1e-3)


def test_closest_reference_length_prefers_shorter_on_ties():
    assert closest_reference_length(3, [toks("a b"), toks("a b c d")]) == 2
    assert closest_reference_length(3, [toks("a b c d"), toks("a")]) == 4


def test_corpus_level_pooling():
    candidates = [toks("a b"), toks("x y")]
    references = [[toks("a b")], [toks("c d")]]
    assert corpus_bleu(candidates, references, n=1) == pytest.approx(0.5)


def test_multiple_references():
    score = bleu_n(toks("a b c"), [toks("x y z"), toks("a b c")], 3)
    assert score == pytest.approx(1.0)


def test_bleu_errors():
    with pytest.raises(ValueError):
        corpus_bleu([toks("a")], [[toks("a")]], n=5)
    with pytest.raises(ValueError, match="empty candidate"):
        corpus_bleu([[]], [[toks("a")]])
    with pytest.raises(ValueError, match="empty references"):
        corpus_bleu([toks("a")], [[]])
    with pytest.raises(ValueError, match="empty references"):
        corpus_bleu([], [])
    with pytest.raises(ValueError):
        corpus_bleu([toks("a")], [[toks("a")], [toks("b")]])


def test_bleu_scores_keys():
    scores = bleu_scores([toks("a b c d")], [[toks("a b c d")]])
    assert sorted(scores) == ["bleu1", "bleu2", "bleu3", "bleu4"]
    assert all(s == pytest.approx(1.0) for s in scores.values())


REFERENCES = [[toks("the heart is normal")], [toks("small nodule in lingula")]]


def test_cider_of_references_is_ten():
    candidates = [refs[0] for refs in REFERENCES]
    assert cider(candidates, REFERENCES) == pytest.approx(10.0)
    assert cider(candidates, REFERENCES, variant="d") == pytest.approx(10.0)


def test_cider_is_invariant_to_duplicating_the_corpus():
    candidates = [toks("the heart is"), toks("small nodule")]
    doubled_candidates = candidates * 2
    assert cider(doubled_candidates, REFERENCES * 2) == pytest.approx(cider(candidates, REFERENCES))


def test_cider_without_overlap_is_zero():
    assert cider([toks("x y"), toks("z w")], REFERENCES) == 0.0


def test_cider_d_penalizes_length():
    candidates = [toks("the heart is normal and the lungs are clear and"), toks("small nodule")]
    plain = cider(candidates, REFERENCES)
    clipped = cider(candidates, REFERENCES, variant="d", sigma=2.0)
    assert 0.0 < clipped < plain


def test_cider_needs_two_reference_sets():
    with pytest.raises(ValueError, match="IDF undefined"):
        CiderScorer([[toks("a b")]])
    with pytest.raises(ValueError, match="IDF undefined"):
        CiderScorer([[toks("a b")], [toks("a b")], [toks("a b")]])
    with pytest.raises(ValueError):
        CiderScorer(REFERENCES, variant="r")
    with pytest.raises(ValueError):
        CiderScorer(REFERENCES).scores([toks("a")])


def test_text_metrics_handles_empty_decodes():
    metrics = text_metrics(["", "small nodule in lingula."],
                           ["The heart is normal.", "Small nodule in lingula."])
    assert sorted(metrics) == ["bleu1", "bleu2", "bleu3", "bleu4", "cider"]
    assert 0.0 <= metrics["bleu4"] <= 1.0
    assert metrics["cider"] == pytest.approx(5.0)
