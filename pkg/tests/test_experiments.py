import json

import numpy as np
import pytest

from pairgen.artifacts import GenerationBundle
from pairgen.evaluation.experiments import (
    ExperimentConfig,
    MetricsReport,
    augmentation_experiment,
    check_holdout_disjoint,
    report_generation_experiment,
    split_corpus,
    summarize,
)
from pairgen.exceptions import ConfigError, DataError
from pairgen.models.classifier import ClassifierConfig
from pairgen.models.decoder import DecoderConfig
from pairgen.training.classifier import FitConfig
from pairgen.training.pretrain import PretrainConfig
from pairgen.utils import hash_array


@pytest.fixture
def config(tiny_cfg):
    return ExperimentConfig.from_config(tiny_cfg)


@pytest.fixture
def classifier_config(tiny_cfg):
    return ClassifierConfig.from_config(tiny_cfg, 4)


def test_config(config):
    assert config.synth_counts == (0, 8)
    assert config.seeds == (0, 1)
    assert config.real_count == 16
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=())
    with pytest.raises(ConfigError):
        ExperimentConfig(synth_counts=(-1,))
    with pytest.raises(ConfigError):
        ExperimentConfig(real_count=0)


def test_split_corpus(corpus, config):
    split = split_corpus(corpus, config)
    real = split.real_samples(16)
    assert len(real) == 16
    assert len(split.holdout_samples) == 8
    assert len(split.holdout_reports) == 8
    train = {hash_array(s.image) for s in real}
    assert not train & {hash_array(s.image) for s in split.holdout_samples}
    again = split_corpus(corpus, config)
    assert [s.report for s in again.real_samples(16)] == [s.report for s in real]


def test_smaller_real_draws_nest(corpus, tiny_cfg):
    config = ExperimentConfig.from_config(
        tiny_cfg.replace(experiment__total_count=24, experiment__synth_ratios=[0.0, 0.5])
    )
    split = split_corpus(corpus, config)
    assert len(split.drawn_samples) == 24
    small = {hash_array(s.image) for s in split.real_samples(12)}
    large = {hash_array(s.image) for s in split.real_samples(24)}
    assert len(small) == 12
    assert small < large


def test_mixes(tiny_cfg):
    config = ExperimentConfig.from_config(tiny_cfg.replace(
        experiment__synthetic_only=True,
        experiment__total_count=16,
        experiment__synth_ratios=[0.0, 0.25, 1.0],
    ))
    assert [(m.arm, m.real_count, m.synth_count) for m in config.mixes()] == [
        ("", 16, 0),
        ("", 16, 8),
        ("_synthetic_only", 0, 8),
        ("_ratio", 16, 0),
        ("_ratio", 12, 4),
        ("_ratio", 0, 16),
    ]
    for mix in config.mixes():
        if mix.arm == "_ratio":
            assert mix.real_count + mix.synth_count == 16


def test_mix_config_validation():
    with pytest.raises(ConfigError, match="synthetic_only"):
        ExperimentConfig(synthetic_only=True, synth_counts=(0,))
    with pytest.raises(ConfigError, match="total_count"):
        ExperimentConfig(synth_ratios=(0.5,))
    with pytest.raises(ConfigError, match="synth_ratios"):
        ExperimentConfig(synth_ratios=(1.5,), total_count=10)



def test_split_corpus_needs_enough_pairs(corpus):
    with pytest.raises(DataError, match="real_count"):
        split_corpus(corpus, ExperimentConfig(real_count=41))


def test_check_holdout_disjoint(samples):
    check_holdout_disjoint(samples[:10], samples[10:20])
    with pytest.raises(DataError, match="1 held-out"):
        check_holdout_disjoint(samples[:10], samples[9:20])


def test_metrics_report_validation():
    with pytest.raises(ValueError):
        MetricsReport("augmentation", 10, 0, 0, auc=1.5)
    with pytest.raises(ValueError):
        MetricsReport("report_generation", 10, 0, 0, bleu=[0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        MetricsReport("evaluate", 10, 0, 0, fid=-1.0)


def test_metrics_report_json():
    report = MetricsReport("report_generation", 10, 5, 1, bleu=[0.4, 0.3, 0.2, 0.1], cider=1.5)
    assert MetricsReport.from_json(report.to_json()) == report
    assert json.loads(report.to_json())["synth_count"] == 5
    row = report.row()
    assert row["bleu3"] == 0.2
    assert "bleu" not in row


def test_summarize():
    reports = [
        MetricsReport("augmentation", 16, 0, 0, auc=0.5, acc=0.4),
        MetricsReport("augmentation", 16, 0, 1, auc=0.7, acc=0.6),
        MetricsReport("augmentation", 16, 8, 0, auc=0.9, acc=0.8),
    ]
    summary = summarize(reports)
    assert list(summary["synth_count"]) == [0, 8]
    assert summary["auc_mean"].tolist()[0] == pytest.approx(0.6)
    assert summary["auc_std"].tolist()[0] == pytest.approx(np.std([0.5, 0.7], ddof=1))
    assert summary["seeds"].tolist() == [2, 1]
    assert "fid_mean" not in summary.columns
    assert "bleu1_mean" not in summary.columns


def test_summarize_per_class_auc():
    reports = [
        MetricsReport("augmentation", 16, 0, 0, auc=0.6, acc=0.5, auc_per_class=[0.4, 0.8]),
        MetricsReport("augmentation", 16, 0, 1, auc=0.7, acc=0.5, auc_per_class=[0.6, None]),
        MetricsReport("augmentation_synthetic_only", 0, 8, 0, auc=0.5, acc=0.3,
                      auc_per_class=[0.5, 0.5]),
    ]
    assert reports[1].row()["auc_class1"] is None
    summary = summarize(reports)
    assert summary["experiment"].tolist() == ["augmentation", "augmentation_synthetic_only"]
    assert summary["real_count"].tolist() == [16, 0]
    assert summary["auc_class0_mean"].tolist()[0] == pytest.approx(0.5)
    assert summary["auc_class1_mean"].tolist()[0] == pytest.approx(0.8)
    assert summary["auc_class1_mean"].tolist()[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        MetricsReport("augmentation", 16, 0, 0, auc_per_class=[1.2])



def test_augmentation_experiment(corpus, bundle, config, classifier_config):
    fit = FitConfig(epochs=1, batch_size=16)
    reports = augmentation_experiment(corpus, bundle, config, fit, classifier_config)
    assert [(r.synth_count, r.seed) for r in reports] == [(0, 0), (0, 1), (8, 0), (8, 1)]
    for report in reports:
        assert report.experiment == "augmentation"
        assert report.real_count == 16
        assert 0.0 <= report.auc <= 1.0
        assert 0.0 <= report.acc <= 1.0
    again = augmentation_experiment(corpus, bundle, config, fit, classifier_config)
    assert [r.fingerprint() for r in again] == [r.fingerprint() for r in reports]


def test_augmentation_arms(corpus, bundle, tiny_cfg, classifier_config):
    config = ExperimentConfig.from_config(tiny_cfg.replace(
        experiment__seeds=[0],
        experiment__synthetic_only=True,
        experiment__total_count=16,
        experiment__synth_ratios=[0.5, 1.0],
    ))
    reports = augmentation_experiment(
        corpus, bundle, config, FitConfig(epochs=1, batch_size=16), classifier_config
    )
    assert [(r.experiment, r.real_count, r.synth_count) for r in reports] == [
        ("augmentation", 16, 0),
        ("augmentation", 16, 8),
        ("augmentation_synthetic_only", 0, 8),
        ("augmentation_ratio", 8, 8),
        ("augmentation_ratio", 0, 16),
    ]
    for report in reports:
        assert len(report.auc_per_class) == 4
        assert all(0.0 <= a <= 1.0 for a in report.auc_per_class)
    summary = summarize(reports)
    assert len(summary) == 5
    assert "auc_class3_mean" in summary.columns



def test_augmentation_with_finetuning(corpus, bundle, tiny_cfg, classifier_config):
    config = ExperimentConfig.from_config(
        tiny_cfg.replace(experiment__finetune=True, experiment__synth_counts=[8],
                         experiment__seeds=[0])
    )
    reports = augmentation_experiment(
        corpus, bundle, config, FitConfig(epochs=1), classifier_config
    )
    assert [r.experiment for r in reports] == ["augmentation_finetune"]


def test_class_count_mismatch(corpus, tiny_cfg, vocab, models, config, classifier_config):
    other = GenerationBundle(tiny_cfg, vocab, 3, models, {})
    with pytest.raises(ConfigError, match="3 classes"):
        augmentation_experiment(corpus, other, config, FitConfig(epochs=1), classifier_config)


def test_report_generation_experiment(corpus, bundle, tiny_cfg, vocab, config, classifier_config):
    reports = report_generation_experiment(
        corpus, bundle, config,
        DecoderConfig.from_config(tiny_cfg, vocab.size, classifier_config.feature_dim),
        classifier_config,
        PretrainConfig.from_config(tiny_cfg),
        cider_variant="d",
    )
    assert len(reports) == 4
    for report in reports:
        assert report.experiment == "report_generation"
        assert len(report.bleu) == 4
        assert all(0.0 <= b <= 1.0 for b in report.bleu)
        assert report.cider >= 0.0
        assert report.auc is None
