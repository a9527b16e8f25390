import click

from pairgen.data import toy
from pairgen.evaluation import evaluate, experiments
from pairgen.training import classifier, pretrain, trainer
from pairgen import generate
from pairgen import system_check


@click.group()
def entry_point():
    pass


entry_point.add_command(toy.main, "make_toy_data")
entry_point.add_command(classifier.main, "train_classifier")
entry_point.add_command(pretrain.main, "pretrain_decoder")
entry_point.add_command(trainer.main, "train")
entry_point.add_command(generate.main, "generate")
entry_point.add_command(evaluate.main, "evaluate")
entry_point.add_command(experiments.main, "experiment")
entry_point.add_command(generate.export_samples, "export_samples")
entry_point.add_command(system_check.main, "system_check")

if __name__ == "__main__":
    entry_point()
