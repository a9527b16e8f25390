import json

from click.testing import CliRunner

from pairgen import system_check


def test_forward_pass(tiny_cfg):
    models, shapes = system_check.forward_pass(tiny_cfg)
    assert set(shapes) == set(models.named())
    assert shapes["generator"] == (8, 3, 32, 32)
    assert shapes["decoder"][0] == 8
    assert shapes["d_image"] == (8,)
    assert shapes["d_report"] == (8,)
    assert shapes["d_joint"] == (8,)


def test_job(tmpdir, tiny_values):
    config = str(tmpdir.join("config.json"))
    with open(config, "w") as fout:
        json.dump(tiny_values, fout)

    result = CliRunner().invoke(system_check.main, ["--config", config])
    assert result.exit_code == 0, result.output
    assert "torch version" in result.output
    assert "d_joint" in result.output
    assert "Done!" in result.output
