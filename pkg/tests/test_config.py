import pytest

from hetrisk.config import backtest_config, parse_overrides, read_pairs
from hetrisk.errors import InvalidConfig


def test_read_pairs(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# run\nlookback = 10  # days\n\nvariants = pc_regression, pc_optimization\n")
    assert read_pairs(path) == {"lookback": "10",
                                "variants": "pc_regression, pc_optimization"}


@pytest.mark.parametrize("text", ["lookback 10\n", " = 3\n", "a = 1\na = 2\n"])
def test_read_pairs_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(InvalidConfig):
        read_pairs(path)


def test_typed_conversion():
    cfg = backtest_config({
        "lookback": "10", "investment": "1e6", "bound_fraction": "0.02",
        "market_factor": "yes", "daily_loadings": "off", "start": "12",
        "variants": "pc_regression,heterotic_optimization",
    })
    assert cfg.lookback == 10 and cfg.investment == 1e6 and cfg.bound_fraction == 0.02
    assert cfg.market_factor and not cfg.daily_loadings and cfg.start == 12
    assert cfg.variants == ("pc_regression", "heterotic_optimization")
    assert backtest_config({"bound_fraction": "none"}).bound_fraction is None


@pytest.mark.parametrize(
    "values",
    [{"lookbak": "3"}, {"lookback": "ten"}, {"market_factor": "maybe"}, {"lookback": "2.5"}],
)
def test_bad_values(values):
    with pytest.raises(InvalidConfig):
        backtest_config(values)


def test_overrides():
    assert parse_overrides(["a=1", " b = x=y "]) == {"a": "1", "b": "x=y"}
    with pytest.raises(InvalidConfig):
        parse_overrides(["novalue"])
