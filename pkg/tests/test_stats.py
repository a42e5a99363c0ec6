import pytest

from cep.stats import UndefinedCorrelationError, pearson


def test_perfect_linear():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)


def test_perfect_inverse():
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def test_known_value():
    # 3 / sqrt(2 * 14/3), computed by hand from the covariance sums.
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9819805060619659,
                                                          abs=1e-12)


def test_matches_scipy_on_random_series():
    scipy_stats = pytest.importorskip("scipy.stats")
    import random

    rng = random.Random(1)
    for _ in range(25):
        n = rng.randint(2, 12)
        x = [rng.uniform(-5, 5) for _ in range(n)]
        y = [rng.uniform(-5, 5) for _ in range(n)]
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        expected = scipy_stats.pearsonr(x, y).statistic
        assert pearson(x, y) == pytest.approx(expected, abs=1e-10)


def test_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        pearson([1, 2], [1, 2, 3])


def test_zero_variance():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1, 1], [1, 2, 3])


def test_too_short():
    with pytest.raises(ValueError):
        pearson([1], [1])
