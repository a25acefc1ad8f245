import math

import pytest

import ordinalenc as oe


def test_soft_rank_is_half_at_the_age():
    values = oe.encode("soft", 50, sigma=3.6, max_age=101)
    assert len(values) == 101
    assert values[49] == 0.5


def test_hard_rank_bits():
    assert oe.encode("hard", 3, max_age=5) == [1.0, 1.0, 0.0, 0.0]
    assert oe.decode_hard_rank([1, 1, 0, 0]) == 3


def test_round_trips():
    soft = oe.encode("soft", 40, sigma=2.0)
    assert oe.decode_soft_rank([(p, 1.0 - p) for p in soft]) == 40
    ldl = oe.encode("ldl", 60, sigma=2.0)
    assert abs(oe.decode_ldl(ldl) - 60) < 1e-9


def test_output_dims():
    assert oe.output_dim("ldl") == 101
    assert oe.output_dim("hard") == 200
    assert oe.output_dim("soft") == 202


def test_loss_gradient_matches_central_differences():
    logits = [0.3 * math.sin(i) for i in range(oe.output_dim("soft", 12))]
    value, grad = oe.loss("soft", logits, 5, sigma=1.5, max_age=12)
    assert value > 0
    h = 1e-6
    for i in (0, 7, 23):
        up = list(logits)
        down = list(logits)
        up[i] += h
        down[i] -= h
        numeric = (oe.loss("soft", up, 5, sigma=1.5, max_age=12)[0] - oe.loss("soft", down, 5, sigma=1.5, max_age=12)[0]) / (2 * h)
        assert numeric == pytest.approx(grad[i], rel=1e-5, abs=1e-8)


def test_mask_geometry():
    rows = oe.make_mask(3, 3, 2, 7, 7)
    assert sum(row.count(0) for row in rows) == 16
    assert rows[0] == [1] * 7
    assert rows[1] == [1, 0, 0, 0, 0, 1, 1]
    assert len(oe.landmark_masks()) == 5


def test_metrics():
    assert oe.mae([48, 33, 20], [50, 30, 20]) == pytest.approx(5 / 3)
    assert oe.epsilon_error([13.0], [10], [3.0]) == pytest.approx(1 - math.exp(-0.5))


def test_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        oe.encode("ldl", 50, sigma=0.0)
    with pytest.raises(ValueError):
        oe.encode("dldl", 50)
    with pytest.raises(ValueError):
        oe.make_mask(3, 3, 0, 7, 7)


def test_gradcheck_passes():
    results = oe.gradcheck(trials=3)
    assert results
    assert all(r["passed"] for r in results)
