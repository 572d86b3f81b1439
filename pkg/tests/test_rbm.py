import itertools
import math

import numpy as np
import pytest
from scipy.special import expit

from annealrbm.errors import EnumerationBudgetError
from annealrbm.rbm import (
    RbmParams,
    accuracy,
    classify,
    cond_hidden,
    cond_visible,
    energy,
    free_energy,
    ground_state,
    log_marginal_visible,
    model_expectations,
    partition_function,
    predict_classes,
)

from .oracle import brute_force_log_z, brute_force_table


def test_energy_of_zero_params_is_zero():
    params = RbmParams.zeros(3, 2)
    assert energy(params, [1, 0, 1], [1, 1]) == 0.0


def test_energy_hand_expansion():
    params = RbmParams([[2.0]], [1.0], [-1.0])
    assert energy(params, [1], [1]) == pytest.approx(-2.0)


def test_energy_sums_to_partition_function():
    params = RbmParams.random(3, 2, np.random.default_rng(0))
    total = sum(math.exp(-energy(params, v, h)) for v, h, _, _ in brute_force_table(params))
    assert math.log(total) == pytest.approx(partition_function(params), rel=1e-12)


def test_energy_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        energy(RbmParams.zeros(3, 2), [1, 0], [1, 1])


def test_free_energy_hand_computed():
    assert free_energy(RbmParams.zeros(2, 3), [1, 0]) == pytest.approx(-3 * math.log(2))
    params = RbmParams([[1.0], [-1.0]], [0.0, 0.0], [0.0])
    assert free_energy(params, [1, 0]) == pytest.approx(-math.log(1 + math.e))


def test_free_energy_matches_hidden_enumeration():
    params = RbmParams.random(4, 3, np.random.default_rng(1))
    v = np.array([1.0, 0.0, 1.0, 1.0])
    total = sum(math.exp(-energy(params, v, np.array(h))) for h in itertools.product((0, 1), repeat=3))
    assert free_energy(params, v) == pytest.approx(-math.log(total), rel=1e-12)


def test_conditionals_trivial_cases():
    zeros = RbmParams.zeros(3, 2)
    assert np.allclose(cond_hidden(zeros, [1, 1, 0]), 0.5)
    assert np.allclose(cond_visible(zeros, [1, 0]), 0.5)
    assert cond_hidden(RbmParams(np.zeros((1, 1)), [0.0], [20.0]), [0])[0] == pytest.approx(1.0, abs=1e-8)
    assert cond_visible(RbmParams(np.zeros((1, 1)), [-20.0], [0.0]), [1])[0] == pytest.approx(0.0, abs=1e-8)


def test_conditionals_match_enumerated_joint(small_params):
    table = brute_force_table(small_params)
    v = np.array([1.0, 0.0, 1.0])
    h = np.array([0.0, 1.0, 1.0])
    given_v = [(hh, p) for vv, hh, _, p in table if np.array_equal(vv, v)]
    given_h = [(vv, p) for vv, hh, _, p in table if np.array_equal(hh, h)]
    p_h = sum(hh * p for hh, p in given_v) / sum(p for _, p in given_v)
    p_v = sum(vv * p for vv, p in given_h) / sum(p for _, p in given_h)
    assert np.allclose(cond_hidden(small_params, v), p_h, rtol=1e-10)
    assert np.allclose(cond_visible(small_params, h), p_v, rtol=1e-10)


def test_partition_function_hand_computed():
    assert partition_function(RbmParams.zeros(2, 2)) == pytest.approx(math.log(16))
    w = 1.7
    assert partition_function(RbmParams([[w]], [0.0], [0.0])) == pytest.approx(math.log(3 + math.exp(w)))


def test_partition_function_normalizes():
    params = RbmParams.random(5, 5, np.random.default_rng(2))
    log_z = partition_function(params)
    assert log_z == pytest.approx(brute_force_log_z(params), rel=1e-12)
    total = sum(math.exp(-energy(params, v, h) - log_z) for v, h, _, _ in brute_force_table(params))
    assert total == pytest.approx(1.0, rel=1e-10)


def test_partition_function_refuses_over_budget():
    with pytest.raises(EnumerationBudgetError):
        partition_function(RbmParams.zeros(14, 13))


def test_visible_marginal_matches_enumeration():
    params = RbmParams.random(6, 5, np.random.default_rng(3))
    table = brute_force_table(params)
    for v in (np.zeros(6), np.ones(6), np.array([1.0, 0, 1, 0, 0, 1])):
        expected = sum(p for vv, _, _, p in table if np.array_equal(vv, v))
        assert math.exp(log_marginal_visible(params, v)) == pytest.approx(expected, rel=1e-10)


def test_energy_differences_determine_probabilities(small_params):
    table = brute_force_table(small_params)
    (v1, h1, e1, p1), (v2, h2, e2, p2) = table[5], table[40]
    assert p1 / p2 == pytest.approx(math.exp(-(e1 - e2)), rel=1e-10)
    assert energy(small_params, v1, h1) - energy(small_params, v2, h2) == pytest.approx(e1 - e2)


def test_model_expectations_and_ground_state(small_params):
    table = brute_force_table(small_params)
    ev, eh, evh = model_expectations(small_params)
    assert np.allclose(ev, sum(v * p for v, _, _, p in table), atol=1e-12)
    assert np.allclose(eh, sum(h * p for _, h, _, p in table), atol=1e-12)
    assert np.allclose(evh, sum(np.outer(v, h) * p for v, h, _, p in table), atol=1e-12)

    _, _, best = ground_state(small_params)
    assert best == pytest.approx(min(e for _, _, e, _ in table))


def test_classify_bias_dominates():
    W = np.zeros((4, 2))
    b = np.array([0.0, 0.0, 0.0, 10.0])
    params = RbmParams(W, b, np.zeros(2))
    for image in itertools.product((0, 1), repeat=3):
        assert classify(params, image).class_bit == 1


def test_classify_tie_goes_to_class_zero():
    prediction = classify(RbmParams.zeros(3, 2), [1, 0])
    assert prediction.free_energy_0 == prediction.free_energy_1
    assert prediction.class_bit == 0
    assert prediction.posterior_1 == 0.5


def test_classify_matches_enumerated_posterior():
    params = RbmParams.random(9, 4, np.random.default_rng(4))
    table = brute_force_table(params)
    marginal = {}
    for v, _, _, p in table:
        key = tuple(v)
        marginal[key] = marginal.get(key, 0.0) + p
    for image in itertools.product((0.0, 1.0), repeat=8):
        p0 = marginal[image + (0.0,)]
        p1 = marginal[image + (1.0,)]
        prediction = classify(params, image)
        assert prediction.posterior_1 == pytest.approx(p1 / (p0 + p1), abs=1e-10)
        assert prediction.posterior_1 == expit(prediction.free_energy_0 - prediction.free_energy_1)
        assert prediction.class_bit == (1 if p1 > p0 else 0)


def test_classify_rejects_wrong_length():
    with pytest.raises(ValueError):
        classify(RbmParams.zeros(4, 2), [1, 0, 1, 1])


def test_predict_classes_and_accuracy_agree_with_classify():
    params = RbmParams.random(5, 3, np.random.default_rng(5))
    images = np.array(list(itertools.product((0.0, 1.0), repeat=4)))
    bits, posterior = predict_classes(params, images)
    for image, bit, p in zip(images, bits, posterior):
        prediction = classify(params, image)
        assert prediction.class_bit == bit
        assert prediction.posterior_1 == pytest.approx(p)
    rows = np.hstack([images, bits[:, None]])
    assert accuracy(params, rows) == 1.0


def test_params_text_round_trip(tmp_path):
    params = RbmParams.random(4, 3, np.random.default_rng(6))
    path = tmp_path / "params.txt"
    params.save(path)
    loaded = RbmParams.load(path)
    assert np.array_equal(loaded.W, params.W)
    assert np.array_equal(loaded.b, params.b)
    assert np.array_equal(loaded.c, params.c)
    assert path.read_text().splitlines()[1] == "4 3"


def test_params_reject_non_finite():
    with pytest.raises(ValueError):
        RbmParams([[np.inf]], [0.0], [0.0])


def test_params_are_read_only():
    params = RbmParams.zeros(2, 2)
    with pytest.raises(ValueError):
        params.W[0, 0] = 1.0
