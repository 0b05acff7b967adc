import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from Neighbors.knn_core import (
    DENOMINATOR_EPS,
    DegenerateRatesError,
    NoiseRates,
    RegressionSample,
    as_regression_sample,
    classify,
    classify_standard,
    corrected_regression,
    estimate_max,
    estimate_min,
    estimate_noise_rates,
    fit_known_rates_classifier,
    fit_regressor,
    fit_robust_classifier,
    fit_standard_classifier,
    predict,
)
from Neighbors.nn_index import QueryError
from Data.datasets import LabeledDataset
from oracles import oracle_predict


def _instance(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(2, 81))
    dim = int(rng.integers(1, 6))
    if seed % 2 == 0:
        points = rng.integers(0, 3, size=(n, dim)).astype(float)
    else:
        points = rng.random((n, dim))
    labels = rng.integers(0, 2, size=n)
    queries = rng.random((4, dim)) * 2.0
    ks = sorted({1, min(5, n), max(1, n // 2), n})
    return points, labels, queries, ks


class TestOracleEquivalence:
    @pytest.mark.parametrize('seed', range(200))
    def test_regression_and_classifiers_match_oracle(self, seed):
        points, labels, queries, ks = _instance(seed)
        sample = RegressionSample(points, labels)

        for k in ks:
            train_predictions = [oracle_predict(points, labels, x, k) for x in points]
            p0 = max(min(train_predictions), 0.0)
            p1 = max(1.0 - max(train_predictions), 0.0)
            threshold = 0.5 + 0.5 * (p0 - p1)
            query_predictions = np.array([oracle_predict(points, labels, q, k) for q in queries])

            robust = fit_robust_classifier(sample, k)
            assert robust.predict_many(queries).tolist() == query_predictions.tolist()
            assert robust.estimated_rates.p0 == p0
            assert robust.estimated_rates.p1 == p1
            assert robust.threshold == threshold
            assert robust.classify_many(queries).tolist() == (query_predictions >= threshold).astype(int).tolist()

            standard = fit_standard_classifier(sample, k)
            assert standard.classify_many(queries).tolist() == (query_predictions >= 0.5).astype(int).tolist()

    @pytest.mark.parametrize('backend', ['brute', 'kdtree', 'line'])
    def test_backends_agree_on_one_dimensional_data(self, backend):
        rng = np.random.default_rng(11)
        points = np.round(rng.random(300), 2)
        labels = rng.integers(0, 2, size=300)
        queries = np.round(rng.random(50), 2)
        regressor = fit_regressor(RegressionSample(points, labels), 25, backend=backend)
        expected = [oracle_predict(points, labels, q, 25) for q in queries]
        assert regressor.predict_many(queries).tolist() == expected
        assert [predict(regressor, q) for q in queries] == expected

    def test_fractional_responses(self):
        points = np.array([[0.0], [1.0], [2.0], [3.0]])
        responses = np.array([0.1, 0.2, 0.7, 0.4])
        regressor = fit_regressor(RegressionSample(points, responses), 2)
        assert regressor.predict([0.4]) == pytest.approx(0.15)
        assert regressor.window_counts is None


class TestRegression:
    def test_k_equal_n_gives_the_label_mean_everywhere(self):
        rng = np.random.default_rng(5)
        points = rng.random((40, 2))
        labels = rng.integers(0, 2, size=40)
        regressor = fit_regressor(RegressionSample(points, labels), 40)
        predictions = regressor.predict_many(rng.random((10, 2)))
        assert np.all(predictions == labels.sum() / 40)

    def test_training_point_is_its_own_first_neighbor(self):
        sample = RegressionSample([0.0, 0.4, 1.0], [1, 0, 0])
        assert fit_regressor(sample, 1).predict([0.0]) == 1.0

    def test_extrema_on_separable_data(self):
        sample = RegressionSample(np.arange(10.0), [0] * 5 + [1] * 5)
        assert estimate_max(sample, 1) == 1.0
        assert estimate_min(sample, 1) == 0.0

    def test_k_out_of_range(self):
        with pytest.raises(QueryError):
            fit_regressor(RegressionSample([0.0, 1.0], [0, 1]), 3)

    def test_responses_must_be_in_unit_interval(self):
        with pytest.raises(ValueError):
            RegressionSample([0.0, 1.0], [0.0, 1.5])

    def test_labeled_dataset_is_accepted(self):
        dataset = LabeledDataset(np.array([[0.0], [1.0]]), [0, 1])
        sample = as_regression_sample(dataset)
        assert sample.n == 2
        assert sample.is_binary
        with pytest.raises(TypeError):
            as_regression_sample([0.0, 1.0])

    def test_complemented_responses(self):
        sample = RegressionSample([0.0, 1.0], [0, 1]).complemented()
        assert sample.responses.tolist() == [1.0, 0.0]


class TestNoiseRateEstimation:
    def test_noiseless_separable_sample(self):
        sample = RegressionSample(np.arange(10.0), [0] * 5 + [1] * 5)
        rates = estimate_noise_rates(sample, 1)
        assert (rates.p0, rates.p1) == (0.0, 0.0)
        assert not rates.degenerate

    def test_constant_labels_are_degenerate(self):
        sample = RegressionSample(np.arange(6.0), [1] * 6)
        rates = estimate_noise_rates(sample, 2)
        assert rates.p0 == 1.0
        assert rates.degenerate

    def test_estimates_are_non_negative(self):
        rng = np.random.default_rng(2)
        sample = RegressionSample(rng.random(200), rng.integers(0, 2, size=200))
        rates = estimate_noise_rates(sample, 20)
        assert rates.p0 >= 0.0 and rates.p1 >= 0.0


class TestClassifiers:
    def test_robust_needs_binary_labels(self):
        with pytest.raises(ValueError):
            fit_robust_classifier(RegressionSample([0.0, 1.0], [0.2, 0.8]), 1)

    def test_known_rates_threshold(self, rates):
        sample = RegressionSample(np.arange(8.0), [0, 0, 1, 0, 1, 1, 1, 0])
        model = fit_known_rates_classifier(sample, 3, rates)
        assert model.threshold == pytest.approx(0.4)
        assert model.kind == 'known_rates'

    def test_standard_threshold_is_one_half(self):
        model = fit_standard_classifier(RegressionSample(np.arange(4.0), [0, 1, 0, 1]), 1)
        assert model.threshold == 0.5
        assert model.estimated_rates == NoiseRates(0.0, 0.0)

    def test_boundary_value_goes_to_class_one(self):
        sample = RegressionSample([0.0, 1.0, 5.0, 6.0], [0, 1, 0, 1])
        standard = fit_standard_classifier(sample, 2)
        assert standard.predict([0.5]) == 0.5
        assert classify(standard, [0.5]) == 1
        assert classify_standard(standard.regressor, [0.5]) == 1

    def test_degenerate_estimate_still_classifies(self):
        sample = RegressionSample(np.arange(6.0), [1] * 6)
        model = fit_robust_classifier(sample, 2)
        assert model.estimated_rates.degenerate
        assert model.threshold == 1.0
        assert model.classify_many(np.arange(6.0)).tolist() == [1] * 6
        with pytest.raises(DegenerateRatesError):
            corrected_regression(model, [0.0])

    def test_corrected_regression_clamps(self):
        rng = np.random.default_rng(9)
        points = rng.random(100)
        labels = (points > 0.5).astype(int)
        labels[:10] = 1 - labels[:10]
        model = fit_robust_classifier(RegressionSample(points, labels), 5)
        values = model.corrected_regression_many(rng.random(20))
        assert np.all((values >= 0.0) & (values <= 1.0))
        raw = model.corrected_regression_raw([0.5])
        assert model.corrected_regression([0.5]) == min(max(raw, 0.0), 1.0)

    def test_summary_fields(self):
        sample = RegressionSample(np.arange(10.0), [0] * 5 + [1] * 5)
        summary = fit_robust_classifier(sample, 3).to_dict()
        assert set(summary) == {'kind', 'k', 'n', 'p0_hat', 'p1_hat', 'threshold', 'degenerate', 'backend'}
        assert summary['k'] == 3
        assert summary['backend'] == 'line'

    def test_model_is_a_label_function(self):
        sample = RegressionSample(np.arange(10.0), [0] * 5 + [1] * 5)
        model = fit_robust_classifier(sample, 1)
        assert model(np.array([0.0, 9.0])).tolist() == [0, 1]


_GRID = st.integers(0, 1000).map(lambda v: v / 1000.0)
_QUERY_GRID = st.integers(-500, 1500).map(lambda v: v / 1000.0)


@st.composite
def _samples(draw, binary=True, dims=(1, 2)):
    dim = draw(st.sampled_from(dims))
    n = draw(st.integers(2, 40))
    coords = draw(st.lists(_GRID, min_size=n * dim, max_size=n * dim))
    if binary:
        responses = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    else:
        responses = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=n, max_size=n))
    k = draw(st.integers(1, n))
    queries = draw(st.lists(_QUERY_GRID, min_size=dim, max_size=4 * dim))
    queries = np.asarray(queries[:len(queries) // dim * dim]).reshape(-1, dim)
    points = np.asarray(coords).reshape(n, dim)
    return RegressionSample(points, responses), k, queries


class TestInvariants:
    @settings(max_examples=80, deadline=None)
    @given(case=_samples())
    def test_classify_agrees_with_corrected_regression(self, case):
        sample, k, queries = case
        model = fit_robust_classifier(sample, k)
        rates = model.estimated_rates
        assume(rates.denominator > DENOMINATOR_EPS)

        for x in np.concatenate((sample.points, queries)):
            # exact ties at the threshold are settled by classify alone
            if abs(model.predict(x) - model.threshold) <= 1e-9:
                continue
            assert classify(model, x) == int(corrected_regression(model, x) >= 0.5)

    @settings(max_examples=80, deadline=None)
    @given(case=_samples(binary=False))
    def test_max_is_one_minus_min_of_complement(self, case):
        sample, k, _ = case
        assert estimate_max(sample, k) == pytest.approx(1.0 - estimate_min(sample.complemented(), k), abs=1e-12)
        assert estimate_min(sample, k) == pytest.approx(1.0 - estimate_max(sample.complemented(), k), abs=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(case=_samples(binary=False))
    def test_training_predictions_lie_between_extrema(self, case):
        sample, k, _ = case
        regressor = fit_regressor(sample, k)
        low, high = estimate_min(sample, k), estimate_max(sample, k)
        for x in sample.points:
            value = predict(regressor, x)
            assert low <= value <= high
            assert value == oracle_predict(sample.points, sample.responses, x, k)

    @settings(max_examples=60, deadline=None)
    @given(
        middle=st.lists(_GRID, min_size=1, max_size=30),
        data=st.data(),
    )
    def test_equal_rate_estimates_give_the_majority_vote(self, middle, data):
        k = data.draw(st.integers(1, 8))
        labels = data.draw(st.lists(st.integers(0, 1), min_size=len(middle), max_size=len(middle)))
        # a pure cluster of k zeros far left and k ones far right pins the extrema at 0 and 1
        left = list(-10.0 - np.linspace(0.0, 0.5, k))
        right = list(11.0 + np.linspace(0.0, 0.5, k))
        sample = RegressionSample(left + middle + right, [0] * k + labels + [1] * k)

        model = fit_robust_classifier(sample, k)
        assert model.estimated_rates.p0 == model.estimated_rates.p1 == 0.0
        assert model.threshold == 0.5

        queries = data.draw(st.lists(st.floats(-12, 12, allow_nan=False), min_size=1, max_size=10))
        for q in list(sample.points[:, 0]) + queries:
            assert classify(model, [q]) == classify_standard(model.regressor, [q])

    @settings(max_examples=60, deadline=None)
    @given(case=_samples(), p=st.floats(0, 0.49, allow_nan=False))
    def test_equal_known_rates_give_the_majority_vote(self, case, p):
        sample, k, queries = case
        model = fit_known_rates_classifier(sample, k, NoiseRates(p, p))
        assert model.threshold == 0.5
        for x in np.concatenate((sample.points, queries)):
            assert classify(model, x) == classify_standard(model.regressor, x)

    @settings(max_examples=80, deadline=None)
    @given(
        case=_samples(binary=False),
        scale=st.floats(0, 0.5, allow_nan=False),
        shift=st.floats(0, 0.5, allow_nan=False),
    )
    def test_constant_shift_moves_predictions_by_the_same_amount(self, case, scale, shift):
        sample, k, queries = case
        base = RegressionSample(sample.points, sample.responses * scale)
        shifted = RegressionSample(sample.points, sample.responses * scale + shift)
        base_regressor = fit_regressor(base, k)
        shifted_regressor = fit_regressor(shifted, k)
        for x in np.concatenate((sample.points, queries)):
            expected = oracle_predict(base.points, base.responses, x, k) + shift
            assert predict(shifted_regressor, x) == pytest.approx(expected, abs=1e-12)
            assert predict(shifted_regressor, x) == pytest.approx(predict(base_regressor, x) + shift, abs=1e-12)
