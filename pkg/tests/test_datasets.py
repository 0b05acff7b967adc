import json

import numpy as np
import pytest

from Data.datasets import (
    DatasetFormatError,
    LabeledDataset,
    load_dataset_csv,
    load_points_csv,
    save_dataset_csv,
    to_json_text,
    write_json,
)


@pytest.fixture
def dataset():
    rng = np.random.default_rng(0)
    return LabeledDataset(rng.random((50, 3)), rng.integers(0, 2, size=50))


class TestLabeledDataset:
    def test_flat_features_become_a_column(self):
        data = LabeledDataset([0.1, 0.2, 0.3], [0, 1, 0])
        assert data.features.shape == (3, 1)
        assert data.dim == 1

    @pytest.mark.parametrize('features, labels', [
        ([0.1, 0.2], [0, 1, 1]),
        ([0.1, 0.2], [0, 2]),
        ([[0.1], [np.nan]], [0, 1]),
        ([], []),
    ])
    def test_invalid(self, features, labels):
        with pytest.raises(DatasetFormatError):
            LabeledDataset(features, labels)

    def test_with_labels_keeps_first_clean_labels(self):
        data = LabeledDataset([0.0, 1.0], [0, 1])
        once = data.with_labels([1, 1])
        twice = once.with_labels([0, 0])
        assert once.clean_labels.tolist() == [0, 1]
        assert twice.clean_labels.tolist() == [0, 1]
        assert twice.labels.tolist() == [0, 0]

    def test_arrays_are_read_only(self, dataset):
        with pytest.raises(ValueError):
            dataset.labels[0] = 1


class TestCsv:
    def test_round_trip_is_byte_identical(self, dataset, tmp_path):
        first = tmp_path / 'first.csv'
        second = tmp_path / 'second.csv'
        save_dataset_csv(dataset, str(first))
        loaded = load_dataset_csv(str(first))
        save_dataset_csv(loaded, str(second))

        assert first.read_bytes() == second.read_bytes()
        assert np.array_equal(loaded.features, dataset.features)
        assert np.array_equal(loaded.labels, dataset.labels)

    def test_header_and_clean_column(self, dataset, tmp_path):
        path = tmp_path / 'noisy.csv'
        noisy = dataset.with_labels(1 - dataset.labels)
        save_dataset_csv(noisy, str(path), keep_clean=True)
        assert path.read_text().splitlines()[0] == 'x1,x2,x3,label,clean_label'
        loaded = load_dataset_csv(str(path))
        assert loaded.clean_labels.tolist() == dataset.labels.tolist()

    def test_keep_clean_requires_clean_labels(self, dataset, tmp_path):
        with pytest.raises(DatasetFormatError):
            save_dataset_csv(dataset, str(tmp_path / 'x.csv'), keep_clean=True)

    def test_seventeen_digit_floats(self, tmp_path):
        path = tmp_path / 'tiny.csv'
        save_dataset_csv(LabeledDataset([0.1], [1]), str(path))
        assert path.read_text().splitlines()[1] == '0.10000000000000001,1'

    @pytest.mark.parametrize('text', [
        '',
        'a,b,label\n0.1,0.2,1\n',
        'x1,x2\n0.1,0.2\n',
        'x1,label\n0.1,2\n',
        'x1,label\nabc,1\n',
        'x1,label\n0.1,\n',
        'x2,x1,label\n0.1,0.2,0\n',
    ])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / 'bad.csv'
        path.write_text(text)
        with pytest.raises(DatasetFormatError):
            load_dataset_csv(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset_csv(str(tmp_path / 'absent.csv'))

    def test_points_ignore_labels(self, dataset, tmp_path):
        path = tmp_path / 'points.csv'
        save_dataset_csv(dataset, str(path))
        points = load_points_csv(str(path))
        assert np.array_equal(points, dataset.features)

        bare = tmp_path / 'bare.csv'
        bare.write_text('x1\n0.25\n0.75\n')
        assert load_points_csv(str(bare)).tolist() == [[0.25], [0.75]]


class TestJson:
    def test_numpy_values_are_serialised(self, tmp_path):
        path = tmp_path / 'out' / 'summary.json'
        write_json({'b': np.int64(3), 'a': np.float64(0.5), 'flag': np.bool_(True),
                    'values': np.array([1, 2])}, str(path))
        data = json.loads(path.read_text())
        assert data == {'a': 0.5, 'b': 3, 'flag': True, 'values': [1, 2]}
        assert list(data) == ['a', 'b', 'flag', 'values']

    def test_unknown_types_rejected(self):
        with pytest.raises(TypeError):
            to_json_text({'value': object()})
