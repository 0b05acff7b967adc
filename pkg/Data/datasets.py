"""
Datasets
LabeledDataset container plus CSV / JSON persistence

CSV layout: header `x1,...,xd,label` with an optional trailing `clean_label`
column; UTF-8, comma separated, floats written with 17 significant digits so
every value reads back bit-identical.
"""
import os
import json
import logging
from dataclasses import dataclass
from typing import Dict, Any, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
LABEL_COLUMN = 'label'
CLEAN_LABEL_COLUMN = 'clean_label'


class DatasetFormatError(ValueError):
    """Raised for a malformed dataset file or inconsistent arrays"""


def feature_columns(dim: int) -> List[str]:
    return [f"x{i + 1}" for i in range(dim)]


def _as_labels(labels, n: int, name: str) -> np.ndarray:
    values = np.asarray(labels)
    if values.ndim != 1 or values.shape[0] != n:
        raise DatasetFormatError(f"{name} must have length {n}, got shape {values.shape}")
    if values.dtype.kind == 'f' and not np.all(np.isfinite(values)):
        raise DatasetFormatError(f"{name} contain NaN or infinite values")
    if not np.all((values == 0) | (values == 1)):
        raise DatasetFormatError(f"{name} must be binary 0/1")
    return values.astype(np.int64)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Feature vectors with binary labels

    clean_labels holds the pre-corruption labels when the dataset came out of
    a noise channel and is None otherwise.
    """
    features: np.ndarray
    labels: np.ndarray
    clean_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2 or features.shape[0] == 0 or features.shape[1] == 0:
            raise DatasetFormatError(f"features must be a non-empty (n, d) array, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise DatasetFormatError("features contain NaN or infinite values")

        n = features.shape[0]
        labels = _as_labels(self.labels, n, 'labels')
        clean = None if self.clean_labels is None else _as_labels(self.clean_labels, n, 'clean_labels')

        for array in (features, labels, clean):
            if array is not None:
                array.setflags(write=False)

        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'clean_labels', clean)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def with_labels(self, labels) -> 'LabeledDataset':
        """New dataset with these labels; the current labels become clean_labels unless already set"""
        clean = self.clean_labels if self.clean_labels is not None else self.labels
        return LabeledDataset(self.features, labels, clean)

    def to_frame(self, keep_clean: bool = False) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=feature_columns(self.dim))
        frame[LABEL_COLUMN] = self.labels
        if keep_clean:
            if self.clean_labels is None:
                raise DatasetFormatError("dataset has no clean labels to keep")
            frame[CLEAN_LABEL_COLUMN] = self.clean_labels
        return frame

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> 'LabeledDataset':
        columns = _validated_feature_columns(frame)
        if LABEL_COLUMN not in frame.columns:
            raise DatasetFormatError(f"missing '{LABEL_COLUMN}' column")
        clean = frame[CLEAN_LABEL_COLUMN].to_numpy() if CLEAN_LABEL_COLUMN in frame.columns else None
        return cls(frame[columns].to_numpy(dtype=np.float64), frame[LABEL_COLUMN].to_numpy(), clean)


def _validated_feature_columns(frame: pd.DataFrame) -> List[str]:
    extra = [c for c in frame.columns if c not in (LABEL_COLUMN, CLEAN_LABEL_COLUMN)]
    if not extra:
        raise DatasetFormatError("no feature columns (expected x1, ..., xd)")
    expected = feature_columns(len(extra))
    if extra != expected:
        raise DatasetFormatError(f"feature columns must be {expected}, got {extra}")
    return expected


# ============================================================================
# CSV
# ============================================================================

def write_frame_csv(frame: pd.DataFrame, path: str) -> str:
    """Write any result frame with the repository's CSV conventions"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding='utf-8', lineterminator='\n')
    return path


def _read_csv(path: str) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision='round_trip', encoding='utf-8')
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DatasetFormatError(f"malformed CSV {path}: {e}")


def save_dataset_csv(dataset: LabeledDataset, path: str, keep_clean: bool = False) -> str:
    """
    Save a dataset as CSV

    Args:
        dataset: Dataset to write
        path: Output file
        keep_clean: Also write the clean_label column

    Returns:
        The path written
    """
    write_frame_csv(dataset.to_frame(keep_clean=keep_clean), path)
    logger.info(f"Saved {dataset.n} rows to {path}")
    return path


def load_dataset_csv(path: str) -> LabeledDataset:
    """
    Load a labelled dataset written by save_dataset_csv (or by hand in the same layout)

    Raises:
        FileNotFoundError: Missing file
        DatasetFormatError: Bad header, non-binary labels, non-numeric values
    """
    frame = _read_csv(path)
    try:
        return LabeledDataset.from_frame(frame)
    except (TypeError, ValueError) as e:
        raise DatasetFormatError(f"{path}: {e}")


def load_points_csv(path: str) -> np.ndarray:
    """Load the x1..xd columns of a CSV as an (m, d) query matrix; label columns are ignored"""
    frame = _read_csv(path)
    columns = _validated_feature_columns(frame)
    try:
        points = frame[columns].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DatasetFormatError(f"{path}: non-numeric feature values ({e})")
    if not np.all(np.isfinite(points)):
        raise DatasetFormatError(f"{path}: feature values must be finite")
    return points


# ============================================================================
# JSON
# ============================================================================

def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(data: Dict[str, Any], path: str) -> str:
    """Write a summary dict as sorted, indented JSON"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        f.write('\n')
    return path


def to_json_text(data: Dict[str, Any]) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default)
