import json

import pytest


def _base_metrics():
    """A well-formed metrics payload in the pipeline's file format."""
    bins = 10
    zeros = [0.0] * bins
    peak_low = [0.6, 0.3, 0.1] + [0.0] * (bins - 3)
    peak_high = [0.0] * (bins - 3) + [0.1, 0.3, 0.6]
    return {
        "counts": {"tp": 4, "fp": 1, "tn": 3, "fn": 0},
        "metrics": {
            "accuracy": 0.875,
            "precision": 0.8,
            "recall": 1.0,
            "f1": 8 / 9,
            "macro_f1": 0.873,
        },
        "roc": {
            "points": [[0.0, 0.0], [0.0, 0.5], [0.25, 0.75], [1.0, 1.0]],
            "auc": 0.8125,
        },
        "densities": {
            "bins": bins,
            "tp": peak_high,
            "tn": peak_low,
            "fp": zeros,
            "fn": zeros,
        },
        "splits": {"train": 7, "val": 1, "test": 8},
        "threshold": 0.5,
        "seed": 2021,
    }


@pytest.fixture
def metrics_payload():
    return _base_metrics()


@pytest.fixture
def metrics_file(tmp_path):
    def write(payload):
        path = tmp_path / "metrics.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return write


@pytest.fixture
def district_csv(tmp_path):
    def write(rows, header="district,count"):
        path = tmp_path / "district_counts.csv"
        lines = [header] + [f"{d},{c}" for d, c in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write
