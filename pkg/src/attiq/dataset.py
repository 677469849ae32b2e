"""Dataset persistence: measurement/truth CSV plus a JSON config sidecar.

The CSV column layout is fixed; values are written with 17 significant
digits so numeric fields survive a write/read round trip bit-for-bit. The
sidecar (same path with a .json suffix) carries the generating
ScenarioConfig, including the seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .sim import Dataset, NoiseParams, ScenarioConfig, SensorSample, TruthState

COLUMNS = (
    "t",
    "wx_m",
    "wy_m",
    "wz_m",
    "ax_m",
    "ay_m",
    "az_m",
    "mx_m",
    "my_m",
    "mz_m",
    "q1_true",
    "q2_true",
    "q3_true",
    "q4_true",
    "bx_true",
    "by_true",
    "bz_true",
)


class DatasetFormatError(ValueError):
    """Malformed dataset file (header, row shape, or sidecar config)."""


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "case": config.case,
        "seed": config.seed,
        "duration": config.duration,
        "sample_rate": config.sample_rate,
        "angular_rate": config.angular_rate,
        "noise": {
            "n_w": config.noise.n_w,
            "n_b": config.noise.n_b,
            "n_a": config.noise.n_a,
            "n_m": config.noise.n_m,
            "b0": list(config.noise.b0),
        },
        "g": list(config.g),
        "h": list(config.h),
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    allowed = {"case", "seed", "duration", "sample_rate", "angular_rate", "noise", "g", "h"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise DatasetFormatError(f"unknown config keys: {', '.join(unknown)}")
    missing = sorted(allowed - set(data))
    if missing:
        raise DatasetFormatError(f"missing config keys: {', '.join(missing)}")
    noise_data = dict(data["noise"])
    unknown = sorted(set(noise_data) - {"n_w", "n_b", "n_a", "n_m", "b0"})
    if unknown:
        raise DatasetFormatError(f"unknown noise keys: {', '.join(unknown)}")
    noise = NoiseParams(
        n_w=float(noise_data["n_w"]),
        n_b=float(noise_data["n_b"]),
        n_a=float(noise_data["n_a"]),
        n_m=float(noise_data["n_m"]),
        b0=tuple(float(v) for v in noise_data.get("b0", (0.0, 0.0, 0.0))),
    )
    return ScenarioConfig(
        case=data["case"],
        seed=int(data["seed"]),
        duration=float(data["duration"]),
        sample_rate=float(data["sample_rate"]),
        angular_rate=float(data["angular_rate"]),
        noise=noise,
        g=tuple(float(v) for v in data["g"]),
        h=tuple(float(v) for v in data["h"]),
    )


def write_dataset(dataset: Dataset, path) -> Path:
    """Write measurements + truth to CSV and the config sidecar; returns path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(COLUMNS)]
    for sample, truth in zip(dataset.samples, dataset.truth):
        row = np.concatenate(
            [[sample.t], sample.w_m, sample.a_m, sample.m_m, truth.q, truth.b]
        )
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n")
    sidecar_path(path).write_text(
        json.dumps(config_to_dict(dataset.config), indent=2, sort_keys=True) + "\n"
    )
    return path


def read_dataset(path) -> Dataset:
    """Load a dataset written by write_dataset.

    Truth angular rates are not part of the file format, so loaded
    TruthState.w is None.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: empty dataset file")
    header = tuple(name.strip() for name in lines[0].split(","))
    if header != COLUMNS:
        raise DatasetFormatError(
            f"{path}: malformed header; expected {','.join(COLUMNS)}"
        )
    samples: list[SensorSample] = []
    truth: list[TruthState] = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(COLUMNS):
            raise DatasetFormatError(
                f"{path}: row {i} has {len(parts)} fields, expected {len(COLUMNS)}"
            )
        try:
            vals = np.array([float(p) for p in parts])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: row {i}: {exc}") from None
        t = vals[0]
        samples.append(
            SensorSample(t=t, w_m=vals[1:4], a_m=vals[4:7], m_m=vals[7:10])
        )
        truth.append(TruthState(t=t, q=vals[10:14], w=None, b=vals[14:17]))

    side = sidecar_path(path)
    if not side.exists():
        raise DatasetFormatError(f"{path}: missing config sidecar {side}")
    try:
        config = config_from_dict(json.loads(side.read_text()))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{side}: invalid JSON: {exc}") from None

    expected_rows = config.n_samples
    if len(samples) != expected_rows:
        raise DatasetFormatError(
            f"{path}: row count mismatch: {len(samples)} rows, "
            f"config implies {expected_rows}"
        )
    return Dataset(config=config, samples=samples, truth=truth)
