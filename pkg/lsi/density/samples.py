import json
import logging
import numpy as np

from dataclasses import dataclass
from pathlib import Path
from typing import Union

from lsi.types import PathLike, Points


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplePoints:
    """An i.i.d. sample stored as an (n, d) coordinate matrix."""

    coords: Points

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=float)

        if coords.ndim != 2:
            raise ValueError(f"sample coordinates must be an (n, d) matrix, got shape {coords.shape}")

        if coords.shape[1] not in (2, 3):
            raise ValueError(f"sample dimension must be 2 or 3, got {coords.shape[1]}")

        if not np.all(np.isfinite(coords)):
            raise ValueError("sample coordinates must be finite")

        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def __len__(self) -> int:
        return self.n


def as_sample(data: Union[SamplePoints, np.ndarray]) -> SamplePoints:
    if isinstance(data, SamplePoints):
        return data
    return SamplePoints(np.asarray(data, dtype=float))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_samples(path: PathLike) -> SamplePoints:
    """
    Read a sample from CSV (one point per row, optional header) or
    NDJSON (one {"x": [...]} object per line).

    :param path: File path; `.ndjson`/`.jsonl` select NDJSON, anything else CSV
    :return: SamplePoints
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Sample file does not exist: {path}")

    if path.suffix.lower() in (".ndjson", ".jsonl"):
        rows = []
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    rows.append([float(v) for v in record["x"]])
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise ValueError(f"{path}:{line_no}: expected an object with an 'x' list") from e

        if not rows:
            raise ValueError(f"No points in {path}")
        return SamplePoints(np.array(rows))

    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()

    skip = 0 if all(_is_number(tok) for tok in first.strip().split(",") if tok.strip()) else 1

    try:
        coords = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as e:
        raise ValueError(f"Could not parse CSV sample {path}: {e}") from e

    logger.info("Read %d points of dimension %d from %s", coords.shape[0], coords.shape[1], path)
    return SamplePoints(coords)


def write_samples(sample: Union[SamplePoints, np.ndarray], path: PathLike) -> Path:
    sample = as_sample(sample)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    if path.suffix.lower() in (".ndjson", ".jsonl"):
        with open(path, "w", encoding="utf-8") as f:
            for row in sample.coords:
                f.write(json.dumps({"x": [float(v) for v in row]}) + "\n")
    else:
        header = ",".join(f"x{k}" for k in range(sample.dim))
        np.savetxt(path, sample.coords, delimiter=",", header=header, comments="", fmt="%.17g")

    return path
