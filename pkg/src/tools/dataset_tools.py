"""CSV datasets: loading with validation, grids, and deterministic writes."""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from src.efd.distributions import Support
from src.efd.family import LikelihoodFamily
from src.errors import ConfigError, DataError, DomainError, SchemaMismatch
from src.utils.files import atomic_write_text

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
UNIT_CLAMP = 1e-6
# Written by `sample`; never taken as inputs unless named explicitly
RESERVED_COLUMNS = ("eta", "region")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: Optional[np.ndarray]
    columns: List[str]
    path: Optional[str] = None
    seed: Optional[int] = None

    def __len__(self) -> int:
        return self.x.shape[0]


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"data file not found: {path}") from exc
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_dataset(
    path,
    lik: Optional[LikelihoodFamily] = None,
    inputs: Optional[Sequence[str]] = None,
    output: str = "y",
    require_output: bool = True,
    empty_error: type = DataError,
    clamp_unit: bool = False,
) -> Dataset:
    """
    Read a CSV with a header row.

    Inputs are `inputs` when given, else every column except `output`
    and the RESERVED_COLUMNS.
    Rows are reported 1-based as data rows (the header is not counted).
    With `clamp_unit`, unit-interval outputs are clipped into
    [UNIT_CLAMP, 1 - UNIT_CLAMP] before the support check.
    """

    path = Path(path)
    frame = _read_csv(path)
    if frame.shape[0] == 0:
        raise empty_error(f"{path}: no data rows")

    has_output = output in frame.columns
    if require_output and not has_output:
        raise SchemaMismatch(f"{path}: missing output column '{output}'")
    columns = list(inputs) if inputs else [c for c in frame.columns if c != output and c not in RESERVED_COLUMNS]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaMismatch(f"{path}: missing input columns {missing}")
    if not columns:
        raise SchemaMismatch(f"{path}: no input columns")

    try:
        x = frame[columns].to_numpy(dtype=float)
        y = frame[output].to_numpy(dtype=float) if has_output else None
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from exc

    bad_rows = ~np.all(np.isfinite(x), axis=1)
    if y is not None:
        bad_rows |= ~np.isfinite(y)
    if np.any(bad_rows):
        row = int(np.flatnonzero(bad_rows)[0]) + 1
        raise DataError(f"{path}: row {row}: non-finite entry")

    if lik is not None and y is not None:
        if clamp_unit and lik.support == Support.UNIT:
            y = np.clip(y, UNIT_CLAMP, 1.0 - UNIT_CLAMP)
        inside = lik.dist.in_support(y)
        if not np.all(inside):
            row = int(np.flatnonzero(~inside)[0])
            raise DomainError(
                f"{path}: row {row + 1}: y={y[row]!r} is outside the {lik.support.value} support of {lik.id}"
            )
    logger.debug("loaded %d rows from %s", x.shape[0], path)
    return Dataset(x, y, columns, str(path))


def parse_grid(spec: str) -> np.ndarray:
    """'lo:hi:n' -> n evenly spaced points from lo to hi inclusive, as a column."""

    parts = spec.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"invalid grid '{spec}'; expected lo:hi:n") from None
    if n < 1 or not (np.isfinite(lo) and np.isfinite(hi)) or (n > 1 and not hi > lo):
        raise ConfigError(f"invalid grid '{spec}'; need n >= 1 and lo < hi")
    return np.linspace(lo, hi, n)[:, None]


def resolve_inputs(spec: str, columns: Optional[Sequence[str]] = None) -> Dataset:
    """A grid spec or a CSV of input columns."""

    if Path(spec).is_file():
        return load_dataset(spec, inputs=columns, require_output=False)
    x = parse_grid(spec)
    return Dataset(x, None, list(columns) if columns else ["x"])


def frame_to_csv(frame: pd.DataFrame) -> str:
    buf = io.StringIO()
    frame.to_csv(buf, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buf.getvalue()


def write_csv(path, frame: pd.DataFrame) -> Path:
    return atomic_write_text(path, frame_to_csv(frame))


def dataset_frame(x: np.ndarray, columns: Sequence[str], **extra: np.ndarray) -> pd.DataFrame:
    frame = pd.DataFrame(np.asarray(x, dtype=float), columns=list(columns))
    for name, values in extra.items():
        frame[name] = np.asarray(values)
    return frame
