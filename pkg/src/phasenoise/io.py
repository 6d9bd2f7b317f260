"""File formats: PSD traces (CSV), fit reports (JSON) and time series (CSV or binary).

Binary time-series layout (all little-endian)::

    offset  size  field
    0       4     magic b"PNTS"
    4       4     uint32 sample count n
    8       8     float64 sample interval dt in seconds
    16      8*n   float64 samples alpha in seconds
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .fit import FitReport
from .spectral import PsdTrace

__all__ = [
    "PSD_HEADER",
    "SERIES_HEADER",
    "SERIES_MAGIC",
    "ParseError",
    "SchemaError",
    "parse_psd_csv",
    "write_psd_csv",
    "write_fit_report_json",
    "read_fit_report_json",
    "write_series_csv",
    "read_series_csv",
    "write_series_binary",
    "read_series_binary",
    "atomic_write",
]

PSD_HEADER = "offset_hz,psd_dbc_hz"
SERIES_HEADER = "t_s,alpha_s"
SERIES_MAGIC = b"PNTS"
_SERIES_STRUCT = struct.Struct("<4sId")


class ParseError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, path, line: int | None, message: str):
        where = f"{path}" if line is None else f"{path}:{line}"
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


class SchemaError(ValueError):
    """A fit report JSON document lacks or adds keys."""


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_text(path) -> str:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(path, None, f"not UTF-8 text ({exc.reason})") from None


def _lines(text: str) -> list[str]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


def _parse_number(path, lineno: int, token: str) -> float:
    token = token.strip()
    try:
        value = float(token)
    except ValueError:
        raise ParseError(path, lineno, f"not a number: {token!r}") from None
    if not math.isfinite(value):
        raise ParseError(path, lineno, f"non-finite value: {token!r}")
    return value


def _parse_two_columns(path, header: str) -> tuple[np.ndarray, np.ndarray]:
    lines = _lines(_read_text(path))
    if not lines or lines[0].lstrip("\ufeff") != header:
        got = lines[0] if lines else ""
        raise ParseError(path, 1, f"expected header {header!r}, got {got!r}")
    a, b = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(path, lineno, f"expected 2 comma-separated fields, got {len(parts)}")
        a.append(_parse_number(path, lineno, parts[0]))
        b.append(_parse_number(path, lineno, parts[1]))
        if len(a) > 1 and a[-1] <= a[-2]:
            raise ParseError(path, lineno, "first column must be strictly increasing")
    if not a:
        raise ParseError(path, 2, "no data rows")
    return np.array(a), np.array(b)


def parse_psd_csv(path) -> PsdTrace:
    """Read a phase-noise trace from ``offset_hz,psd_dbc_hz`` CSV."""
    freqs, levels = _parse_two_columns(path, PSD_HEADER)
    if freqs[0] <= 0:
        raise ParseError(path, 2, "offset frequencies must be > 0")
    return PsdTrace(freqs, levels, {"source": str(path)})


def _rows(header: str, a, b) -> bytes:
    out = [header]
    out.extend(f"{float(x)!r},{float(y)!r}" for x, y in zip(a, b))
    return ("\n".join(out) + "\n").encode("utf-8")


def write_psd_csv(trace: PsdTrace, path) -> None:
    """Write ``trace`` as CSV with shortest round-tripping float text."""
    if not np.all(np.isfinite(trace.levels)):
        raise ValueError("cannot serialize -inf levels to CSV")
    atomic_write(path, _rows(PSD_HEADER, trace.freqs, trace.levels))


def write_fit_report_json(report: FitReport, path) -> None:
    """Serialize a report; NaN or infinite fields raise ``ValueError``."""
    data = report.to_dict()
    try:
        text = json.dumps(data, indent=2, allow_nan=False)
    except ValueError as exc:
        raise ValueError(f"fit report not serializable ({exc})") from None
    atomic_write(path, (text + "\n").encode("utf-8"))


def read_fit_report_json(path) -> FitReport:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be an object")
    try:
        return FitReport.from_dict(data)
    except KeyError as exc:
        raise SchemaError(f"{path}: {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from None


def write_series_csv(dt: float, samples, path) -> None:
    samples = np.asarray(samples, dtype=float).ravel()
    t = np.arange(samples.size) * dt
    atomic_write(path, _rows(SERIES_HEADER, t, samples))


def read_series_csv(path) -> tuple[float, np.ndarray]:
    """Return ``(dt, samples)``; the time column must be uniformly spaced."""
    t, alpha = _parse_two_columns(path, SERIES_HEADER)
    if t.size < 2:
        raise ParseError(path, None, "need at least 2 samples to infer dt")
    dt = (t[-1] - t[0]) / (t.size - 1)
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0.0):
        raise ParseError(path, None, "time column is not uniformly spaced")
    return float(dt), alpha


def write_series_binary(dt: float, samples, path) -> None:
    samples = np.asarray(samples, dtype="<f8").ravel()
    if samples.size >= 2**32:
        raise ValueError("series too long for the binary format")
    header = _SERIES_STRUCT.pack(SERIES_MAGIC, samples.size, float(dt))
    atomic_write(path, header + samples.tobytes())


def read_series_binary(path) -> tuple[float, np.ndarray]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if len(raw) < _SERIES_STRUCT.size:
        raise ParseError(path, None, "file shorter than the 16-byte header")
    magic, n, dt = _SERIES_STRUCT.unpack_from(raw)
    if magic != SERIES_MAGIC:
        raise ParseError(path, None, f"bad magic {magic!r}")
    expected = _SERIES_STRUCT.size + 8 * n
    if len(raw) != expected:
        raise ParseError(path, None, f"expected {expected} bytes for n={n}, got {len(raw)}")
    samples = np.frombuffer(raw, dtype="<f8", offset=_SERIES_STRUCT.size).astype(float)
    return float(dt), samples
