"""CSV log and report file formats.

Logs are plain CSV with header ``t_s,fz_n,mz_nm`` at 100 Hz, values in SI
units written with full precision so write/load round-trips bit-exactly.
Reports are flat YAML key/value documents with deterministic key order.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .analysis import FtSeries
from .errors import LogFormatError
from .sim import FtSample

LOG_HEADER = "t_s,fz_n,mz_nm"


def write_log(path, samples) -> None:
    lines = [LOG_HEADER]
    for s in samples:
        lines.append(f"{s.t!r},{s.fz!r},{s.mz!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_log(path, condition: str | None = None) -> FtSeries:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != LOG_HEADER:
        raise LogFormatError(f"expected header {LOG_HEADER!r}", line=1)
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise LogFormatError("expected 3 comma-separated values",
                                 line=lineno)
        try:
            t, fz, mz = (float(p) for p in parts)
        except ValueError:
            raise LogFormatError(f"non-numeric value in {line!r}",
                                 line=lineno) from None
        samples.append(FtSample(t=t, fz=fz, mz=mz))
    if not samples:
        raise LogFormatError("log contains no samples")
    try:
        return FtSeries(samples=samples, condition=condition)
    except ValueError as exc:
        raise LogFormatError(str(exc)) from exc


def write_report(path, data: dict) -> None:
    Path(path).write_text(format_report(data))


def format_report(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=True, default_flow_style=False)
