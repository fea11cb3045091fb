"""CSV tables and run manifests."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

__all__ = [
    "SCHEMA_VERSION",
    "SERIES_COLUMNS",
    "CORRELATION_COLUMNS",
    "fmt",
    "write_table",
    "series_rows",
    "correlation_rows",
    "write_json",
]

SCHEMA_VERSION = 1
SERIES_COLUMNS = ("delta_c", "t", "re_zeta", "im_zeta", "re_err", "im_err")
CORRELATION_COLUMNS = ("delta_c", "cor", "cor_err", "g2", "g2_err", "method", "seed")


def fmt(x) -> str:
    """17 significant digits for floats; everything else via ``str``."""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, columns, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path = Path(path)
    _atomic_write(path, buf.getvalue())
    return path


def series_rows(series_list):
    for s in series_list:
        for t, z, re_err, im_err in zip(s.times, s.values, s.re_err, s.im_err):
            yield (int(s.separation), float(t), float(z.real), float(z.imag), float(re_err), float(im_err))


def correlation_rows(estimates, seed, prefix=()):
    for e in estimates:
        yield (*prefix, int(e.separation), float(e.cor), float(e.cor_err), float(e.g2), float(e.g2_err),
               e.method, int(seed))


def write_json(path, doc) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
