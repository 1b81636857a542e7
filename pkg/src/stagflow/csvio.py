"""Atomic CSV / text output helpers shared by the driver and statistics."""

import os
import tempfile


def atomic_write_text(path, text):
    """Write via a temp file and rename so readers never see a torn file."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, schema, colnames, rows):
    """CSV with a schema-version comment line; floats in full precision."""
    lines = [f"# stagflow-csv v1 {schema}"]
    lines.append(",".join(colnames))
    for row in rows:
        cells = []
        for name in colnames:
            v = row[name]
            cells.append(repr(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
