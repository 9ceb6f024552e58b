"""Per-epoch training records and their CSV serialization.

The CSV layout is frozen: ``epoch,loss,train_acc,test_acc,diverged`` plus
one ``angle_l<i>`` column per tracked layer.  Values are written with
``repr`` so that a re-run with the same seed produces a byte-identical
file.  Wall time is kept on the record for reporting (it ends up in
summary.json) but deliberately never written to metrics.csv, which must
be reproducible.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass


@dataclass
class MetricsRecord:
    epoch: int
    loss: float
    train_acc: float
    test_acc: float | None = None
    angles: tuple[float, ...] | None = None  # mean alignment angle per layer, degrees
    diverged: bool = False
    wall_time_s: float = 0.0

    def validate(self):
        if self.diverged:  # a diverged epoch may carry NaN values
            return
        if not 0.0 <= self.train_acc <= 1.0:
            raise ValueError(f"train_acc out of [0, 1]: {self.train_acc}")
        if self.test_acc is not None and not 0.0 <= self.test_acc <= 1.0:
            raise ValueError(f"test_acc out of [0, 1]: {self.test_acc}")
        for a in self.angles or ():
            if not 0.0 <= a <= 180.0:
                raise ValueError(f"alignment angle out of [0, 180]: {a}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_header(n_angle_layers: int) -> list[str]:
    cols = ["epoch", "loss", "train_acc", "test_acc", "diverged"]
    cols += [f"angle_l{i + 1}" for i in range(n_angle_layers)]
    return cols


def metrics_to_csv(records: list[MetricsRecord]) -> str:
    """Render records as a CSV string (deterministic for identical runs)."""
    n_angles = 0
    for r in records:
        if r.angles is not None:
            n_angles = max(n_angles, len(r.angles))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(metrics_header(n_angles))
    for r in records:
        row = [_fmt(r.epoch), _fmt(r.loss), _fmt(r.train_acc),
               _fmt(r.test_acc), _fmt(r.diverged)]
        angles = r.angles or ()
        row += [_fmt(a) for a in angles]
        row += [""] * (n_angles - len(angles))
        w.writerow(row)
    return buf.getvalue()


def metrics_from_csv(text: str) -> list[MetricsRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n_angles = sum(1 for c in header if c.startswith("angle_l"))
    out = []
    for row in body:
        angles = tuple(float(v) for v in row[5:5 + n_angles] if v != "")
        out.append(MetricsRecord(
            epoch=int(row[0]),
            loss=float(row[1]),
            train_acc=float(row[2]),
            test_acc=float(row[3]) if row[3] != "" else None,
            diverged=row[4] == "1",
            angles=angles if angles else None,
        ))
    return out
