from __future__ import annotations

import csv
from dataclasses import dataclass, field

COLUMNS = ("iter", "K", "loglik", "penalized_loglik", "lambda", "max_beta_change", "pruned_ids")


@dataclass
class TraceRecord:
    iter: int
    K: int
    loglik: float
    penalized_loglik: float
    lam: float
    max_beta_change: float
    pruned_ids: tuple = ()


@dataclass
class FitTrace:
    """Per-iteration history of a fit.

    ``events`` collects notable numerical interventions (variance clamps,
    ridge jitter) as ``(iteration, message)`` pairs.
    """

    records: list = field(default_factory=list)
    events: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0
    settle_iter: int | None = None
    ids: object = None

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    def note(self, it: int, msg: str) -> None:
        self.events.append((it, msg))

    def column(self, name: str) -> list:
        attr = "lam" if name == "lambda" else name
        return [getattr(r, attr) for r in self.records]

    @property
    def K(self) -> list:
        return self.column("K")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.records:
                w.writerow([
                    r.iter,
                    r.K,
                    f"{r.loglik:.17g}",
                    f"{r.penalized_loglik:.17g}",
                    f"{r.lam:.17g}",
                    f"{r.max_beta_change:.17g}",
                    ";".join(str(i) for i in r.pruned_ids),
                ])

    @classmethod
    def from_csv(cls, path) -> "FitTrace":
        tr = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                ids = tuple(int(v) for v in row["pruned_ids"].split(";") if v)
                tr.append(TraceRecord(
                    int(row["iter"]),
                    int(row["K"]),
                    float(row["loglik"]),
                    float(row["penalized_loglik"]),
                    float(row["lambda"]),
                    float(row["max_beta_change"]),
                    ids,
                ))
        tr.n_iter = len(tr.records) - 1
        return tr
