"""Per-round record of an analyst/mechanism interaction."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Round", "Transcript"]

SCHEMA = "adaptive-analysts/transcript"
VERSION = 1


@dataclass(frozen=True)
class Round:
    t: int
    query_id: str
    answer: np.ndarray
    empirical: np.ndarray
    true_mean: np.ndarray = None
    noise: np.ndarray = None

    def __post_init__(self):
        for name in ("answer", "empirical", "true_mean", "noise"):
            value = getattr(self, name)
            if value is not None:
                arr = np.array(value, dtype=float).reshape(-1)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.empirical.shape != self.answer.shape:
            raise ValueError("empirical value and answer dimensions differ")
        if self.true_mean is not None and self.true_mean.shape != self.answer.shape:
            raise ValueError("true mean and answer dimensions differ")

    @property
    def d_q(self):
        return self.answer.shape[0]


@dataclass
class Transcript:
    """Rounds ``t = 1, 2, ...`` with no gaps, plus descriptors of both parties."""

    rounds: list = field(default_factory=list)
    mechanism: dict = field(default_factory=dict)
    analyst: dict = field(default_factory=dict)

    def append(self, t, query, answer, empirical, true_mean=None, noise=None):
        expected = len(self.rounds) + 1
        if t != expected:
            raise ValueError(f"round {t} appended out of order; expected {expected}")
        query_id = query if isinstance(query, str) else query.id
        record = Round(t, query_id, answer, empirical, true_mean, noise)
        if not isinstance(query, str) and record.d_q != query.d_q:
            raise ValueError(
                f"answer dimension {record.d_q} does not match query dimension {query.d_q}"
            )
        self.rounds.append(record)
        return record

    def __len__(self):
        return len(self.rounds)

    def __iter__(self):
        return iter(self.rounds)

    def __getitem__(self, i):
        return self.rounds[i]

    @property
    def answers(self):
        return [r.answer for r in self.rounds]

    @property
    def noise(self):
        return [r.noise for r in self.rounds]

    def to_dict(self):
        def arr(x):
            return None if x is None else x.tolist()

        return {
            "schema": SCHEMA,
            "version": VERSION,
            "mechanism": self.mechanism,
            "analyst": self.analyst,
            "rounds": [
                {
                    "t": r.t,
                    "query_id": r.query_id,
                    "answer": arr(r.answer),
                    "empirical": arr(r.empirical),
                    "true_mean": arr(r.true_mean),
                    "noise": arr(r.noise),
                }
                for r in self.rounds
            ],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc):
        if doc.get("schema") != SCHEMA or doc.get("version") != VERSION:
            raise ValueError("not a version-1 transcript document")
        tr = cls(mechanism=doc.get("mechanism", {}), analyst=doc.get("analyst", {}))
        for r in doc["rounds"]:
            tr.append(r["t"], r["query_id"], r["answer"], r["empirical"], r["true_mean"], r["noise"])
        return tr

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_csv(self, path_or_buffer=None):
        """Write rounds as ``t,query_id,answer...,empirical...,true_mean...``.

        Returns the CSV text when no destination is given.
        """
        width = max((r.d_q for r in self.rounds), default=0)
        header = ["t", "query_id"]
        for name in ("answer", "empirical", "true_mean"):
            header += [f"{name}_{j}" for j in range(width)]

        def cells(x):
            values = [] if x is None else [repr(float(v)) for v in x]
            return values + [""] * (width - len(values))

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for r in self.rounds:
            writer.writerow(
                [r.t, r.query_id] + cells(r.answer) + cells(r.empirical) + cells(r.true_mean)
            )
        text = buffer.getvalue()
        if path_or_buffer is None:
            return text
        if hasattr(path_or_buffer, "write"):
            path_or_buffer.write(text)
        else:
            with open(path_or_buffer, "w", newline="") as fh:
                fh.write(text)
        return None
