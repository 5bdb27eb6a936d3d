"""Labeled samples and the line-delimited JSON dataset format."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from .extract import MethodIdentity
from .metrics import FEATURE_NAMES, FeatureVector

SCHEMA_VERSION = 1


class SurvivalLabel(str, enum.Enum):
    SURVIVED = "Survived"
    DELETED_METHOD = "DeletedMethodLevel"
    DELETED_FILE = "DeletedFileLevel"


def schema_hash(names: Iterable[str] = FEATURE_NAMES) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class LabeledSample:
    pr_id: str
    identity: MethodIdentity
    label: SurvivalLabel
    features: FeatureVector
    base: str = ""
    head: str = ""
    merge: str = ""
    review_revisions: int = 0
    start_line: int = 0
    end_line: int = 0
    source_text: str = field(default="", compare=False)

    @property
    def target(self) -> int | None:
        """1 = deleted, 0 = survived, None for file-level deletions (never modeled)."""
        if self.label is SurvivalLabel.DELETED_METHOD:
            return 1
        if self.label is SurvivalLabel.SURVIVED:
            return 0
        return None

    def sort_key(self):
        return (self.pr_id, self.identity)

    def to_json(self) -> dict:
        return {
            "pr_id": self.pr_id,
            "file_path": self.identity.file_path,
            "scope_path": list(self.identity.scope_path),
            "name": self.identity.name,
            "label": self.label.value,
            "base": self.base,
            "head": self.head,
            "merge": self.merge,
            "review_revisions": self.review_revisions,
            "start_line": self.start_line,
            "end_line": self.end_line,
            "features": self.features.as_dict(),
            "source_text": self.source_text,
        }

    @classmethod
    def from_json(cls, row: dict) -> "LabeledSample":
        return cls(
            pr_id=str(row["pr_id"]),
            identity=MethodIdentity(row["file_path"], tuple(row["scope_path"]), row["name"]),
            label=SurvivalLabel(row["label"]),
            features=FeatureVector.from_dict(row["features"]),
            base=row.get("base", ""),
            head=row.get("head", ""),
            merge=row.get("merge", ""),
            review_revisions=int(row.get("review_revisions", 0)),
            start_line=int(row.get("start_line", 0)),
            end_line=int(row.get("end_line", 0)),
            source_text=row.get("source_text", ""),
        )


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    samples: list[LabeledSample] = field(default_factory=list)
    feature_names: tuple[str, ...] = FEATURE_NAMES
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        self.samples = sorted(self.samples, key=LabeledSample.sort_key)

    def __len__(self) -> int:
        return len(self.samples)

    def header(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "schema_hash": schema_hash(self.feature_names),
            "feature_names": list(self.feature_names),
            "n_samples": len(self.samples),
        }

    def modeled(self) -> list[LabeledSample]:
        return [s for s in self.samples if s.target is not None]

    def write(self, fp: IO[str]) -> None:
        fp.write(json.dumps(self.header()) + "\n")
        for s in self.samples:
            fp.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            self.write(fp)

    @classmethod
    def read(cls, fp: IO[str]) -> "Dataset":
        first = fp.readline()
        if not first.strip():
            raise DatasetError("dataset is empty (no header line)")
        header = json.loads(first)
        names = tuple(header.get("feature_names", ()))
        if header.get("schema_hash") != schema_hash(names) or names != FEATURE_NAMES:
            raise DatasetError("dataset feature schema does not match this version")
        samples = []
        for lineno, line in enumerate(fp, start=2):
            if not line.strip():
                continue
            try:
                samples.append(LabeledSample.from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise DatasetError(f"line {lineno}: {exc}") from exc
        return cls(samples=samples, feature_names=names, schema_version=header["schema_version"])

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        with open(path, encoding="utf-8") as fp:
            return cls.read(fp)
