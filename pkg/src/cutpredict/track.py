"""Added-method detection and survival labeling across a pull request.

Rename and move refactorings are recovered by matching method bodies: two
methods whose normalized token streams have a longest-common-subsequence
ratio at or above a threshold are treated as the same method.
"""

from __future__ import annotations

import enum
import functools
import io
import logging
import tokenize
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import pairwise
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import ingest
from ._kernels import lcs_length
from .dataset import LabeledSample, SurvivalLabel
from .extract import MethodIdentity, MethodRecord, ParseError, extract_snapshot
from .metrics import compute_features

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.85

_DROP = {
    tokenize.COMMENT,
    tokenize.NL,
    tokenize.NEWLINE,
    tokenize.INDENT,
    tokenize.DEDENT,
    tokenize.ENDMARKER,
}


class MatchKind(str, enum.Enum):
    EXACT = "ExactIdentity"
    RENAMED = "Renamed"
    MOVED = "Moved"
    RENAMED_AND_MOVED = "RenamedAndMoved"


@dataclass(frozen=True)
class MatchDecision:
    old_identity: MethodIdentity
    new_identity: MethodIdentity
    kind: MatchKind
    similarity: float


@functools.lru_cache(maxsize=1 << 16)
def _normalized_tokens(source_text: str, col_offset: int, doc_span: tuple | None) -> tuple[str, ...]:
    out: list[str] = []
    saw_name = False
    try:
        toks = list(tokenize.generate_tokens(io.StringIO(" " * col_offset + source_text + "\n").readline))
    except (tokenize.TokenError, IndentationError, SyntaxError):
        return tuple(source_text.split())
    for tok in toks:
        if tok.type in _DROP:
            continue
        if doc_span is not None and tok.type == tokenize.STRING and tok.start == doc_span:
            continue
        if not saw_name and tok.type == tokenize.NAME and tok.string not in ("def", "async"):
            # the definition's own name must not count against a rename
            out.append("<name>")
            saw_name = True
            continue
        out.append(tok.string)
    return tuple(out)


def body_tokens(rec: MethodRecord) -> tuple[str, ...]:
    """Token stream with comments, layout, docstring and the method name removed."""
    doc_span = None
    try:
        func = rec.syntax()
        first = func.body[0] if func.body else None
        if rec.docstring is not None and first is not None:
            # positions relative to the padded text, where line 1 is the def line
            col = first.col_offset
            if first.lineno == func.lineno:
                col = col - func.col_offset + rec.col_offset
            doc_span = (first.lineno - func.lineno + 1, col)
    except Exception:  # noqa: BLE001
        pass
    return _normalized_tokens(rec.source_text, rec.col_offset, doc_span)


class _Vocab(dict):
    def encode(self, toks: Sequence[str]) -> np.ndarray:
        return np.fromiter((self.setdefault(t, len(self)) for t in toks), dtype=np.int64, count=len(toks))


def similarity(a: Sequence[str], b: Sequence[str], vocab: _Vocab | None = None) -> float:
    """LCS length over the mean length of two token sequences."""
    if not a and not b:
        return 1.0
    if tuple(a) == tuple(b):
        return 1.0
    vocab = vocab if vocab is not None else _Vocab()
    lcs = lcs_length(vocab.encode(a), vocab.encode(b))
    return 2.0 * lcs / (len(a) + len(b))


def _kind(old: MethodIdentity, new: MethodIdentity) -> MatchKind:
    same_place = old.file_path == new.file_path and old.scope_path == new.scope_path
    if same_place:
        return MatchKind.RENAMED
    if old.name == new.name:
        return MatchKind.MOVED
    return MatchKind.RENAMED_AND_MOVED


def match_methods(
    prev: Mapping[MethodIdentity, MethodRecord],
    next: Mapping[MethodIdentity, MethodRecord],
    threshold: float = DEFAULT_THRESHOLD,
) -> list[MatchDecision]:
    """Pair methods of two revisions.

    Identical identities always match. Remaining methods are paired greedily
    by descending body similarity (ties by identity order) when the score
    reaches ``threshold``.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    vocab = _Vocab()
    decisions = []
    for ident in sorted(prev.keys() & next.keys()):
        sim = similarity(body_tokens(prev[ident]), body_tokens(next[ident]), vocab)
        decisions.append(MatchDecision(ident, ident, MatchKind.EXACT, sim))

    old_left = sorted(prev.keys() - next.keys())
    new_left = sorted(next.keys() - prev.keys())
    if not old_left or not new_left:
        return decisions
    old_toks = {i: body_tokens(prev[i]) for i in old_left}
    new_toks = {i: body_tokens(next[i]) for i in new_left}
    candidates = []
    for o in old_left:
        a = old_toks[o]
        for n in new_left:
            b = new_toks[n]
            total = len(a) + len(b)
            if total and 2.0 * min(len(a), len(b)) / total < threshold:
                continue
            sim = similarity(a, b, vocab)
            if sim >= threshold:
                candidates.append((-sim, o, n))
    candidates.sort()
    used_old: set[MethodIdentity] = set()
    used_new: set[MethodIdentity] = set()
    for neg_sim, o, n in candidates:
        if o in used_old or n in used_new:
            continue
        used_old.add(o)
        used_new.add(n)
        decisions.append(MatchDecision(o, n, _kind(o, n), -neg_sim))
    return decisions


class MethodSource:
    """Per-revision method maps read from a repository, cached."""

    def __init__(
        self,
        repo_path: str,
        path_filter: Sequence[str] | None = None,
        only_paths: Iterable[str] | None = None,
    ) -> None:
        self.repo_path = repo_path
        self.path_filter = path_filter
        self.only_paths = set(only_paths) if only_paths is not None else None
        self.skipped: list[tuple[str, ParseError]] = []
        self._methods: dict[str, dict[MethodIdentity, MethodRecord]] = {}
        self._files: dict[str, frozenset[str]] = {}

    def _load(self, rev: str) -> None:
        snap = ingest.snapshot(self.repo_path, rev, self.path_filter, self.only_paths)
        errors: list[ParseError] = []
        self._methods[rev] = extract_snapshot(snap, errors)
        self._files[rev] = frozenset(snap.files)
        self.skipped.extend((rev, e) for e in errors)

    def methods(self, rev: str) -> dict[MethodIdentity, MethodRecord]:
        if rev not in self._methods:
            self._load(rev)
        return self._methods[rev]

    def files(self, rev: str) -> frozenset[str]:
        if rev not in self._files:
            self._load(rev)
        return self._files[rev]

    def revisions(self, start: str, end: str, chain: bool) -> list[str]:
        if start == end:
            return [start]
        if chain:
            return [start, *ingest.intermediate_revisions(self.repo_path, start, end)]
        return [start, end]


def added_methods(
    triple: ingest.RevisionTriple,
    source: MethodSource,
    threshold: float = DEFAULT_THRESHOLD,
    chain: bool = False,
) -> set[MethodIdentity]:
    """Methods at head that have no counterpart at base."""
    if triple.base == triple.head:
        return set()
    revs = source.revisions(triple.base, triple.head, chain)
    preexisting = {ident: True for ident in source.methods(revs[0])}
    for a, b in pairwise(revs):
        step = {}
        for d in match_methods(source.methods(a), source.methods(b), threshold):
            step[d.new_identity] = preexisting[d.old_identity]
        for ident in source.methods(b):
            step.setdefault(ident, False)
        preexisting = step
    return {ident for ident, old in preexisting.items() if not old}


def label_survival(
    added: Iterable[MethodIdentity],
    triple: ingest.RevisionTriple,
    source: MethodSource,
    threshold: float = DEFAULT_THRESHOLD,
    chain: bool = False,
) -> dict[MethodIdentity, SurvivalLabel]:
    """Follow each added method from head to merge and label its fate."""
    current: dict[MethodIdentity, MethodIdentity | None] = {a: a for a in added}
    last_seen = dict(current)
    if triple.head != triple.merge:
        for a, b in pairwise(source.revisions(triple.head, triple.merge, chain)):
            forward = {
                d.old_identity: d.new_identity
                for d in match_methods(source.methods(a), source.methods(b), threshold)
            }
            for orig, cur in current.items():
                if cur is None:
                    continue
                current[orig] = forward.get(cur)
                if current[orig] is not None:
                    last_seen[orig] = current[orig]
    merge_files = source.files(triple.merge)
    labels = {}
    for orig, cur in current.items():
        if cur is not None:
            labels[orig] = SurvivalLabel.SURVIVED
        elif last_seen[orig].file_path not in merge_files:
            labels[orig] = SurvivalLabel.DELETED_FILE
        else:
            labels[orig] = SurvivalLabel.DELETED_METHOD
    return labels


@dataclass
class SkipEntry:
    pr_id: str
    stage: str
    message: str
    file_path: str = ""

    def to_json(self) -> dict:
        return {"pr_id": self.pr_id, "stage": self.stage, "file_path": self.file_path,
                "message": self.message}


@dataclass
class MineResult:
    samples: list[LabeledSample] = field(default_factory=list)
    skipped: list[SkipEntry] = field(default_factory=list)


def _changed_paths(repo: str, triple: ingest.RevisionTriple, chain: bool) -> set[str]:
    paths: set[str] = set()
    for start, end in ((triple.base, triple.head), (triple.head, triple.merge)):
        if start == end:
            continue
        revs = [start, *ingest.intermediate_revisions(repo, start, end)] if chain else [start, end]
        for a, b in pairwise(revs):
            paths |= ingest.changed_python_paths(repo, a, b)
    return paths


def samples_for_triple(
    repo: str,
    triple: ingest.RevisionTriple,
    threshold: float = DEFAULT_THRESHOLD,
    chain: bool = False,
    path_filter: Sequence[str] | None = None,
) -> MineResult:
    source = MethodSource(repo, path_filter, _changed_paths(repo, triple, chain))
    added = added_methods(triple, source, threshold, chain)
    labels = label_survival(added, triple, source, threshold, chain)
    n_revisions = len(ingest.intermediate_revisions(repo, triple.head, triple.merge))
    head_methods = source.methods(triple.head)
    result = MineResult()
    for ident in sorted(added):
        rec = head_methods[ident]
        result.samples.append(
            LabeledSample(
                pr_id=triple.pr_id,
                identity=ident,
                label=labels[ident],
                features=compute_features(rec),
                base=triple.base,
                head=triple.head,
                merge=triple.merge,
                review_revisions=n_revisions,
                start_line=rec.start_line,
                end_line=rec.end_line,
                source_text=rec.source_text,
            )
        )
    for rev, err in source.skipped:
        result.skipped.append(SkipEntry(triple.pr_id, f"parse@{rev[:12]}", err.message, err.file_path))
    return result


def build_samples(
    repo: str,
    triples: Sequence[ingest.RevisionTriple],
    threshold: float = DEFAULT_THRESHOLD,
    chain: bool = False,
    path_filter: Sequence[str] | None = None,
    workers: int = 1,
) -> MineResult:
    """Mine labeled samples for every triple; failing triples land in the skip report."""

    def run(triple: ingest.RevisionTriple) -> MineResult:
        try:
            resolved = ingest.resolve_triple(repo, triple.base, triple.head, triple.merge, triple.pr_id)
            return samples_for_triple(repo, resolved, threshold, chain, path_filter)
        except ingest.GitError as exc:
            log.warning("skipping PR %s: %s", triple.pr_id, exc)
            return MineResult(skipped=[SkipEntry(triple.pr_id, type(exc).__name__, str(exc))])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, triples))
    else:
        parts = [run(t) for t in triples]
    merged = MineResult()
    for part in parts:
        merged.samples.extend(part.samples)
        merged.skipped.extend(part.skipped)
    merged.samples.sort(key=LabeledSample.sort_key)
    return merged
