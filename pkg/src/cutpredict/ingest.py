"""Resolve pull-request revisions and read Python file snapshots out of git."""

from __future__ import annotations

import fnmatch
import posixpath
import subprocess
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class GitError(Exception):
    """Base class for repository access failures."""


class UnresolvableRef(GitError):
    pass


class AncestryViolation(GitError):
    pass


class IoFailure(GitError):
    pass


@dataclass(frozen=True)
class RevisionTriple:
    base: str
    head: str
    merge: str
    pr_id: str = ""


@dataclass(frozen=True)
class FileSnapshot:
    revision: str
    files: dict[str, str] = field(default_factory=dict)


def _git(repo_path: str, *args: str, check: bool = True) -> subprocess.CompletedProcess:
    try:
        proc = subprocess.run(
            ["git", "-C", str(repo_path), *args],
            capture_output=True,
        )
    except OSError as exc:
        raise IoFailure(f"cannot run git: {exc}") from exc
    if check and proc.returncode != 0:
        raise IoFailure(
            f"git {' '.join(args)} failed: {proc.stderr.decode(errors='replace').strip()}"
        )
    return proc


def resolve_ref(repo_path: str, ref: str) -> str:
    proc = _git(repo_path, "rev-parse", "--verify", "--quiet", f"{ref}^{{commit}}", check=False)
    if proc.returncode != 0:
        raise UnresolvableRef(f"cannot resolve {ref!r} in {repo_path}")
    return proc.stdout.decode().strip()


def is_ancestor(repo_path: str, ancestor: str, descendant: str) -> bool:
    if ancestor == descendant:
        return True
    proc = _git(repo_path, "merge-base", "--is-ancestor", ancestor, descendant, check=False)
    if proc.returncode not in (0, 1):
        raise IoFailure(proc.stderr.decode(errors="replace").strip())
    return proc.returncode == 0


def resolve_triple(
    repo_path: str, base: str, head: str, merge: str, pr_id: str = ""
) -> RevisionTriple:
    """Resolve three refs to commit ids and check base <= head <= merge."""
    b = resolve_ref(repo_path, base)
    h = resolve_ref(repo_path, head)
    m = resolve_ref(repo_path, merge)
    if not is_ancestor(repo_path, b, h):
        raise AncestryViolation(f"base {base} is not an ancestor of head {head}")
    if not is_ancestor(repo_path, h, m):
        raise AncestryViolation(f"head {head} is not an ancestor of merge {merge}")
    return RevisionTriple(base=b, head=h, merge=m, pr_id=pr_id)


def normalize_path(path: str) -> str:
    path = path.replace("\\", "/")
    norm = posixpath.normpath(path)
    return norm.lstrip("/") if norm != "." else ""


def _matches(path: str, patterns: Sequence[str] | None) -> bool:
    if not patterns:
        return True
    # fnmatch's "*" crosses "/", so "src/**" and "src/*" both cover subdirectories
    return any(fnmatch.fnmatchcase(path, p) for p in patterns)


def list_python_files(repo_path: str, revision: str) -> list[str]:
    proc = _git(repo_path, "ls-tree", "-r", "-z", "--full-tree", revision, check=False)
    if proc.returncode != 0:
        raise UnresolvableRef(f"cannot list tree of {revision!r}")
    paths = []
    for entry in proc.stdout.split(b"\0"):
        if not entry:
            continue
        meta, _, path = entry.partition(b"\t")
        mode, kind, _ = meta.split(b" ", 2)
        if kind != b"blob" or mode == b"120000":
            continue
        p = path.decode("utf-8", errors="surrogateescape")
        if p.endswith(".py"):
            paths.append(normalize_path(p))
    return sorted(paths)


def _read_blobs(repo_path: str, revision: str, paths: list[str]) -> dict[str, bytes]:
    if not paths:
        return {}
    request = "".join(f"{revision}:{p}\n" for p in paths).encode("utf-8", "surrogateescape")
    try:
        proc = subprocess.run(
            ["git", "-C", str(repo_path), "cat-file", "--batch"],
            input=request,
            capture_output=True,
        )
    except OSError as exc:
        raise IoFailure(f"cannot run git: {exc}") from exc
    if proc.returncode != 0:
        raise IoFailure(proc.stderr.decode(errors="replace").strip())
    out = proc.stdout
    blobs: dict[str, bytes] = {}
    pos = 0
    for p in paths:
        nl = out.index(b"\n", pos)
        header = out[pos:nl].split()
        pos = nl + 1
        if len(header) < 3 or header[-1] == b"missing":
            raise IoFailure(f"missing blob {p} at {revision}")
        size = int(header[2])
        blobs[p] = out[pos:pos + size]
        pos += size + 1
    return blobs


def snapshot(
    repo_path: str,
    revision: str,
    path_filter: Sequence[str] | None = None,
    only_paths: Iterable[str] | None = None,
) -> FileSnapshot:
    """All ``.py`` files at ``revision`` matching ``path_filter``, keyed by sorted path.

    ``only_paths`` further restricts the snapshot to an explicit path set.
    Files containing NUL bytes are treated as binary and skipped; other bytes
    are decoded as UTF-8 with replacement characters.
    """
    rev = resolve_ref(repo_path, revision)
    paths = [p for p in list_python_files(repo_path, rev) if _matches(p, path_filter)]
    if only_paths is not None:
        wanted = {normalize_path(p) for p in only_paths}
        paths = [p for p in paths if p in wanted]
    blobs = _read_blobs(repo_path, rev, paths)
    files = {}
    for p in paths:
        data = blobs[p]
        if b"\0" in data:
            continue
        files[p] = data.decode("utf-8", errors="replace")
    return FileSnapshot(revision=rev, files=files)


def first_parent(repo_path: str, revision: str) -> str | None:
    proc = _git(repo_path, "rev-parse", "--verify", "--quiet", f"{revision}^1", check=False)
    return proc.stdout.decode().strip() if proc.returncode == 0 else None


def intermediate_revisions(repo_path: str, start: str, end: str) -> list[str]:
    """First-parent chain from ``start`` (exclusive) to ``end`` (inclusive), oldest first."""
    a = resolve_ref(repo_path, start)
    b = resolve_ref(repo_path, end)
    if a == b:
        return []
    if not is_ancestor(repo_path, a, b):
        raise AncestryViolation(f"{start} is not an ancestor of {end}")
    proc = _git(repo_path, "rev-list", "--first-parent", "--reverse", f"{a}..{b}")
    revs = proc.stdout.decode().split()
    if not revs or first_parent(repo_path, revs[0]) != a:
        raise AncestryViolation(f"{start} is not on the first-parent chain of {end}")
    return revs


def changed_python_paths(repo_path: str, a: str, b: str) -> set[str]:
    """Paths of ``.py`` files that differ between two revisions (renames split)."""
    if a == b:
        return set()
    proc = _git(repo_path, "diff", "--name-only", "--no-renames", "-z", a, b)
    return {
        normalize_path(p.decode("utf-8", errors="surrogateescape"))
        for p in proc.stdout.split(b"\0")
        if p and p.endswith(b".py")
    }
