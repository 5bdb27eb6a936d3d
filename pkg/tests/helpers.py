"""Scripted git repositories with pinned identities and timestamps."""

from __future__ import annotations

import os
import subprocess
import textwrap
from pathlib import Path

_ENV = {
    "GIT_AUTHOR_NAME": "Fixture Author",
    "GIT_AUTHOR_EMAIL": "author@example.invalid",
    "GIT_COMMITTER_NAME": "Fixture Author",
    "GIT_COMMITTER_EMAIL": "author@example.invalid",
    "GIT_CONFIG_NOSYSTEM": "1",
    "GIT_CONFIG_GLOBAL": os.devnull,
}


def git(repo: Path, *args: str, env: dict | None = None) -> str:
    full = {**os.environ, **_ENV, **(env or {})}
    out = subprocess.run(["git", "-C", str(repo), *args], check=True, capture_output=True, text=True, env=full)
    return out.stdout.strip()


class ScriptedRepo:
    """Commit file states one step at a time; ``None`` content deletes a file."""

    def __init__(self, root: Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        git(self.root, "init", "-q", "-b", "main")
        self._tick = 0

    def commit(self, files: dict[str, str | None], message: str = "change") -> str:
        for rel, content in files.items():
            path = self.root / rel
            if content is None:
                git(self.root, "rm", "-q", rel)
                continue
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(textwrap.dedent(content).lstrip("\n"), encoding="utf-8")
            git(self.root, "add", rel)
        self._tick += 1
        hours, minutes = divmod(self._tick, 60)
        stamp = f"2024-01-01T{hours:02d}:{minutes:02d}:00+0000"
        git(self.root, "commit", "-q", "--allow-empty", "-m", message,
            env={"GIT_AUTHOR_DATE": stamp, "GIT_COMMITTER_DATE": stamp})
        return git(self.root, "rev-parse", "HEAD")


CORE_BASE = '''
class Core:
    def existing(self, values):
        total = 0
        for v in values:
            total += v * 2
        return total

    def old_helper(self, text, sep=","):
        parts = [p.strip() for p in text.split(sep)]
        cleaned = [p.lower() for p in parts if p]
        return sep.join(sorted(set(cleaned)))
'''

KEPT = '''
    def added_kept(self, items):
        """Count truthy items."""
        return sum(1 for item in items if item)
'''

DROPPED = '''
    def added_dropped(self, a, b):
        if a > b:
            print("a wins", a)
            return a - b
        return b - a
'''

RENAMED_BEFORE = '''
    def added_renamed(self, mapping, key, default=None):
        value = mapping.get(key, default)
        if value is None:
            raise KeyError(key)
        return str(value).upper()
'''

RENAMED_AFTER = RENAMED_BEFORE.replace("added_renamed", "renamed_done")

RENAME_MOVE_BEFORE = '''
    def added_rename_move(self, rows, width=10):
        lines = []
        for row in rows:
            cells = [str(c).ljust(width) for c in row]
            lines.append("|".join(cells))
        return "\\n".join(lines)
'''

MOVED = '''
def added_moved(path, retries=3):
    attempt = 0
    while attempt < retries:
        try:
            with open(path) as fp:
                return fp.read()
        except OSError:
            attempt += 1
    return None
'''

SCRATCH = '''
def scratch_fn(n):
    acc = []
    for i in range(n):
        if i % 3 == 0:
            acc.append(i * i)
    return acc
'''


def _util(*, moved: bool, rename_move: bool) -> str:
    text = "import os\n\n\nclass Util:\n    MARKER = 1\n"
    if rename_move:
        text += RENAME_MOVE_BEFORE.replace("added_rename_move", "format_table")
    if moved:
        text += "\n" + MOVED
    return text


# expected labels for the PR in build_tracking_repo
EXPECTED_LABELS = {
    ("pkg/core.py", ("Core",), "added_kept"): "Survived",
    ("pkg/core.py", ("Core",), "added_dropped"): "DeletedMethodLevel",
    ("pkg/core.py", ("Core",), "added_renamed"): "Survived",
    ("pkg/core.py", ("Core",), "added_rename_move"): "Survived",
    ("pkg/core.py", (), "added_moved"): "Survived",
    ("pkg/scratch.py", (), "scratch_fn"): "DeletedFileLevel",
}


def build_tracking_repo(root: Path) -> dict[str, str]:
    """Fixture history: base, PR head, one review commit, merge.

    At head the PR adds six methods and renames a pre-existing one (which
    must not count as added). Review then renames, moves, deletes and
    removes a whole file.
    """
    repo = ScriptedRepo(root)
    core_head = (
        CORE_BASE.replace("old_helper", "new_helper")
        + KEPT + DROPPED + RENAMED_BEFORE + RENAME_MOVE_BEFORE + "\n" + MOVED
    )
    shas = {}
    shas["base"] = repo.commit({
        "pkg/__init__.py": "",
        "pkg/core.py": CORE_BASE,
        "README.txt": "fixture\n",
    }, "base")
    shas["head"] = repo.commit({"pkg/core.py": core_head, "pkg/scratch.py": SCRATCH}, "pr: add methods")
    core_review = (
        CORE_BASE.replace("old_helper", "new_helper")
        + KEPT + DROPPED + RENAMED_AFTER + RENAME_MOVE_BEFORE
    )
    shas["review"] = repo.commit({
        "pkg/core.py": core_review,
        "pkg/util.py": _util(moved=True, rename_move=False),
    }, "review: rename and move")
    core_merge = CORE_BASE.replace("old_helper", "new_helper") + KEPT + RENAMED_AFTER
    shas["merge"] = repo.commit({
        "pkg/core.py": core_merge,
        "pkg/util.py": _util(moved=True, rename_move=True),
        "pkg/scratch.py": None,
    }, "review: drop and relocate")
    shas["repo"] = str(root)
    return shas


def _corpus_method(pr: int, j: int, doomed: bool) -> str:
    # doomed methods are longer, wordier and chattier, like the real signal
    name = f"compute_value_{pr}_{j}" if not doomed else f"build_temporary_debug_helper_table_{pr}_{j}"
    lines = [f"def {name}(data, scale={j + 1}):"]
    if j % 3 == 0:
        lines.append(f'    """Scale entry {j} of the input."""')
    lines.append(f"    result = data[{j % 4}] * scale + {pr}")
    if doomed:
        lines += [
            f"    print('debug', result, {j})",
            "    for step in range(scale):",
            f"        if step % {j + 2} == 0:",
            "            result += step",
            "        else:",
            "            result -= 1",
            f"    print('done', {pr})",
        ]
    elif j % 2:
        lines.append("    result = max(result, 0)")
    lines.append("    return result")
    return "\n".join(lines) + "\n"


def build_corpus_repo(root: Path, n_prs: int = 6, per_pr: int = 8) -> tuple[str, list[tuple[str, str, str, str]]]:
    """Linear history of small PRs; every third method of a PR is removed in review."""
    repo = ScriptedRepo(root)
    base = repo.commit({"corpus/__init__.py": "", "corpus/core.py": "def keep():\n    return 0\n"}, "init")
    triples = []
    for pr in range(n_prs):
        doomed = {j for j in range(per_pr) if (j + pr) % 3 == 0}
        full = "\n\n".join(_corpus_method(pr, j, j in doomed) for j in range(per_pr))
        head = repo.commit({f"corpus/mod_{pr}.py": full}, f"pr {pr}")
        kept = "\n\n".join(_corpus_method(pr, j, False) for j in range(per_pr) if j not in doomed)
        repo.commit({f"corpus/mod_{pr}.py": kept + f"\n\nVERSION = {pr}\n"}, f"review {pr}")
        merge = repo.commit({"corpus/core.py": f"def keep():\n    return {pr + 1}\n"}, f"merge {pr}")
        triples.append((f"pr-{pr:02d}", base, head, merge))
        base = merge
    return str(root), triples


def write_triples(path: Path, triples) -> Path:
    lines = ["# pr_id\tbase\thead\tmerge"] + ["\t".join(t) for t in triples]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
