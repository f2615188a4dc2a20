"""Semantic class hierarchy and word lexicon.

The hierarchy is a single-rooted tree.  Generalizing a class means moving
toward the root; a class constraint that reaches the root carries no
information and is dropped by callers.
"""

from __future__ import annotations

from collections.abc import Iterable


class HierarchyError(ValueError):
    """Malformed hierarchy or lexicon input."""

    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def _content_lines(source: str):
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


class SemanticHierarchy:
    """A tree of semantic classes keyed by name.

    ``parents`` maps every class to its parent; the root maps to ``None``.
    """

    def __init__(self, parents: dict[str, str | None]):
        roots = [c for c, p in parents.items() if p is None]
        if len(roots) != 1:
            raise HierarchyError(f"expected exactly one root, found {len(roots)}")
        for child, parent in parents.items():
            if parent is not None and parent not in parents:
                raise HierarchyError(f"unknown parent {parent!r} of {child!r}")
        self.root = roots[0]
        self._parent = dict(parents)
        self._depth: dict[str, int] = {}
        for cls in self._parent:
            self._compute_depth(cls)
        self._lca_cache: dict[tuple[str, str], str] = {}
        self._ancestors = {c: frozenset(self._chain(c)) for c in self._parent}

    def _compute_depth(self, cls: str) -> int:
        path = []
        node = cls
        while node not in self._depth:
            if node in path:
                raise HierarchyError(f"cycle through {node!r}")
            parent = self._parent[node]
            if parent is None:
                self._depth[node] = 0
                break
            path.append(node)
            node = parent
        for n in reversed(path):
            self._depth[n] = self._depth[self._parent[n]] + 1
        return self._depth[cls]

    def _chain(self, cls: str):
        node: str | None = cls
        while node is not None:
            yield node
            node = self._parent[node]

    def __contains__(self, cls: object) -> bool:
        return cls in self._parent

    def __len__(self) -> int:
        return len(self._parent)

    def __iter__(self):
        return iter(self._parent)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SemanticHierarchy) and self._parent == other._parent

    __hash__ = object.__hash__

    def _check(self, *classes: str) -> None:
        for c in classes:
            if c not in self._parent:
                raise KeyError(f"unknown semantic class {c!r}")

    def parent(self, cls: str) -> str | None:
        self._check(cls)
        return self._parent[cls]

    def depth(self, cls: str) -> int:
        self._check(cls)
        return self._depth[cls]

    def ancestors(self, cls: str) -> frozenset[str]:
        """All ancestors of ``cls``, including ``cls`` itself."""
        self._check(cls)
        return self._ancestors[cls]

    def is_ancestor_or_equal(self, a: str, b: str) -> bool:
        self._check(a, b)
        return a in self._ancestors[b]

    def lca(self, a: str, b: str) -> str:
        key = (a, b) if a <= b else (b, a)
        hit = self._lca_cache.get(key)
        if hit is not None:
            return hit
        self._check(a, b)
        da, db = self._depth[a], self._depth[b]
        x, y = a, b
        while da > db:
            x, da = self._parent[x], da - 1
        while db > da:
            y, db = self._parent[y], db - 1
        while x != y:
            x, y = self._parent[x], self._parent[y]
        self._lca_cache[key] = x
        return x

    def hops_to_ancestor(self, start: str, ancestor: str) -> int:
        if not self.is_ancestor_or_equal(ancestor, start):
            raise ValueError(f"{ancestor!r} is not an ancestor of {start!r}")
        return self._depth[start] - self._depth[ancestor]

    def most_specific(self, classes: Iterable[str]) -> frozenset[str]:
        """Drop the root and every class that is an ancestor of another member."""
        members = {c for c in classes if c != self.root}
        return frozenset(
            c for c in members
            if not any(o != c and c in self._ancestors[o] for o in members)
        )

    def dumps(self) -> str:
        lines = [self.root]
        lines += [f"{c}\t{p}" for c, p in self._parent.items() if p is not None]
        return "\n".join(lines) + "\n"


def load_hierarchy(source: str) -> SemanticHierarchy:
    """Parse ``child<TAB>parent`` lines; the root appears alone on its line."""
    parents: dict[str, str | None] = {}
    line_of: dict[str, int] = {}
    for lineno, line in _content_lines(source):
        fields = [f.strip() for f in line.split("\t")]
        if len(fields) > 2 or not fields[0] or (len(fields) == 2 and not fields[1]):
            raise HierarchyError(f"malformed line {line!r}", lineno)
        child = fields[0]
        parent = fields[1] if len(fields) == 2 else None
        if child in parents:
            raise HierarchyError(f"duplicate class {child!r}", lineno)
        if parent == child:
            raise HierarchyError(f"cycle: {child!r} is its own parent", lineno)
        parents[child] = parent
        line_of[child] = lineno

    for child, parent in parents.items():
        if parent is not None and parent not in parents:
            raise HierarchyError(f"unknown parent {parent!r}", line_of[child])

    # Cycles first: a pure cycle also has no root, and the cycle is the real fault.
    state: dict[str, int] = {}
    for start in parents:
        path = []
        node = start
        while node is not None and state.get(node) != 2:
            if state.get(node) == 1:
                raise HierarchyError(f"cycle through {node!r}", line_of[node])
            state[node] = 1
            path.append(node)
            node = parents[node]
        for n in path:
            state[n] = 2

    roots = [c for c, p in parents.items() if p is None]
    if not roots:
        raise HierarchyError("no root class declared")
    if len(roots) > 1:
        raise HierarchyError(f"multiple roots: {', '.join(roots)}", line_of[roots[1]])
    return SemanticHierarchy(parents)


class Lexicon:
    """Maps uppercased words to sets of semantic classes."""

    def __init__(self, entries: dict[str, Iterable[str]], hierarchy: SemanticHierarchy):
        self.hierarchy = hierarchy
        self.entries: dict[str, frozenset[str]] = {}
        for word, classes in entries.items():
            classes = frozenset(classes)
            for c in classes:
                if c not in hierarchy:
                    raise HierarchyError(f"word {word!r} maps to unknown class {c!r}")
            key = word.upper()
            self.entries[key] = self.entries.get(key, frozenset()) | classes
        self._informative = {
            w: frozenset(c for c in cs if c != hierarchy.root)
            for w, cs in self.entries.items()
        }

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Lexicon) and self.entries == other.entries

    __hash__ = object.__hash__

    def __len__(self) -> int:
        return len(self.entries)

    def classes_of(self, word: str) -> frozenset[str]:
        """Classes for ``word`` with the root removed; empty when unknown."""
        return self._informative.get(word.upper(), frozenset())

    def dumps(self) -> str:
        return "".join(
            f"{w}\t{';'.join(sorted(cs))}\n" for w, cs in sorted(self.entries.items())
        )


def classes_of(lex: Lexicon, h: SemanticHierarchy, word: str) -> frozenset[str]:
    return frozenset(c for c in lex.classes_of(word) if c != h.root)


def load_lexicon(source: str, hierarchy: SemanticHierarchy) -> Lexicon:
    """Parse ``word<TAB>class[;class...]`` lines."""
    entries: dict[str, set[str]] = {}
    for lineno, line in _content_lines(source):
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0].strip():
            raise HierarchyError(f"malformed lexicon line {line!r}", lineno)
        classes = [c.strip() for c in fields[1].split(";") if c.strip()]
        if not classes:
            raise HierarchyError("lexicon entry without classes", lineno)
        for c in classes:
            if c not in hierarchy:
                raise HierarchyError(f"unknown class {c!r}", lineno)
        entries.setdefault(fields[0].strip().upper(), set()).update(classes)
    return Lexicon(entries, hierarchy)
