"""Token-level prefix tree over keyword patterns."""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Sequence


class TrieNode:
    __slots__ = ("children", "is_end")

    def __init__(self):
        self.children: dict[str, TrieNode] = {}
        self.is_end = False

    def child(self, token: str) -> Optional["TrieNode"]:
        return self.children.get(token)


class PatternTrie:
    def __init__(self, patterns: Iterable[Sequence[str]] = ()):
        self.root = TrieNode()
        self._size = 0
        for p in patterns:
            self.insert(p)

    def insert(self, tokens: Sequence[str]) -> None:
        node = self.root
        for tok in tokens:
            nxt = node.children.get(tok)
            if nxt is None:
                nxt = node.children[tok] = TrieNode()
            node = nxt
        if not node.is_end:
            node.is_end = True
            self._size += 1

    def __len__(self) -> int:
        return self._size

    def walk(self, tokens: Sequence[str], node: Optional[TrieNode] = None) -> Optional[TrieNode]:
        node = self.root if node is None else node
        for tok in tokens:
            node = node.children.get(tok)
            if node is None:
                return None
        return node

    def __contains__(self, tokens: Sequence[str]) -> bool:
        node = self.walk(tokens)
        return node is not None and node.is_end

    def __iter__(self) -> Iterator[tuple[str, ...]]:
        stack = [(self.root, ())]
        while stack:
            node, prefix = stack.pop()
            if node.is_end:
                yield prefix
            for tok in sorted(node.children, reverse=True):
                stack.append((node.children[tok], prefix + (tok,)))
