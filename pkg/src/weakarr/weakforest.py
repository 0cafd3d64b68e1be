"""Forest representation of weak equivalence between array classes.

One node per strong-equivalence class of array-sorted terms.  A primary edge
(`p`, labelled `pi`) records a store between two classes and spans the weak
equivalence class; a secondary edge (`s`) shortcuts to the representative of
the weak-equivalence-modulo-`pi` class.  Edge labels are compared modulo the
current arrangement, which is frozen while a forest is alive: the forest is
rebuilt from scratch at every theory final check, so labels can be pinned to
arrangement representatives at build time.

Representative queries run on the edges alone.  Witness paths are read off
the underlying store graph: every edge of that graph is a store term kept as
the edge reason, and the forest decides which endpoints are connected.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable

from .errors import InternalSolverError, PreconditionError
from .terms import Term


class WeakNode:
    __slots__ = ("key", "p", "pi", "s", "p_reason", "s_reason")

    def __init__(self, key: Hashable) -> None:
        self.key = key
        self.p: WeakNode | None = None
        self.pi: Hashable | None = None
        self.s: WeakNode | None = None
        self.p_reason: Term | None = None
        self.s_reason: Term | None = None

    def __repr__(self) -> str:
        return f"WeakNode({self.key})"


class WeakForest:
    """The raw node structure; keys and edge labels are opaque hashables."""

    def __init__(self) -> None:
        self.nodes: dict[Hashable, WeakNode] = {}
        self.steps = 0
        self.inversions = 0
        self.add_store_calls = 0

    def node(self, key: Hashable) -> WeakNode:
        n = self.nodes.get(key)
        if n is None:
            n = WeakNode(key)
            self.nodes[key] = n
        return n

    def _guard(self) -> int:
        n = len(self.nodes)
        return 8 * (n + 2) * (n + 2)

    def get_rep(self, n: WeakNode) -> WeakNode:
        limit = self._guard()
        while n.p is not None:
            self.steps += 1
            limit -= 1
            if limit < 0:
                raise InternalSolverError("primary edges form a cycle")
            n = n.p
        return n

    def get_rep_i(self, n: WeakNode, i: Hashable) -> WeakNode:
        """Representative of n's weak-equivalence-modulo-i class: follow the
        primary edge unless it is labelled i, then detour over the secondary."""
        limit = self._guard()
        while True:
            self.steps += 1
            limit -= 1
            if limit < 0:
                raise InternalSolverError("get_rep_i traversal does not terminate")
            if n.p is None:
                return n
            if n.pi != i:
                n = n.p
            elif n.s is None:
                return n
            else:
                n = n.s

    def make_rep(self, n: WeakNode) -> None:
        """Invert primary edges so that n roots its weak equivalence class."""
        chain: list[WeakNode] = []
        cur = n
        while cur.p is not None:
            self.steps += 1
            chain.append(cur)
            cur = cur.p
        for child in reversed(chain):
            parent = child.p
            assert parent is not None and parent.p is None
            parent.p = child
            parent.pi = child.pi
            parent.p_reason = child.p_reason
            child.p = None
            self.inversions += 1
            # child.pi still names the inverted edge: rebuild the secondary
            # chain it anchored before dropping the label.
            self.make_rep_i(child)
            child.pi = None
            child.p_reason = None

    def make_rep_i(self, n: WeakNode) -> None:
        """Invert n's secondary chain so that n roots its modulo-pi class.
        Secondary links whose target's primary label moved on are compressed
        towards the representative instead of inverted."""
        limit = self._guard()
        stack: list[WeakNode] = []
        cur = n
        while cur.s is not None:
            self.steps += 1
            limit -= 1
            if limit < 0:
                raise InternalSolverError("make_rep_i traversal does not terminate")
            if cur.s.pi != cur.pi:
                cur.s = cur.s.p
                if cur.s is None:
                    cur.s_reason = None
            else:
                stack.append(cur)
                cur = cur.s
        while stack:
            m = stack.pop()
            target = m.s
            assert target is not None
            target.s = m
            target.s_reason = m.s_reason
            m.s = None
            m.s_reason = None
            self.inversions += 1

    def add_store(self, a: WeakNode, b: WeakNode, i: Hashable, reason: Term | None = None) -> None:
        """Extend the represented relations with a store edge a -i- b."""
        self.add_store_calls += 1
        self.make_rep(b)
        if self.get_rep(a) is b:
            self._add_secondary({i}, a, b, reason)
        else:
            b.p = a
            b.pi = i
            b.p_reason = reason

    def _add_secondary(self, forbidden: set, a: WeakNode, b: WeakNode,
                       reason: Term | None) -> None:
        # Walk the primary chain from a towards the fresh representative b.  A
        # node whose label is not yet forbidden became weakly equivalent
        # modulo its own label to b through the new edge; give it a secondary
        # edge unless it already reaches b.
        while a is not b:
            self.steps += 1
            if a.pi not in forbidden and self.get_rep_i(a, a.pi) is not b:
                self.make_rep_i(a)
                a.s = b
                a.s_reason = reason
            forbidden.add(a.pi)
            if a.p is None:
                raise InternalSolverError("add_secondary walked past the representative")
            a = a.p

    def edge_count(self) -> int:
        total = 0
        for n in self.nodes.values():
            if n.p is not None:
                total += 1
            if n.s is not None:
                total += 1
        return total

    def dump(self) -> str:
        """Line-based snapshot of the node structure for golden tests."""
        lines = []
        for key in sorted(self.nodes, key=repr):
            n = self.nodes[key]
            p = n.p.key if n.p is not None else "-"
            pi = n.pi if n.pi is not None else "-"
            s = n.s.key if n.s is not None else "-"
            lines.append(f"node {n.key}: p={p} pi={pi} s={s}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Witness paths

@dataclass(frozen=True)
class StoreHop:
    store: Term
    index: Term
    src: Term
    dst: Term


@dataclass(frozen=True)
class EqHop:
    src: Term
    dst: Term


@dataclass
class Path:
    edges: list

    def store_hops(self) -> list[StoreHop]:
        return [e for e in self.edges if isinstance(e, StoreHop)]

    def stores(self) -> list[Term]:
        """Multiset of index terms labelling the store hops."""
        return [e.index for e in self.store_hops()]

    def endpoints(self) -> tuple[Term, Term] | None:
        if not self.edges:
            return None
        return (self.edges[0].src, self.edges[-1].dst)


class BuiltForest:
    """A forest over the current arrangement, plus the underlying store graph
    used to read off witness paths."""

    def __init__(self, euf, arrays: Iterable[Term], stores: Iterable[Term]) -> None:
        self.euf = euf
        self.forest = WeakForest()
        self.stores = sorted(stores, key=lambda t: t.id)
        self._adj: dict[int, list[tuple[int, int, Term]]] = {}
        for t in sorted(arrays, key=lambda t: t.id):
            key = euf.rep(t)
            self.forest.node(key)
            self._adj.setdefault(key, [])
        for s in self.stores:
            store_key = euf.rep(s)
            array_key = euf.rep(s.array)
            label = euf.rep(s.index)
            self._adj.setdefault(store_key, []).append((array_key, label, s))
            self._adj.setdefault(array_key, []).append((store_key, label, s))
            self.forest.add_store(self.forest.node(store_key),
                                  self.forest.node(array_key), label, reason=s)
        self._components: dict[int, int] = {}
        self._component_labels: dict[int, set[int]] = {}
        for key in sorted(self._adj):
            if key in self._components:
                continue
            labels: set[int] = set()
            queue = deque([key])
            self._components[key] = key
            while queue:
                cur = queue.popleft()
                for other, label, _ in self._adj[cur]:
                    labels.add(label)
                    if other not in self._components:
                        self._components[other] = key
                        queue.append(other)
            self._component_labels[key] = labels

    # -- queries -------------------------------------------------------------

    def node_of(self, t: Term) -> WeakNode:
        return self.forest.nodes[self.euf.rep(t)]

    def weak_rep(self, t: Term) -> WeakNode:
        return self.forest.get_rep(self.node_of(t))

    def weak_rep_i(self, t: Term, index: Term) -> WeakNode:
        return self.forest.get_rep_i(self.node_of(t), self.euf.rep(index))

    def weakly_equivalent(self, a: Term, b: Term) -> bool:
        return self.weak_rep(a) is self.weak_rep(b)

    def weakly_equivalent_mod(self, a: Term, b: Term, index: Term) -> bool:
        return self.weak_rep_i(a, index) is self.weak_rep_i(b, index)

    def component_labels(self, t: Term) -> set[int]:
        comp = self._components[self.euf.rep(t)]
        return self._component_labels[comp]

    # -- witness paths -------------------------------------------------------

    def weak_path(self, a: Term, b: Term) -> Path:
        """One witness path between weakly equal a and b, read off the primary
        chains of the forest."""
        if not self.weakly_equivalent(a, b):
            raise PreconditionError("weak_path on terms in different weak classes")
        up_a = self._primary_chain(self.node_of(a))
        up_b = self._primary_chain(self.node_of(b))
        while up_a and up_b and up_a[-1] is up_b[-1]:
            up_a.pop()
            up_b.pop()
        hops = [(st, child.key, parent.key) for (child, parent, st) in up_a]
        hops += [(st, parent.key, child.key) for (child, parent, st) in reversed(up_b)]
        return self._stitch(hops, a, b)

    def weak_path_mod(self, a: Term, b: Term, index: Term) -> Path:
        """One witness path between a and b avoiding stores at indices equal
        to `index`, found in the store graph."""
        avoid = self.euf.rep(index)
        if self.weak_rep_i(a, index) is not self.weak_rep_i(b, index):
            raise PreconditionError("weak_path_mod on unrelated terms")
        start, goal = self.euf.rep(a), self.euf.rep(b)
        if start == goal:
            return self._stitch([], a, b)
        back: dict[int, tuple[int, int, Term]] = {start: None}  # type: ignore[dict-item]
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            if cur == goal:
                break
            for other, label, st in self._adj[cur]:
                if label == avoid or other in back:
                    continue
                back[other] = (cur, label, st)
                queue.append(other)
        if goal not in back:
            raise InternalSolverError("forest and store graph disagree on connectivity")
        hops = []
        cur = goal
        while cur != start:
            prev, _, st = back[cur]
            hops.append((st, prev, cur))
            cur = prev
        hops.reverse()
        return self._stitch(hops, a, b)

    def _primary_chain(self, n: WeakNode) -> list[tuple[WeakNode, WeakNode, Term]]:
        chain = []
        while n.p is not None:
            if n.p_reason is None:
                raise InternalSolverError("primary edge without a store reason")
            chain.append((n, n.p, n.p_reason))
            n = n.p
        return chain

    def _stitch(self, hops: list[tuple[Term, int, int]], a: Term, b: Term) -> Path:
        """Turn class-level hops into a term-level path, bridging distinct
        terms inside one strong class with equality hops."""
        pos = a
        edges: list = []
        for st, src_key, _dst_key in hops:
            if self.euf.rep(st) == src_key:
                enter, leave = st, st.array
            else:
                enter, leave = st.array, st
            if pos is not enter:
                edges.append(EqHop(pos, enter))
            edges.append(StoreHop(st, st.index, enter, leave))
            pos = leave
        if pos is not b:
            edges.append(EqHop(pos, b))
        return Path(edges)


def rebuild(euf, arrays: Iterable[Term], stores: Iterable[Term]) -> BuiltForest:
    """Fresh forest for the current arrangement: one node per strong class of
    array terms, one add_store per store term."""
    return BuiltForest(euf, arrays, stores)
