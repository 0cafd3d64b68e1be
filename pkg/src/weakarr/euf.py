"""Congruence closure with explanations and an undo trail.

Maintains the arrangement over all registered terms: equalities merge classes
and propagate congruence through store/select/apply/= applications; asserted
disequalities are checked against the partition after every merge batch.  A
proof forest records one reason per merge so any entailed equality can be
explained by the asserted literals behind it.
"""

from __future__ import annotations

from typing import Iterable

from .errors import InternalSolverError, PreconditionError
from .terms import APPLY, EQ, SELECT, STORE, Literal, Term, TermBank

_APP_KINDS = frozenset({STORE, SELECT, APPLY, EQ})

# A merge reason is either the asserted literal or a congruence record that
# pins the child pairing chosen when the merge was enqueued.
Reason = "Literal | tuple"


class Conflict:
    """A set of asserted literals whose conjunction is unsatisfiable."""

    def __init__(self, literals: Iterable[Literal]) -> None:
        self.literals = _dedup(literals)

    def __repr__(self) -> str:
        return f"Conflict({', '.join(str(l) for l in self.literals)})"


def _dedup(lits: Iterable[Literal]) -> list[Literal]:
    seen = set()
    out = []
    for lit in lits:
        if lit.key() not in seen:
            seen.add(lit.key())
            out.append(lit)
    return sorted(out, key=Literal.key)


class CCState:
    def __init__(self, bank: TermBank) -> None:
        self.bank = bank
        self._registered: dict[int, Term] = {}
        self._parent: dict[int, int] = {}
        self._size: dict[int, int] = {}
        self._use: dict[int, list[Term]] = {}
        self._sig_of: dict[int, tuple] = {}
        self._sig_table: dict[tuple, Term] = {}
        self._proof: dict[int, tuple[int, Reason] | None] = {}
        self._diseqs: list[tuple[Term, Term, Literal | None]] = []
        self._trail: list[tuple] = []
        self.add_term(bank.true)
        self.add_term(bank.false)
        self._diseqs.append((bank.true, bank.false, None))

    # -- registration -------------------------------------------------------

    def add_term(self, t: Term) -> None:
        """Register a term and its subterms.  Only legal on an empty trail, so
        signatures computed here stay valid across undo."""
        if self._trail:
            raise InternalSolverError("terms may only be registered at trail level zero")
        self._add(t)

    def _add(self, t: Term) -> None:
        if t.id in self._registered:
            return
        if t.is_connective:
            raise InternalSolverError("boolean connectives do not belong in the arrangement")
        for a in t.args:
            self._add(a)
        self._registered[t.id] = t
        self._parent[t.id] = t.id
        self._size[t.id] = 1
        self._proof[t.id] = None
        if t.kind in _APP_KINDS:
            for a in t.args:
                self._use.setdefault(self._find(a.id), []).append(t)
            key = self._signature(t)
            self._sig_of[t.id] = key
            if key in self._sig_table:
                raise InternalSolverError("duplicate signature for a hash-consed term")
            self._sig_table[key] = t

    def is_registered(self, t: Term) -> bool:
        return t.id in self._registered

    # -- queries ------------------------------------------------------------

    def _find(self, tid: int) -> int:
        parent = self._parent
        while parent[tid] != tid:
            tid = parent[tid]
        return tid

    def rep(self, t: Term) -> int:
        return self._find(t.id)

    def are_equal(self, s: Term, t: Term) -> bool:
        return self._find(s.id) == self._find(t.id)

    def are_diseq(self, s: Term, t: Term) -> bool:
        rs, rt = self._find(s.id), self._find(t.id)
        if rs == rt:
            return False
        for x, y, _ in self._diseqs:
            rx, ry = self._find(x.id), self._find(y.id)
            if (rx, ry) in ((rs, rt), (rt, rs)):
                return True
        return False

    def classes(self) -> dict[int, list[Term]]:
        """Current partition: representative id -> members sorted by id."""
        out: dict[int, list[Term]] = {}
        for tid in sorted(self._registered):
            out.setdefault(self._find(tid), []).append(self._registered[tid])
        return out

    # -- assertion ----------------------------------------------------------

    def assert_literal(self, lit: Literal) -> Conflict | None:
        if not (self.is_registered(lit.lhs) and self.is_registered(lit.rhs)):
            raise PreconditionError("literal over unregistered terms")
        if lit.is_eq:
            return self._merge_and_check(lit.lhs, lit.rhs, lit)
        self._trail.append(("diseq",))
        self._diseqs.append((lit.lhs, lit.rhs, lit))
        if self.are_equal(lit.lhs, lit.rhs):
            return Conflict(self.explain(lit.lhs, lit.rhs) + [lit])
        return None

    def _merge_and_check(self, a: Term, b: Term, reason: Literal) -> Conflict | None:
        pending: list[tuple[Term, Term, Reason]] = [(a, b, reason)]
        while pending:
            u, v, why = pending.pop()
            ru, rv = self._find(u.id), self._find(v.id)
            if ru == rv:
                continue
            self._proof_link(u, v, why)
            if self._size[ru] < self._size[rv]:
                ru, rv = rv, ru
            self._trail.append(("union", rv, ru))
            self._parent[rv] = ru
            self._size[ru] += self._size[rv]
            use_ru = self._use.setdefault(ru, [])
            self._trail.append(("use", ru, len(use_ru)))
            for p in self._use.get(rv, ()):
                old_key = self._sig_of[p.id]
                if self._sig_table.get(old_key) is p:
                    self._trail.append(("sig_set", old_key, p))
                    del self._sig_table[old_key]
                new_key = self._signature(p)
                self._trail.append(("sig_of", p.id, old_key))
                self._sig_of[p.id] = new_key
                other = self._sig_table.get(new_key)
                if other is None:
                    self._trail.append(("sig_set", new_key, None))
                    self._sig_table[new_key] = p
                elif self._find(other.id) != self._find(p.id):
                    pending.append((p, other, ("cong", self._cong_pairs(p, other))))
                use_ru.append(p)
        for x, y, why in self._diseqs:
            if self._find(x.id) == self._find(y.id):
                lits = self.explain(x, y)
                if why is not None:
                    lits = lits + [why]
                return Conflict(lits)
        return None

    def _signature(self, t: Term) -> tuple:
        finds = tuple(self._find(a.id) for a in t.args)
        if t.kind == EQ:
            return (EQ, tuple(sorted(finds)))
        if t.kind == APPLY:
            return (APPLY, t.name, finds)
        return (t.kind, finds)

    def _cong_pairs(self, p: Term, q: Term) -> tuple[tuple[Term, Term], ...]:
        # = is the one symmetric application; fix the child pairing now, while
        # the finds that justified the congruence still hold.
        if p.kind == EQ:
            (pa, pb), (qa, qb) = p.args, q.args
            if self._find(pa.id) == self._find(qa.id) and self._find(pb.id) == self._find(qb.id):
                return ((pa, qa), (pb, qb))
            return ((pa, qb), (pb, qa))
        return tuple(zip(p.args, q.args))

    def _proof_link(self, u: Term, v: Term, why: Reason) -> None:
        path = []
        cur = u.id
        while self._proof[cur] is not None:
            nxt, r = self._proof[cur]  # type: ignore[misc]
            path.append((cur, nxt, r))
            cur = nxt
        for child, par, r in reversed(path):
            self._trail.append(("proof", par, self._proof[par]))
            self._proof[par] = (child, r)
        self._trail.append(("proof", u.id, self._proof[u.id]))
        self._proof[u.id] = (v.id, why)

    # -- explanations -------------------------------------------------------

    def explain(self, s: Term, t: Term) -> list[Literal]:
        """Asserted equality literals whose conjunction entails s = t.
        Soundness is required, minimality is not."""
        if not self.are_equal(s, t):
            raise PreconditionError("explain called on terms that are not equal")
        out: dict[tuple, Literal] = {}
        self._explain_into(s, t, out, set())
        return sorted(out.values(), key=Literal.key)

    def _explain_into(self, s: Term, t: Term, out: dict, seen: set) -> None:
        if s is t:
            return
        pair = (min(s.id, t.id), max(s.id, t.id))
        if pair in seen:
            return
        seen.add(pair)
        depth: dict[int, None] = {}
        cur = s.id
        while True:
            depth[cur] = None
            entry = self._proof[cur]
            if entry is None:
                break
            cur = entry[0]
        cur = t.id
        while cur not in depth:
            entry = self._proof[cur]
            if entry is None:
                raise InternalSolverError("proof forest disconnected for equal terms")
            cur = entry[0]
        lca = cur
        for start in (s.id, t.id):
            cur = start
            while cur != lca:
                nxt, why = self._proof[cur]  # type: ignore[misc]
                if isinstance(why, Literal):
                    out[why.key()] = why
                else:
                    for x, y in why[1]:
                        self._explain_into(x, y, out, seen)
                cur = nxt

    # -- trail --------------------------------------------------------------

    def mark(self) -> int:
        return len(self._trail)

    def undo_to(self, mark: int) -> None:
        while len(self._trail) > mark:
            record = self._trail.pop()
            tag = record[0]
            if tag == "union":
                _, child, parent = record
                self._parent[child] = child
                self._size[parent] -= self._size[child]
            elif tag == "use":
                _, rep, old_len = record
                del self._use[rep][old_len:]
            elif tag == "sig_set":
                _, key, old = record
                if old is None:
                    del self._sig_table[key]
                else:
                    self._sig_table[key] = old
            elif tag == "sig_of":
                _, tid, old_key = record
                self._sig_of[tid] = old_key
            elif tag == "proof":
                _, tid, old = record
                self._proof[tid] = old
            elif tag == "diseq":
                self._diseqs.pop()
            else:  # pragma: no cover
                raise InternalSolverError(f"unknown trail record {tag}")
