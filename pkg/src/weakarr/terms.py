"""Sorts, hash-consed terms, literals, simplification and preprocessing.

Terms live in a :class:`TermBank` owned by one solving session.  Structurally
identical terms intern to the same object, so identity comparison and the
integer ``id`` are canonical.  Equations order their children by id, making
``eq(a, b)`` and ``eq(b, a)`` the same term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from .errors import SortError

# ---------------------------------------------------------------------------
# Sorts

FREE = "free"
BOOLKIND = "bool"
ARRAY = "array"


@dataclass(frozen=True)
class Sort:
    kind: str
    name: str = ""
    index: "Sort | None" = None
    element: "Sort | None" = None

    @property
    def is_bool(self) -> bool:
        return self.kind == BOOLKIND

    @property
    def is_array(self) -> bool:
        return self.kind == ARRAY

    @property
    def is_free(self) -> bool:
        return self.kind == FREE

    def __str__(self) -> str:
        if self.kind == ARRAY:
            return f"(Array {self.index} {self.element})"
        if self.kind == BOOLKIND:
            return "Bool"
        return self.name


BOOL = Sort(BOOLKIND)

_free_sorts: dict[str, Sort] = {}
_array_sorts: dict[tuple[Sort, Sort], Sort] = {}


def free_sort(name: str) -> Sort:
    sort = _free_sorts.get(name)
    if sort is None:
        sort = Sort(FREE, name=name)
        _free_sorts[name] = sort
    return sort


def array_sort(index: Sort, element: Sort) -> Sort:
    """Intern an array sort.  Bool is not allowed inside array sorts: index and
    element theories are free sorts (possibly arrays over free sorts)."""
    if index.is_bool or element.is_bool:
        raise SortError("Bool may not appear as an array index or element sort")
    key = (index, element)
    sort = _array_sorts.get(key)
    if sort is None:
        sort = Sort(ARRAY, index=index, element=element)
        _array_sorts[key] = sort
    return sort


# ---------------------------------------------------------------------------
# Terms

VAR = "var"
STORE = "store"
SELECT = "select"
APPLY = "apply"
EQ = "eq"
NOT = "not"
AND = "and"
OR = "or"
TRUE = "true"
FALSE = "false"

_CONNECTIVES = frozenset({NOT, AND, OR})


@dataclass(eq=False)
class Term:
    """One hash-consed term node.  Compare terms with ``is`` or by ``id``."""

    id: int
    kind: str
    sort: Sort
    name: str = ""
    args: tuple["Term", ...] = ()

    @property
    def array(self) -> "Term":
        return self.args[0]

    @property
    def index(self) -> "Term":
        return self.args[1]

    @property
    def value(self) -> "Term":
        return self.args[2]

    @property
    def is_connective(self) -> bool:
        return self.kind in _CONNECTIVES

    def __hash__(self) -> int:
        return self.id

    def __repr__(self) -> str:
        return f"Term#{self.id}({to_sexpr(self)})"


@dataclass(frozen=True)
class FnSymbol:
    name: str
    params: tuple[Sort, ...]
    result: Sort


@dataclass(frozen=True)
class Literal:
    """A ground (dis)equality with children normalised by term id."""

    is_eq: bool
    lhs: Term
    rhs: Term

    def negated(self) -> "Literal":
        return Literal(not self.is_eq, self.lhs, self.rhs)

    def key(self) -> tuple[int, int, bool]:
        return (self.lhs.id, self.rhs.id, self.is_eq)

    def __str__(self) -> str:
        core = f"(= {to_sexpr(self.lhs)} {to_sexpr(self.rhs)})"
        return core if self.is_eq else f"(not {core})"


def eq_lit(lhs: Term, rhs: Term) -> Literal:
    if lhs.id > rhs.id:
        lhs, rhs = rhs, lhs
    return Literal(True, lhs, rhs)


def neq_lit(lhs: Term, rhs: Term) -> Literal:
    if lhs.id > rhs.id:
        lhs, rhs = rhs, lhs
    return Literal(False, lhs, rhs)


class TermBank:
    """Interning store for terms of one solving session."""

    def __init__(self) -> None:
        self._table: dict[tuple, Term] = {}
        self.terms: list[Term] = []
        self.true = self._mk(TRUE, BOOL)
        self.false = self._mk(FALSE, BOOL)

    def _mk(self, kind: str, sort: Sort, name: str = "", args: tuple[Term, ...] = ()) -> Term:
        key = (kind, sort, name, tuple(a.id for a in args))
        term = self._table.get(key)
        if term is None:
            term = Term(len(self.terms), kind, sort, name, args)
            self._table[key] = term
            self.terms.append(term)
        return term

    def var(self, name: str, sort: Sort) -> Term:
        return self._mk(VAR, sort, name=name)

    def store(self, array: Term, index: Term, value: Term) -> Term:
        if not array.sort.is_array:
            raise SortError(f"store array argument has sort {array.sort}, not an array sort")
        if index.sort is not array.sort.index:
            raise SortError(
                f"store index argument has sort {index.sort}, expected {array.sort.index}")
        if value.sort is not array.sort.element:
            raise SortError(
                f"store value argument has sort {value.sort}, expected {array.sort.element}")
        return self._mk(STORE, array.sort, args=(array, index, value))

    def select(self, array: Term, index: Term) -> Term:
        if not array.sort.is_array:
            raise SortError(f"select array argument has sort {array.sort}, not an array sort")
        if index.sort is not array.sort.index:
            raise SortError(
                f"select index argument has sort {index.sort}, expected {array.sort.index}")
        return self._mk(SELECT, array.sort.element, args=(array, index))

    def apply(self, fn: FnSymbol, args: Iterable[Term]) -> Term:
        args = tuple(args)
        if len(args) != len(fn.params):
            raise SortError(f"{fn.name} expects {len(fn.params)} arguments, got {len(args)}")
        for pos, (arg, expected) in enumerate(zip(args, fn.params)):
            if arg.sort is not expected:
                raise SortError(
                    f"{fn.name} argument {pos} has sort {arg.sort}, expected {expected}")
        return self._mk(APPLY, fn.result, name=fn.name, args=args)

    def eq(self, lhs: Term, rhs: Term) -> Term:
        if lhs.sort is not rhs.sort:
            raise SortError(f"= children have different sorts {lhs.sort} and {rhs.sort}")
        if lhs.id > rhs.id:
            lhs, rhs = rhs, lhs
        return self._mk(EQ, BOOL, args=(lhs, rhs))

    def not_(self, arg: Term) -> Term:
        if not arg.sort.is_bool:
            raise SortError("not expects a Bool argument")
        return self._mk(NOT, BOOL, args=(arg,))

    def and_(self, args: Iterable[Term]) -> Term:
        args = tuple(args)
        for arg in args:
            if not arg.sort.is_bool:
                raise SortError("and expects Bool arguments")
        if not args:
            return self.true
        if len(args) == 1:
            return args[0]
        return self._mk(AND, BOOL, args=args)

    def or_(self, args: Iterable[Term]) -> Term:
        args = tuple(args)
        for arg in args:
            if not arg.sort.is_bool:
                raise SortError("or expects Bool arguments")
        if not args:
            return self.false
        if len(args) == 1:
            return args[0]
        return self._mk(OR, BOOL, args=args)

    def literal_term(self, lit: Literal) -> Term:
        atom = self.eq(lit.lhs, lit.rhs)
        return atom if lit.is_eq else self.not_(atom)


def subterms(roots: Iterable[Term]) -> Iterator[Term]:
    """All distinct subterms of ``roots`` in post-order."""
    seen: set[int] = set()

    def walk(t: Term) -> Iterator[Term]:
        if t.id in seen:
            return
        seen.add(t.id)
        for a in t.args:
            yield from walk(a)
        yield t

    for root in roots:
        yield from walk(root)


def to_sexpr(t: Term) -> str:
    if t.kind == VAR:
        return _smt_symbol(t.name)
    if t.kind == TRUE:
        return "true"
    if t.kind == FALSE:
        return "false"
    if t.kind == STORE:
        return f"(store {to_sexpr(t.args[0])} {to_sexpr(t.args[1])} {to_sexpr(t.args[2])})"
    if t.kind == SELECT:
        return f"(select {to_sexpr(t.args[0])} {to_sexpr(t.args[1])})"
    if t.kind == APPLY:
        inner = " ".join(to_sexpr(a) for a in t.args)
        return f"({_smt_symbol(t.name)} {inner})"
    if t.kind == EQ:
        return f"(= {to_sexpr(t.args[0])} {to_sexpr(t.args[1])})"
    if t.kind in _CONNECTIVES:
        inner = " ".join(to_sexpr(a) for a in t.args)
        return f"({t.kind} {inner})"
    raise AssertionError(f"unprintable term kind {t.kind}")


_PLAIN_FIRST = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ~!@$%^&*_-+=<>.?/")
_PLAIN_REST = _PLAIN_FIRST | set("0123456789")


def _smt_symbol(name: str) -> str:
    if name and name[0] in _PLAIN_FIRST and all(c in _PLAIN_REST for c in name):
        return name
    return f"|{name}|"


# ---------------------------------------------------------------------------
# Simplification

def simplify(t: Term, bank: TermBank, _memo: dict[int, Term] | None = None) -> Term:
    """Exhaustive bottom-up rewriting with exactly two rules:

    * ``select(store(a, i, v), i)  -> v``            (indices syntactically equal)
    * ``store(store(a, i, w), i, v) -> store(a, i, v)``  (indices syntactically equal)
    """
    memo = _memo if _memo is not None else {}

    def go(t: Term) -> Term:
        cached = memo.get(t.id)
        if cached is not None:
            return cached
        args = tuple(go(a) for a in t.args)
        out = _rebuild(t, args, bank)
        while True:
            if out.kind == SELECT and out.array.kind == STORE and out.index is out.array.index:
                out = out.array.value
            elif (out.kind == STORE and out.array.kind == STORE
                  and out.index is out.array.index):
                out = bank.store(out.array.array, out.index, out.value)
            else:
                break
        memo[t.id] = out
        return out

    return go(t)


def _rebuild(t: Term, args: tuple[Term, ...], bank: TermBank) -> Term:
    if args == t.args:
        return t
    if t.kind == STORE:
        return bank.store(*args)
    if t.kind == SELECT:
        return bank.select(*args)
    if t.kind == APPLY:
        return bank._mk(APPLY, t.sort, name=t.name, args=args)
    if t.kind == EQ:
        return bank.eq(*args)
    if t.kind == NOT:
        return bank.not_(args[0])
    if t.kind == AND:
        return bank.and_(args)
    if t.kind == OR:
        return bank.or_(args)
    return t


# ---------------------------------------------------------------------------
# Problem instances and preprocessing

@dataclass
class ProblemInstance:
    """A parsed or constructed quantifier-free input: assertions plus the
    declared vocabulary needed for model printing."""

    bank: TermBank
    assertions: list[Term] = field(default_factory=list)
    declared_sorts: list[Sort] = field(default_factory=list)
    declared_consts: list[Term] = field(default_factory=list)
    declared_funs: list[FnSymbol] = field(default_factory=list)
    eager_selects: bool = False

    def assert_term(self, t: Term) -> None:
        if not t.sort.is_bool:
            raise SortError("assertions must have sort Bool")
        self.assertions.append(t)

    def conjunction(self) -> Term:
        return self.bank.and_(self.assertions)


@dataclass
class PreprocessResult:
    """Preprocessed problem.

    ``conjuncts`` is what the search actually asserts: the simplified input
    assertions, one definition conjunct per store/select occurrence, and one
    axiom instance ``select(s, i) = v`` per store ``s = store(_, i, v)``.
    The tracked sets contain only terms from the simplified input and the
    axiom instances (never definition proxies), so every literal a lemma can
    build from them is valid on its own.
    """

    bank: TermBank
    originals: list[Term]
    simplified: list[Term]
    definitions: list[Term]
    idx_instances: list[Term]
    conjuncts: list[Term]
    tracked_selects: list[Term]
    tracked_arrays: list[Term]
    stores: list[Term]
    index_terms: list[Term]
    proxies: dict[int, Term]
    eager_selects: bool


def preprocess(problem: ProblemInstance) -> PreprocessResult:
    bank = problem.bank
    memo: dict[int, Term] = {}
    simplified = [simplify(t, bank, memo) for t in problem.assertions]

    base_subterms = list(subterms(simplified))

    # Name every store/select occurrence with a deterministic proxy variable.
    proxies: dict[int, Term] = {}
    definitions: list[Term] = []
    for t in base_subterms:
        if t.kind in (STORE, SELECT):
            proxy = bank.var(f"@def!{t.id}", t.sort)
            proxies[t.id] = proxy
            definitions.append(bank.eq(proxy, t))

    stores = [t for t in base_subterms if t.kind == STORE]
    idx_instances = []
    idx_selects = []
    for s in stores:
        instance_select = bank.select(s, s.index)
        idx_selects.append(instance_select)
        idx_instances.append(bank.eq(instance_select, s.value))

    tracked_selects = [t for t in base_subterms if t.kind == SELECT] + idx_selects
    if problem.eager_selects:
        # Register select(a, i) for every store(a, i, v); the term is tracked
        # but nothing is asserted about it.
        for s in stores:
            tracked_selects.append(bank.select(s.array, s.index))
    tracked_selects = _unique_by_id(tracked_selects)

    tracked_pool = list(subterms(simplified + idx_instances))
    if problem.eager_selects:
        tracked_pool += [t for t in tracked_selects]
    tracked_arrays = _unique_by_id([t for t in tracked_pool if t.sort.is_array])

    index_terms = _unique_by_id(
        [t.index for t in stores] + [t.index for t in tracked_selects])

    conjuncts = simplified + definitions + idx_instances
    return PreprocessResult(
        bank=bank,
        originals=list(problem.assertions),
        simplified=simplified,
        definitions=definitions,
        idx_instances=idx_instances,
        conjuncts=conjuncts,
        tracked_selects=tracked_selects,
        tracked_arrays=tracked_arrays,
        stores=stores,
        index_terms=index_terms,
        proxies=proxies,
        eager_selects=problem.eager_selects,
    )


def _unique_by_id(ts: Iterable[Term]) -> list[Term]:
    seen: set[int] = set()
    out = []
    for t in ts:
        if t.id not in seen:
            seen.add(t.id)
            out.append(t)
    return sorted(out, key=lambda t: t.id)


# ---------------------------------------------------------------------------
# Structural CNF

CnfLiteral = tuple[Term, bool]


def clausify(conjuncts: Iterable[Term], bank: TermBank) -> tuple[list[list[CnfLiteral]], list[Term]]:
    """Plain structural CNF over (dis)equality atoms, Bool leaves and one fresh
    Bool proxy per nested connective.  Returns the clause list and the atoms
    in first-seen order."""
    clauses: list[list[CnfLiteral]] = []
    atoms: list[Term] = []
    atom_seen: set[int] = set()
    encoded: dict[int, Term] = {}

    def note_atom(a: Term) -> None:
        if a.id not in atom_seen:
            atom_seen.add(a.id)
            atoms.append(a)

    def literal_of(t: Term) -> CnfLiteral | bool:
        positive = True
        while t.kind == NOT:
            positive = not positive
            t = t.args[0]
        if t.kind == TRUE:
            return positive
        if t.kind == FALSE:
            return not positive
        if t.is_connective:
            proxy = encode_connective(t)
            note_atom(proxy)
            return (proxy, positive)
        note_atom(t)
        return (t, positive)

    def encode_connective(t: Term) -> Term:
        done = encoded.get(t.id)
        if done is not None:
            return done
        proxy = bank.var(f"@cnf!{t.id}", BOOL)
        encoded[t.id] = proxy
        parts = [literal_of(a) for a in t.args]
        if t.kind == AND:
            # proxy -> part, for each part; (all parts) -> proxy
            big: list[CnfLiteral] = [(proxy, True)]
            for p in parts:
                if p is True:
                    continue
                if p is False:
                    clauses.append([(proxy, False)])
                    big = []
                    break
                clauses.append([(proxy, False), p])
                big.append((p[0], not p[1]))
            if big:
                clauses.append(big)
        else:  # OR
            big = [(proxy, False)]
            for p in parts:
                if p is False:
                    continue
                if p is True:
                    clauses.append([(proxy, True)])
                    big = []
                    break
                clauses.append([(proxy, True), (p[0], not p[1])])
                big.append(p)
            if big:
                clauses.append(big)
        return proxy

    def assert_top(t: Term) -> None:
        if t.kind == AND:
            for a in t.args:
                assert_top(a)
            return
        if t.kind == TRUE:
            return
        if t.kind == FALSE:
            clauses.append([])
            return
        if t.kind == OR:
            clause: list[CnfLiteral] = []
            satisfied = False
            for a in t.args:
                lit = literal_of(a)
                if lit is True:
                    satisfied = True
                    break
                if lit is False:
                    continue
                clause.append(lit)
            if not satisfied:
                clauses.append(clause)
            return
        lit = literal_of(t)
        if lit is True:
            return
        if lit is False:
            clauses.append([])
            return
        clauses.append([lit])

    for t in conjuncts:
        assert_top(t)
    return clauses, atoms
