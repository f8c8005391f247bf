"""Satisfiability of cycle-free formulas over finite binary trees.

The decision procedure works bottom-up over *node types*: clash-free sets
of closure formulas describing one candidate tree node — its element
name, propositions, attribute flags, the formulas demanded of each
successor, and the obligations it places on its parent.  Types are
produced by saturating a seed set: conjunctions expand, variables unfold
to their binding bodies, and disjunctions branch.  Three disjuncts
resolve for free, because reconstruction makes everything that was not
asserted false: a negated local atom not asserted positively, a negated
child-existence probe when no child is demanded, and a positive
existence probe on a direction that already carries a demand or a parent
link.  This keeps optional structure from exploding into branches.

The root seed demands the goal formula somewhere in the tree (a fresh
recursion walks it down) and forbids parent links.  Every generated type
requests candidate types for the child slots it demands.  A candidate
whose parent obligations are not recorded in the parent's own member set
triggers regeneration of the parent from an enlarged seed, so upward
obligations are always discharged by membership.  When the request queue
drains, types are admitted in waves: a type is admitted once every
demanded slot is filled by a candidate admitted in an earlier wave.  An
admitted root-eligible type yields a witness tree, rebuilt top-down
along wave-minimal links (waves strictly decrease downward, so the tree
is finite and shallow); if the queue drains with no admitted root, the
formula is unsatisfiable.

Every Sat verdict is re-checked with the independent model checker
before being returned, and the first node in document order where the
input formula holds is marked.
"""

from __future__ import annotations

import itertools
from collections import deque

from . import formulas as fm
from .checker import ModelChecker
from .errors import (ResourceLimit, TreelogicError, UnexpandedPredicate,
                     UnresolvedPlaceholder)
from .trees import CONTEXT_PROP, BinNode, BinaryTree

DEFAULT_BUDGET = 1 << 22

_ROOT_ROLE = ("root",)
_LOCAL_ATOMS = frozenset((fm.NAME, fm.PROP, fm.CTX, fm.ATTR))


class _Type:
    """One saturated candidate node shape, interned by member set."""

    __slots__ = ("members", "order", "index", "name", "props", "has_ctx",
                 "attrs", "demands", "upward", "bans", "children_requested")

    def __init__(self, members: frozenset, index: int):
        self.members = members
        self.order = tuple(sorted(members, key=lambda g: g.uid))
        self.index = index
        self.name = None
        self.props = []
        self.has_ctx = False
        self.attrs = []
        self.demands = {1: [], 2: []}
        self.upward = {1: [], 2: []}    # obligations on the parent via -p
        self.bans = set()
        self.children_requested = False
        for f in self.order:
            k = f.kind
            if k == fm.NAME:
                self.name = f.name
            elif k == fm.PROP:
                self.props.append(f.name)
            elif k == fm.CTX:
                self.has_ctx = True
            elif k == fm.ATTR:
                self.attrs.append(f.name)
            elif k == fm.MOD:
                if f.prog > 0:
                    self.demands[f.prog].append(f.subs[0])
                elif f.subs[0] is not fm.TRUE:
                    self.upward[-f.prog].append(f.subs[0])
            elif (k == fm.NOT and f.subs[0].kind == fm.MOD
                  and f.subs[0].subs[0] is fm.TRUE):
                self.bans.add(f.subs[0].prog)

    def __repr__(self):
        return f"<node type {self.index} ({len(self.order)} formulas)>"


class _State:
    """A saturation state: asserted set, worklist, pending disjunctions."""

    __slots__ = ("asserted", "pending", "ors", "mods", "bans", "name")

    def __init__(self):
        self.asserted = {}          # insertion-ordered set of formulas
        self.pending = []
        self.ors = []
        self.mods = {1: 0, 2: 0, -1: 0, -2: 0}
        self.bans = set()
        self.name = None

    def clone(self) -> "_State":
        st = _State.__new__(_State)
        st.asserted = dict(self.asserted)
        st.pending = list(self.pending)
        st.ors = list(self.ors)
        st.mods = dict(self.mods)
        st.bans = set(self.bans)
        st.name = self.name
        return st

    def run(self, bindings: dict) -> bool:
        """Drain the worklist; False means the state clashed."""
        while self.pending:
            if not self._add(self.pending.pop(), bindings):
                return False
        return True

    def _add(self, f, bindings) -> bool:
        if f is fm.TRUE:
            return True
        if f.kind == fm.FALSE_K:
            return False
        if f in self.asserted:
            return True
        k = f.kind
        if k == fm.NAME:
            if self.name is not None and self.name != f.name:
                return False            # one element name per node
            if fm.neg(f) in self.asserted:
                return False
            self.name = f.name
        elif k in (fm.PROP, fm.CTX, fm.ATTR):
            if fm.neg(f) in self.asserted:
                return False
        elif k == fm.NOT:
            x = f.subs[0]
            if x in self.asserted:
                return False
            if x.kind == fm.MOD and x.subs[0] is fm.TRUE:
                if self.mods[x.prog]:
                    return False
                self.bans.add(x.prog)
            elif x.kind not in _LOCAL_ATOMS:
                raise TreelogicError("solver requires negation normal form")
        elif k == fm.MOD:
            p = f.prog
            if p in self.bans:
                return False
            if p < 0:
                other = -2 if p == -1 else -1
                if self.mods[other]:
                    return False        # a node hangs from one parent link
            self.mods[p] += 1
        elif k == fm.AND:
            self.pending.extend(reversed(f.subs))
        elif k == fm.OR:
            self.ors.append(f)
        elif k == fm.VAR:
            body = bindings.get(f.name)
            if body is None:
                raise TreelogicError(f"unbound variable ${f.name}")
            self.pending.append(body)
        elif k == fm.LET:
            self.pending.append(f.subs[0])
        elif k == fm.ABSENT:
            raise UnresolvedPlaceholder(
                "attribute placeholders must be resolved before solving")
        elif k == fm.CALL:
            raise UnexpandedPredicate(
                f"predicate {f.name} must be expanded before solving")
        else:
            raise TreelogicError("solver requires negation normal form")
        self.asserted[f] = None
        return True

    def _resolved(self, leaves) -> bool:
        for leaf in leaves:
            if leaf is fm.TRUE or leaf in self.asserted:
                return True
            # an existence probe already guaranteed by a demand or link
            if (leaf.kind == fm.MOD and leaf.subs[0] is fm.TRUE
                    and self.mods[leaf.prog]):
                return True
        return False

    def _deferrable(self, leaves) -> bool:
        for leaf in leaves:
            if leaf.kind != fm.NOT:
                continue
            x = leaf.subs[0]
            if x.kind in _LOCAL_ATOMS and x not in self.asserted:
                return True             # default-false atom satisfies it
            if (x.kind == fm.MOD and x.subs[0] is fm.TRUE and x.prog > 0
                    and not self.mods[x.prog]):
                return True             # no demand, so no child gets built
        return False

    def pick_branch(self, leaves_of):
        """First disjunction that neither membership nor the default-false
        reading settles; None when the state is complete."""
        for o in self.ors:
            leaves = leaves_of(o)
            if self._resolved(leaves) or self._deferrable(leaves):
                continue
            return o
        return None


class SatResult:
    """Solver verdict.  Truthy iff satisfiable; then witness is a finite
    binary tree and marked is the node where the input formula holds."""

    __slots__ = ("status", "witness", "marked", "stats")

    def __init__(self, status: str, witness: BinaryTree | None = None,
                 marked: BinNode | None = None, stats: dict | None = None):
        self.status = status
        self.witness = witness
        self.marked = marked
        self.stats = stats or {}

    def __bool__(self) -> bool:
        return self.status == "sat"

    def __repr__(self):
        return f"SatResult({self.status})"


class _Solver:
    def __init__(self, nnf, budget: int):
        self.budget = budget
        self.used = 0
        self.requests = 0
        self.branches = 0
        rname = fm.fresh_name("R")
        rvar = fm.var(rname)
        walk = fm.disj(nnf, fm.disj(fm.modal(1, rvar), fm.modal(2, rvar)))
        self.goal = fm.let([(rname, walk)], rvar)
        self.bindings = fm.collect_bindings(self.goal)
        self.root_seed = frozenset([
            self.goal,
            fm.neg(fm.modal(-1, fm.TRUE)),
            fm.neg(fm.modal(-2, fm.TRUE)),
        ])
        self.other_name = _fresh_label(fm.collect_element_names(self.goal))
        self._leaf_memo: dict = {}
        self._seed_memo: dict = {}
        self._types: dict = {}
        self._all: list = []
        self._queue: deque = deque()
        self._requested: set = set()
        self._origins: dict = {}
        self._origin_seen: set = set()
        self._missing: dict = {}
        self._missing_seen: set = set()
        self._slot_cands: dict = {}
        self._slot_seen: set = set()
        self._root_cands: list = []
        self._root_seen: set = set()
        # incremental admission: a type is admitted once every demanded
        # slot has at least one admitted candidate (monotone, so this
        # can be maintained as slots and types are discovered)
        self._admitted: set = set()
        self._adm_unsat: dict = {}
        self._adm_by_cand: dict = {}

    # -- plumbing -----------------------------------------------------------

    def _spend(self, n: int = 1):
        self.used += n
        if self.used > self.budget:
            raise ResourceLimit(
                f"node-type budget exceeded (more than {self.budget} "
                f"states explored)")

    def _leaves(self, f):
        out = self._leaf_memo.get(f.uid)
        if out is None:
            acc, stack, seen = [], [f], set()
            while stack:
                g = stack.pop()
                if g.kind == fm.OR:
                    stack.extend(reversed(g.subs))
                elif g.uid not in seen:
                    seen.add(g.uid)
                    acc.append(g)
            out = tuple(acc)
            self._leaf_memo[f.uid] = out
        return out

    # -- saturation ---------------------------------------------------------

    def saturate(self, seed: frozenset):
        """All complete clash-free states reachable from the seed."""
        hit = self._seed_memo.get(seed)
        if hit is not None:
            return hit
        out, out_keys, seen = [], set(), set()
        first = _State()
        first.pending.extend(sorted(seed, key=lambda g: g.uid, reverse=True))
        stack = [first]
        while stack:
            st = stack.pop()
            self._spend()
            if not st.run(self.bindings):
                continue
            key = frozenset(st.asserted)
            if key in seen:
                continue
            seen.add(key)
            o = st.pick_branch(self._leaves)
            if o is None:
                if key not in out_keys:
                    out_keys.add(key)
                    out.append(self._intern(key))
                continue
            self.branches += 1
            for leaf in reversed(self._leaves(o)):
                st2 = st.clone()
                st2.pending.append(leaf)
                stack.append(st2)
        result = tuple(out)
        self._seed_memo[seed] = result
        return result

    def _intern(self, members: frozenset) -> _Type:
        t = self._types.get(members)
        if t is None:
            self._spend()
            t = _Type(members, len(self._all))
            self._types[members] = t
            self._all.append(t)
            slots = {p for p in (1, 2) if t.demands[p]}
            if slots:
                self._adm_unsat[t] = slots
            else:
                self._admit(t)
        return t

    def _admit(self, t: _Type):
        if t in self._admitted:
            return
        self._admitted.add(t)
        stack = [t]
        while stack:
            c = stack.pop()
            for parent, p in self._adm_by_cand.get(c, ()):
                slots = self._adm_unsat.get(parent)
                if slots and p in slots:
                    slots.discard(p)
                    if not slots and parent not in self._admitted:
                        self._admitted.add(parent)
                        stack.append(parent)

    # -- request processing -------------------------------------------------

    def _request(self, seed: frozenset, role):
        key = (seed, role)
        if key not in self._requested:
            self._requested.add(key)
            self._queue.append(key)

    def _child_seed(self, t: _Type, p: int) -> frozenset:
        q = 2 if p == 1 else 1
        parts = [h for h in t.demands[p] if h is not fm.TRUE]
        parts.append(fm.modal(-p, fm.TRUE))          # it hangs below a parent
        parts.append(fm.neg(fm.modal(-q, fm.TRUE)))  # via p, hence not via q
        return frozenset(parts)

    def _refine(self, parent: _Type, missing: frozenset):
        if (parent, missing) in self._missing_seen:
            return
        self._missing_seen.add((parent, missing))
        self._missing.setdefault(parent, []).append(missing)
        for seed0, role0 in list(self._origins.get(parent, ())):
            self._request(seed0 | missing, role0)

    def _register(self, t: _Type, seed: frozenset, role):
        pair = (seed, role)
        if (t, pair) not in self._origin_seen:
            self._origin_seen.add((t, pair))
            self._origins.setdefault(t, []).append(pair)
            # replay gaps discovered before this origin existed
            for missing in list(self._missing.get(t, ())):
                self._request(seed | missing, role)
        if role[0] == "root":
            if t not in self._root_seen:
                self._root_seen.add(t)
                self._root_cands.append(t)
        else:
            _, parent, p = role
            if -p not in t.bans:    # a type denying the link cannot fill it
                missing = frozenset(h for h in t.upward[p]
                                    if h not in parent.members)
                if missing:
                    self._refine(parent, missing)
                else:
                    mark = (parent, p, t)
                    if mark not in self._slot_seen:
                        self._slot_seen.add(mark)
                        self._slot_cands.setdefault((parent, p), []).append(t)
                        self._adm_by_cand.setdefault(
                            t, []).append((parent, p))
                        if t in self._admitted:
                            slots = self._adm_unsat.get(parent)
                            if slots and p in slots:
                                slots.discard(p)
                                if not slots:
                                    self._admit(parent)
        if not t.children_requested:
            t.children_requested = True
            for p in (1, 2):
                if t.demands[p]:
                    self._request(self._child_seed(t, p), ("child", t, p))

    # -- admission ----------------------------------------------------------

    def _admission(self) -> dict:
        # breadth-first over the "every demanded slot has an admitted
        # filler" condition; a worklist keeps each slot edge O(1)
        admitted: dict = {}
        unsat: dict = {}
        by_cand: dict = {}
        level = []
        for t in self._all:
            slots = {p for p in (1, 2) if t.demands[p]}
            if slots:
                unsat[t] = slots
            else:
                level.append(t)
        for (parent, p), cands in self._slot_cands.items():
            for c in cands:
                by_cand.setdefault(c, []).append((parent, p))
        wave = 0
        while level:
            wave += 1
            for t in level:
                admitted[t] = wave
            if any(t in self._root_seen for t in level):
                return admitted     # early out: a root shape is realizable
            nxt = []
            for t in level:
                for parent, p in by_cand.get(t, ()):
                    slots = unsat.get(parent)
                    if slots and p in slots:
                        slots.discard(p)
                        if not slots:
                            nxt.append(parent)
            level = nxt
        return admitted

    def _find_root(self, admitted: dict):
        best = None
        for r in self._root_cands:
            if r in admitted and (best is None
                                  or admitted[r] < admitted[best]):
                best = r
        return best

    def solve(self):
        self._request(self.root_seed, _ROOT_ROLE)
        while self._queue:
            n = 0
            while self._queue and n < 128:
                seed, role = self._queue.popleft()
                self.requests += 1
                for t in self.saturate(seed):
                    self._register(t, seed, role)
                n += 1
            if any(r in self._admitted for r in self._root_cands):
                # waves are only needed now, for linking and reporting
                admitted = self._admission()
                return self._find_root(admitted), admitted
        return None, self._admission()

    # -- witness ------------------------------------------------------------

    def build(self, t: _Type, admitted: dict) -> BinNode:
        props = set(t.props)
        if t.has_ctx:
            props.add(CONTEXT_PROP)
        node = BinNode(t.name if t.name is not None else self.other_name,
                       {a: "" for a in t.attrs}, props, False)
        for p in (1, 2):
            if t.demands[p]:
                best, best_w = None, None
                for c in self._slot_cands[(t, p)]:
                    w = admitted.get(c)
                    if w is not None and (best_w is None or w < best_w):
                        best, best_w = c, w
                node.attach(p, self.build(best, admitted))
        return node

    def stats(self, admitted: dict) -> dict:
        return {
            "types": len(self._all),
            "seeds": len(self._seed_memo),
            "requests": self.requests,
            "branches": self.branches,
            "admitted": len(admitted),
            "waves": max(admitted.values(), default=0),
            "budget_used": self.used,
        }


def _fresh_label(taken) -> str:
    """Deterministic element name outside the formula's alphabet, used for
    witness nodes whose name the formula leaves unconstrained."""
    taken = set(taken)
    for i in itertools.count():
        cand = "e" if i == 0 else f"e{i}"
        if cand not in taken:
            return cand


def _mark_goal(f, tree: BinaryTree) -> BinNode:
    """Mark and return the first node (document order) satisfying f.

    Doubles as the soundness gate: a witness none of whose nodes satisfies
    the formula is a solver bug and is reported loudly.
    """
    checker = ModelChecker(f)
    for node in tree.walk():
        if checker.holds(f, node):
            node.marked = True
            return node
    raise TreelogicError(
        "internal error: solver produced a witness that fails the model "
        "check")


def satisfiable(f, budget: int = DEFAULT_BUDGET) -> SatResult:
    """Decide whether f holds at some node of some finite binary tree.

    The formula is normalized and cycle-checked here; predicates and
    attribute placeholders must already be gone.  Sat results carry a
    witness tree, independently re-checked, with the satisfying node
    marked.
    """
    if fm.contains_kind(f, fm.CALL):
        raise UnexpandedPredicate("expand predicates before solving")
    if fm.contains_kind(f, fm.ABSENT):
        raise UnresolvedPlaceholder(
            "resolve attribute placeholders before solving")
    nnf = fm.normalize(f)
    fm.check_cycle_free(nnf)
    if nnf is fm.FALSE:
        return SatResult("unsat", stats={"types": 0, "requests": 0,
                                         "budget_used": 0})
    engine = _Solver(nnf, budget)
    root, admitted = engine.solve()
    if root is None:
        return SatResult("unsat", stats=engine.stats(admitted))
    tree = BinaryTree(engine.build(root, admitted))
    marked = _mark_goal(f, tree)
    return SatResult("sat", tree, marked, engine.stats(admitted))
