"""STRIPS data model: literals, states, operators, grounding and application.

States are frozensets of ground positive literals under the closed-world
assumption (anything absent is false).  Operators carry a nonstandard
extension on top of plain add/delete effects: universally quantified delete
clauses with an optional inequality constraint on the quantified variable,
e.g. ``(forall ?x != ?o: (not (p ?x)))``.  Those clauses are expanded at
grounding time, so ground operators are ordinary STRIPS operators.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable


class PddlError(Exception):
    """Base class for planning-layer failures."""


class PreconditionError(PddlError):
    """Operator applied in a state that does not satisfy its preconditions."""


@dataclass(frozen=True, order=True)
class Literal:
    pred: str
    args: tuple[str, ...] = ()
    positive: bool = True

    def negate(self) -> "Literal":
        return Literal(self.pred, self.args, not self.positive)

    def atom(self) -> "Literal":
        """The positive version of this literal."""
        return self if self.positive else Literal(self.pred, self.args, True)

    def __str__(self) -> str:
        inner = "(%s)" % " ".join((self.pred,) + self.args)
        return inner if self.positive else "(not %s)" % inner


# A symbolic state is a frozenset of ground positive literals.
SymbolicState = frozenset


def lit(pred: str, *args: str) -> Literal:
    return Literal(pred, tuple(args))


def state_of(*literals: Literal) -> SymbolicState:
    return frozenset(literals)


@dataclass(frozen=True)
class QuantifiedDelete:
    """A ``(forall ?v [!= ?p]: (not ...) ...)`` effect clause.

    ``templates`` holds the atoms to delete; they may mention the quantified
    variable, operator parameters, constants, or further free variables.
    Free variables are expanded over all objects at grounding time.
    """

    var: str
    neq: str | None
    templates: tuple[Literal, ...]


@dataclass(frozen=True)
class Operator:
    """A lifted STRIPS operator (action schema)."""

    name: str
    params: tuple[str, ...]
    precond: tuple[Literal, ...]
    adds: tuple[Literal, ...]
    dels: tuple[Literal, ...]
    quantified: tuple[QuantifiedDelete, ...] = ()


@dataclass(frozen=True)
class GroundOperator:
    name: str
    args: tuple[str, ...]
    pre_pos: frozenset
    pre_neg: frozenset
    adds: frozenset
    dels: frozenset

    @property
    def key(self) -> tuple[str, tuple[str, ...]]:
        return (self.name, self.args)

    def applicable(self, state: SymbolicState) -> bool:
        return self.pre_pos <= state and not (self.pre_neg & state)

    def __str__(self) -> str:
        return "%s(%s)" % (self.name, ", ".join(self.args))


@dataclass(frozen=True)
class Domain:
    name: str
    objects: tuple[str, ...]
    predicates: dict  # name -> arity
    operators: tuple[Operator, ...]

    def operator(self, name: str) -> Operator:
        for op in self.operators:
            if op.name == name:
                return op
        raise KeyError(name)


def _subst(literal: Literal, binding: dict) -> Literal:
    args = tuple(binding.get(a, a) for a in literal.args)
    for a in args:
        if a.startswith("?"):
            raise PddlError("unbound variable %s in %s" % (a, literal))
    return Literal(literal.pred, args, literal.positive)


def _expand_quantified(clause: QuantifiedDelete, binding: dict,
                       objects: Iterable[str]) -> set:
    """Expand one quantified delete clause under a parameter binding.

    The quantified variable ranges over all objects except the one bound to
    the inequality parameter (when present).  Templates that do not mention
    the quantified variable are variable-independent conjuncts and expand
    unconditionally, even when the candidate set is empty.  Any remaining
    free variables range over all objects.
    """
    objects = tuple(objects)
    excluded = binding.get(clause.neq) if clause.neq else None
    candidates = [o for o in objects if o != excluded]
    out = set()

    def expand(template: Literal, local: dict):
        free = sorted({a for a in template.args
                       if a.startswith("?") and a not in local})
        for combo in product(objects, repeat=len(free)):
            full = dict(local)
            full.update(zip(free, combo))
            out.add(_subst(template, full).atom())

    for tpl in clause.templates:
        if clause.var in tpl.args:
            for val in candidates:
                local = dict(binding)
                local[clause.var] = val
                expand(tpl, local)
        else:
            expand(tpl, dict(binding))
    return out


def ground_operator(op: Operator, args: tuple[str, ...],
                    objects: Iterable[str]) -> GroundOperator:
    binding = dict(zip(op.params, args))
    pre = [_subst(p, binding) for p in op.precond]
    adds = frozenset(_subst(a, binding) for a in op.adds)
    dels = set(_subst(d, binding).atom() for d in op.dels)
    for clause in op.quantified:
        dels |= _expand_quantified(clause, binding, objects)
    return GroundOperator(
        name=op.name,
        args=args,
        pre_pos=frozenset(p for p in pre if p.positive),
        pre_neg=frozenset(p.atom() for p in pre if not p.positive),
        adds=adds,
        dels=frozenset(dels),
    )


def ground_operators(domain: Domain,
                     objects: Iterable[str] | None = None) -> list:
    """Instantiate every operator for every parameter combination.

    Parameter tuples include repeated objects; only an explicit inequality in
    a quantified clause restricts expansion.  The result is sorted by
    (name, args) so downstream search is deterministic.
    """
    objs = tuple(objects) if objects is not None else domain.objects
    out = []
    for op in domain.operators:
        if op.params:
            for combo in product(objs, repeat=len(op.params)):
                out.append(ground_operator(op, combo, objs))
        else:
            out.append(ground_operator(op, (), objs))
    out.sort(key=lambda g: g.key)
    return out


def apply(state: SymbolicState, op: GroundOperator) -> SymbolicState:
    """Standard STRIPS progression: (state - deletes) | adds."""
    if not op.applicable(state):
        missing = sorted(str(p) for p in op.pre_pos - state)
        present = sorted(str(p) for p in op.pre_neg & state)
        raise PreconditionError(
            "%s not applicable (missing %s, forbidden %s)"
            % (op, missing, present))
    return frozenset((state - op.dels) | op.adds)


def satisfies(state: SymbolicState, goal: Iterable[Literal]) -> bool:
    for g in goal:
        if g.positive and g not in state:
            return False
        if not g.positive and g.atom() in state:
            return False
    return True
