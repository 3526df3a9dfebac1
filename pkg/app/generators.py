"""
Test Case Generators
--------------------
Deterministic generators that turn a byte string into schemas, entity
stores, requests and policies.

Every decision reads one byte from a ``ByteCursor``. Once the bytes run out
every decision returns 0, and alternative 0 is always the smallest one
(fewest types, no attributes, a leaf expression), so any byte string,
including the empty one, yields a small valid case. That is what makes
corpus files replayable and lets the minimiser chop bytes freely.

Policy generators come in three modes:
    TYPE_DIRECTED_ABAC: one policy whose condition is built to typecheck
        (with an occasional deliberately ill-typed perturbation)
    ARBITRARY_ABAC:     one policy whose condition uses declared names but
        ignores types
    RBAC:               several condition-free policies
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional, Sequence

from app import config
from app.models import (
    ACTION_TYPE,
    ANY,
    BOOL,
    LONG,
    LONG_MAX,
    LONG_MIN,
    STRING,
    WILDCARD,
    ActionDecl,
    And,
    AttrType,
    BinaryOp,
    BinOp,
    Bool,
    BoolT,
    Condition,
    ConditionKind,
    Effect,
    Entities,
    EntityData,
    EntityLit,
    EntityRef,
    EntityT,
    EntityTypeDecl,
    EntityUID,
    EqScope,
    Expr,
    GetAttr,
    HasAttr,
    If,
    InScope,
    InSetScope,
    Like,
    Lit,
    Long,
    LongT,
    Neg,
    Not,
    Or,
    Pattern,
    Policy,
    PolicySet,
    Record,
    RecordLit,
    RecordT,
    Request,
    Schema,
    SetLit,
    SetT,
    SetValue,
    Str,
    StringT,
    Type,
    Value,
    Var,
    VarName,
    expr_size,
    replace_subexpr,
    walk,
)
from app.validator import RequestEnv

logger = logging.getLogger(__name__)

TYPE_NAMES = ("User", "Team", "List", "Application", "Document", "Folder", "Group", "Task")
# "if" and "display name" have no bare form and always print quoted
ATTRIBUTE_NAMES = ("owner", "readers", "editors", "name", "level", "tags", "active", "size", "if", "display name")
ACTION_NAMES = ("GetList", "CreateList", "UpdateList", "DeleteList", "ShareList", "ReadDoc")
ENTITY_IDS = ("alice", "bob", "carol", "dave", "eve", "frank", "grace", "heidi")
STRINGS = ("", "a", "alice", "*", "foo bar", "été", 'say "hi"', "a\\b")
PATTERN_CHARS = ("a", "b", "*", "é", '"')
LONGS = (0, 1, 2, 3, -1, 5, 7, 10, 42, -7, 100, -100, 1000, 9, LONG_MAX, LONG_MIN)

# Limits never exceed these, whatever the configuration says.
LIMIT_CAPS = {
    "max_entity_types": 4,
    "max_attributes": 4,
    "max_entities": 8,
    "max_type_depth": 3,
    "max_actions": 4,
}


# ============================================================================
# CURSOR, LIMITS, WORLD
# ============================================================================

class ByteCursor:
    """
    Reads generator decisions from a byte string.

    Example:
        cursor = ByteCursor(b"\\x05\\x02")
        cursor.choose(4)  # -> 1   (5 % 4)
        cursor.choose(4)  # -> 2
        cursor.choose(4)  # -> 0   (exhausted)
    """

    def __init__(self, data: bytes):
        self.data = bytes(data)
        self.position = 0

    @property
    def exhausted(self) -> bool:
        return self.position >= len(self.data)

    def choose(self, n: int) -> int:
        """Pick an alternative in ``range(n)``; 0 once the bytes are used up."""
        if n <= 1 or self.exhausted:
            return 0
        value = self.data[self.position]
        self.position += 1
        return value % n

    def flip(self) -> bool:
        return self.choose(2) == 1

    def pick(self, options: Sequence):
        return options[self.choose(len(options))]

    def clone(self) -> "ByteCursor":
        twin = ByteCursor(self.data)
        twin.position = self.position
        return twin


@dataclass(frozen=True)
class GeneratorLimits:
    max_entity_types: int = 4
    max_attributes: int = 4
    max_entities: int = 8
    max_type_depth: int = 3
    max_actions: int = 4
    max_expr_depth: int = 4
    max_policies: int = 8
    perturbation_rate: int = 16

    def __post_init__(self):
        for name, cap in LIMIT_CAPS.items():
            object.__setattr__(self, name, max(1, min(getattr(self, name), cap)))
        object.__setattr__(self, "max_attributes", max(0, self.max_attributes))
        object.__setattr__(self, "max_expr_depth", max(0, self.max_expr_depth))
        object.__setattr__(self, "max_policies", max(1, self.max_policies))
        object.__setattr__(self, "perturbation_rate", max(2, self.perturbation_rate))

    @classmethod
    def from_config(cls) -> "GeneratorLimits":
        return cls(
            max_entity_types=config.GEN_MAX_ENTITY_TYPES,
            max_attributes=config.GEN_MAX_ATTRIBUTES,
            max_entities=config.GEN_MAX_ENTITIES,
            max_type_depth=config.GEN_MAX_TYPE_DEPTH,
            max_actions=config.GEN_MAX_ACTIONS,
            max_expr_depth=config.GEN_MAX_EXPR_DEPTH,
            max_policies=config.GEN_MAX_POLICIES,
            perturbation_rate=config.GEN_PERTURBATION_RATE,
        )


class GeneratorMode(Enum):
    TYPE_DIRECTED_ABAC = "type-directed-abac"
    ARBITRARY_ABAC = "arbitrary-abac"
    RBAC = "rbac"


@dataclass(frozen=True)
class World:
    schema: Schema
    store: Entities
    request: Request

    def env(self) -> RequestEnv:
        """The request environment of this world's request."""
        decl = self.schema.actions[self.request.action]
        return RequestEnv(self.request.principal.type_name, self.request.action,
                          self.request.resource.type_name, decl.context)

    def entities_of_type(self, type_name: str) -> list[EntityUID]:
        return [uid for uid in self.store if uid.type_name == type_name]


# ============================================================================
# WORLDS
# ============================================================================

def _gen_type(cursor: ByteCursor, type_names: Sequence[str], depth: int, limits: GeneratorLimits) -> Type:
    leaves: list[Callable[[], Type]] = [
        lambda: BOOL,
        lambda: LONG,
        lambda: STRING,
        lambda: EntityT(cursor.pick(type_names)),
    ]
    nested: list[Callable[[], Type]] = []
    if depth < limits.max_type_depth:
        nested = [
            lambda: SetT(_gen_type(cursor, type_names, depth + 1, limits)),
            lambda: _gen_record_type(cursor, type_names, depth + 1, limits, cursor.choose(3)),
        ]
    return cursor.pick(leaves + nested)()


def _gen_record_type(cursor: ByteCursor, type_names: Sequence[str], depth: int,
                     limits: GeneratorLimits, count: int) -> RecordT:
    attrs: dict[str, AttrType] = {}
    available = list(ATTRIBUTE_NAMES)
    for _ in range(count):
        name = available.pop(cursor.choose(len(available)))
        required = cursor.choose(2) == 0
        attrs[name] = AttrType(_gen_type(cursor, type_names, depth, limits), required)
    return RecordT.of(attrs)


def _gen_value(cursor: ByteCursor, declared: Type, uids_by_type: dict[str, list[EntityUID]]) -> Value:
    if isinstance(declared, BoolT):
        return Bool(cursor.flip())
    if isinstance(declared, LongT):
        return Long(cursor.pick(LONGS))
    if isinstance(declared, StringT):
        return Str(cursor.pick(STRINGS))
    if isinstance(declared, EntityT):
        return EntityRef(cursor.pick(uids_by_type[declared.name]))
    if isinstance(declared, SetT):
        return SetValue(frozenset(
            _gen_value(cursor, declared.element, uids_by_type) for _ in range(cursor.choose(3))))
    return _gen_record(cursor, declared, uids_by_type)


def _gen_record(cursor: ByteCursor, shape: RecordT, uids_by_type: dict[str, list[EntityUID]]) -> Record:
    fields = {}
    for name, attr in shape.attrs:
        if attr.required or cursor.flip():
            fields[name] = _gen_value(cursor, attr.type, uids_by_type)
    return Record.of(fields)


def gen_world(cursor: ByteCursor, limits: Optional[GeneratorLimits] = None) -> World:
    """
    Generate a schema, a conforming entity store and a conforming request.

    Args:
        cursor: Source of decisions
        limits: Size limits (defaults from configuration)

    Returns:
        World whose store and request conform to its schema

    Example:
        gen_world(ByteCursor(b"")) -> one entity type, no attributes,
        one entity and one action
    """
    limits = limits or GeneratorLimits.from_config()

    # Entity types; a type may only list later types as parents.
    type_count = 1 + cursor.choose(limits.max_entity_types)
    offset = cursor.choose(len(TYPE_NAMES))
    type_names = [TYPE_NAMES[(offset + i) % len(TYPE_NAMES)] for i in range(type_count)]
    parent_types = {
        name: frozenset(later for later in type_names[i + 1:] if cursor.flip())
        for i, name in enumerate(type_names)
    }
    entity_types = {
        name: EntityTypeDecl(
            _gen_record_type(cursor, type_names, 1, limits, cursor.choose(limits.max_attributes + 1)),
            parent_types[name],
        )
        for name in type_names
    }

    # Actions; an action may only be a member of later actions.
    action_count = 1 + cursor.choose(limits.max_actions)
    action_uids = [EntityUID((ACTION_TYPE,), name) for name in ACTION_NAMES[:action_count]]
    actions = {}
    for i, uid in enumerate(action_uids):
        principal_types = {cursor.pick(type_names)} | {t for t in type_names if cursor.choose(4) == 3}
        resource_types = {cursor.pick(type_names)} | {t for t in type_names if cursor.choose(4) == 3}
        context = _gen_record_type(cursor, type_names, 2, limits, cursor.choose(3))
        parents = frozenset(later for later in action_uids[i + 1:] if cursor.choose(3) == 2)
        actions[uid] = ActionDecl(frozenset(principal_types), frozenset(resource_types), context, parents)
    schema = Schema(entity_types, actions)

    # Entities: one per type first, then extras; parents only point later in the list.
    entity_count = max(type_count, min(limits.max_entities, type_count + cursor.choose(limits.max_entities)))
    entity_count = min(entity_count, len(ENTITY_IDS))
    uids = [EntityUID((name,), ENTITY_IDS[i]) for i, name in enumerate(type_names)]
    uids += [EntityUID((cursor.pick(type_names),), ENTITY_IDS[i]) for i in range(type_count, entity_count)]
    uids_by_type = {name: [uid for uid in uids if uid.type_name == name] for name in type_names}
    uids_by_type[ACTION_TYPE] = action_uids

    entities = {}
    for i, uid in enumerate(uids):
        allowed = entity_types[uid.type_name].allowed_parent_types
        parents = frozenset(later for later in uids[i + 1:] if later.type_name in allowed and cursor.flip())
        attrs = _gen_record(cursor, entity_types[uid.type_name].attributes, uids_by_type)
        entities[uid] = EntityData(attrs, parents)
    for uid in action_uids:
        entities[uid] = EntityData(Record(()), actions[uid].parents)
    store = Entities(entities)

    action = cursor.pick(action_uids)
    decl = actions[action]
    principal = cursor.pick([uid for uid in uids if uid.type_name in decl.principal_types])
    resource = cursor.pick([uid for uid in uids if uid.type_name in decl.resource_types])
    context = _gen_record(cursor, decl.context, uids_by_type)
    return World(schema, store, Request(principal, action, resource, context))


# ============================================================================
# TYPED EXPRESSIONS
# ============================================================================

@dataclass(frozen=True)
class _Path:
    """An attribute access path and the ``has`` tests that must hold before reading it."""
    expr: Expr
    type: Type
    guards: tuple = ()


def _conjunction(tests: Sequence[Expr]) -> Expr:
    result = tests[0]
    for test in tests[1:]:
        result = And(result, test)
    return result


class _TypedExprGen:
    """Builds expressions that typecheck to a requested type under one env."""

    def __init__(self, cursor: ByteCursor, env: RequestEnv, world: World):
        self.cursor = cursor
        self.env = env
        self.world = world
        self.paths = self._paths()

    def _attributes(self, receiver: Type) -> tuple:
        if isinstance(receiver, RecordT):
            return receiver.attrs
        if isinstance(receiver, EntityT):
            decl = self.world.schema.entity_types.get(receiver.name)
            return decl.attributes.attrs if decl is not None else ()
        return ()

    def _paths(self) -> list[_Path]:
        roots = [
            _Path(Var(VarName.PRINCIPAL), EntityT(self.env.principal_type)),
            _Path(Var(VarName.ACTION), EntityT(self.env.action.type_name)),
            _Path(Var(VarName.RESOURCE), EntityT(self.env.resource_type)),
            _Path(Var(VarName.CONTEXT), self.env.context_type),
        ]
        paths = list(roots)
        frontier = roots
        for _ in range(2):
            extended = []
            for path in frontier:
                for name, attr in self._attributes(path.type):
                    guards = path.guards if attr.required else path.guards + (HasAttr(path.expr, name),)
                    extended.append(_Path(GetAttr(path.expr, name), attr.type, guards))
            paths.extend(extended)
            frontier = extended
        return paths

    # ------------------------------------------------------------------
    # type inventory
    # ------------------------------------------------------------------

    def constructible(self, target: Type) -> bool:
        """Types with a literal form (record literals only cover all-required shapes)."""
        if isinstance(target, (BoolT, LongT, StringT)):
            return True
        if isinstance(target, EntityT):
            return bool(self.world.entities_of_type(target.name))
        if isinstance(target, SetT):
            return self.constructible(target.element)
        if isinstance(target, RecordT):
            return all(attr.required and self.constructible(attr.type) for _, attr in target.attrs)
        return False

    def unguarded(self, target: Type) -> list[_Path]:
        return [p for p in self.paths if p.type == target and not p.guards]

    def inhabited(self, target: Type) -> bool:
        return self.constructible(target) or bool(self.unguarded(target))

    def type_pool(self) -> list[Type]:
        pool: list[Type] = [BOOL, LONG, STRING]
        pool += [EntityT(name) for name in sorted(self.world.schema.entity_types)]
        pool += [SetT(LONG), SetT(STRING), RecordT.of({"size": AttrType(LONG)})]
        for path in self.paths:
            if path.type not in pool and self.inhabited(path.type):
                pool.append(path.type)
        return pool

    def entity_types(self) -> list[str]:
        return [t.name for t in self.type_pool() if isinstance(t, EntityT)]

    # ------------------------------------------------------------------
    # leaves
    # ------------------------------------------------------------------

    def literal(self, target: Type) -> Expr:
        cursor = self.cursor
        if isinstance(target, BoolT):
            return Lit(Bool(cursor.choose(2) == 0))
        if isinstance(target, LongT):
            return Lit(Long(cursor.pick(LONGS)))
        if isinstance(target, StringT):
            return Lit(Str(cursor.pick(STRINGS)))
        if isinstance(target, EntityT):
            return EntityLit(cursor.pick(self.world.entities_of_type(target.name)))
        if isinstance(target, SetT):
            return SetLit(tuple(self.literal(target.element) for _ in range(1 + cursor.choose(2))))
        return RecordLit(tuple((name, self.literal(attr.type)) for name, attr in target.attrs))

    def access(self, path: _Path, target: Type) -> Expr:
        if not path.guards:
            return path.expr
        guard = _conjunction(path.guards)
        if isinstance(target, BoolT):
            return And(guard, path.expr)
        return If(guard, path.expr, self.literal(target))

    def leaf(self, target: Type) -> Expr:
        options: list[Callable[[], Expr]] = []
        if self.constructible(target):
            options.append(lambda: self.literal(target))
        for path in self.paths:
            if path.type == target and (not path.guards or self.constructible(target)):
                options.append(lambda path=path: self.access(path, target))
        return self.cursor.pick(options)()

    # ------------------------------------------------------------------
    # compound expressions
    # ------------------------------------------------------------------

    def expr(self, target: Type, depth: int) -> Expr:
        if depth <= 0 or self.cursor.exhausted:
            return self.leaf(target)
        sub = depth - 1
        if isinstance(target, BoolT):
            return self.boolean(sub)
        options: list[Callable[[], Expr]] = [
            lambda: self.leaf(target),
            lambda: If(self.expr(BOOL, sub), self.expr(target, sub), self.expr(target, sub)),
        ]
        if isinstance(target, LongT):
            options += [
                lambda: BinOp(BinaryOp.ADD, self.expr(LONG, sub), self.expr(LONG, sub)),
                lambda: BinOp(BinaryOp.SUB, self.expr(LONG, sub), self.expr(LONG, sub)),
                lambda: Neg(self.expr(LONG, sub)),
            ]
        if isinstance(target, SetT) and self.inhabited(target.element):
            options.append(lambda: SetLit(tuple(
                self.expr(target.element, sub) for _ in range(1 + self.cursor.choose(3)))))
        return self.cursor.pick(options)()

    def boolean(self, sub: int) -> Expr:
        """A compound Bool expression; never a bare literal."""
        cursor = self.cursor
        options: list[Callable[[], Expr]] = [
            lambda: BinOp(cursor.pick((BinaryOp.LT, BinaryOp.LE, BinaryOp.GT, BinaryOp.GE)),
                          self.expr(LONG, sub), self.expr(LONG, sub)),
            lambda: And(self.expr(BOOL, sub), self.expr(BOOL, sub)),
            lambda: Or(self.expr(BOOL, sub), self.expr(BOOL, sub)),
            lambda: Not(self.expr(BOOL, sub)),
            lambda: self.equality(sub),
            lambda: self.membership(sub),
            lambda: self.contains(sub),
            lambda: Like(self.expr(STRING, sub), self.pattern()),
            self.has_attr,
            lambda: If(self.expr(BOOL, sub), self.expr(BOOL, sub), self.expr(BOOL, sub)),
        ]
        bool_paths = [p for p in self.paths if p.type == BOOL]
        if bool_paths:
            options.append(lambda: self.access(cursor.pick(bool_paths), BOOL))
        return cursor.pick(options)()

    def equality(self, sub: int) -> Expr:
        op = BinaryOp.EQ if self.cursor.choose(2) == 0 else BinaryOp.NEQ
        target = self.cursor.pick(self.type_pool())
        return BinOp(op, self.expr(target, sub), self.expr(target, sub))

    def membership(self, sub: int) -> Expr:
        left = EntityT(self.cursor.pick(self.entity_types()))
        right_type = EntityT(self.cursor.pick(self.entity_types()))
        if self.cursor.flip():
            right = self.expr(SetT(right_type), sub)
        else:
            right = self.expr(right_type, sub)
        return BinOp(BinaryOp.IN, self.expr(left, sub), right)

    def contains(self, sub: int) -> Expr:
        candidates = [t for t in self.type_pool() if isinstance(t, SetT) and self.inhabited(t.element)]
        set_type = self.cursor.pick(candidates)
        return BinOp(BinaryOp.CONTAINS, self.expr(set_type, sub), self.expr(set_type.element, sub))

    def has_attr(self) -> Expr:
        receivers = [p for p in self.paths if not p.guards and isinstance(p.type, (EntityT, RecordT))]
        receiver = self.cursor.pick(receivers)
        declared = [name for name, _ in self._attributes(receiver.type)]
        return HasAttr(receiver.expr, self.cursor.pick(declared + list(ATTRIBUTE_NAMES)))

    def pattern(self) -> Pattern:
        elements = []
        for _ in range(self.cursor.choose(4)):
            elements.append(WILDCARD if self.cursor.choose(3) == 0 else self.cursor.pick(PATTERN_CHARS))
        return Pattern(tuple(elements))


def gen_expr(cursor: ByteCursor, env: RequestEnv, target: Type, world: World, depth: int) -> Expr:
    """
    Generate an expression that typechecks to ``target`` under ``env``.

    Optional attributes are only read behind their own ``has`` guards, and
    depth 0 always yields a leaf (a literal or an attribute access).

    Raises:
        ValueError: If ``target`` has neither a literal form nor an
            unguarded access path in ``env``
    """
    generator = _TypedExprGen(cursor, env, world)
    if not generator.inhabited(target):
        raise ValueError(f"no expression of type {target} is available")
    return generator.expr(target, max(0, depth))


def typed_expr_pool(env: RequestEnv, world: World) -> list[Type]:
    """Types ``gen_expr`` can always produce in ``env``."""
    return _TypedExprGen(ByteCursor(b""), env, world).type_pool()


# ============================================================================
# UNTYPED EXPRESSIONS
# ============================================================================

def _declared_names(schema: Schema) -> list[str]:
    names: set[str] = set()

    def visit(shape: Type) -> None:
        if isinstance(shape, RecordT):
            for name, attr in shape.attrs:
                names.add(name)
                visit(attr.type)
        elif isinstance(shape, SetT):
            visit(shape.element)

    for decl in schema.entity_types.values():
        visit(decl.attributes)
    for decl in schema.actions.values():
        visit(decl.context)
    return sorted(names) or ["name"]


def _gen_untyped(cursor: ByteCursor, world: World, names: list[str], depth: int) -> Expr:
    uids = list(world.store)
    leaves: list[Callable[[], Expr]] = [
        lambda: Lit(Bool(cursor.choose(2) == 0)),
        lambda: Lit(Long(cursor.pick(LONGS))),
        lambda: Lit(Str(cursor.pick(STRINGS))),
        lambda: Var(cursor.pick(list(VarName))),
        lambda: EntityLit(cursor.pick(uids)),
    ]
    if depth <= 0 or cursor.exhausted:
        return cursor.pick(leaves)()

    def sub() -> Expr:
        return _gen_untyped(cursor, world, names, depth - 1)

    def record() -> Expr:
        keys = [names[i] for i in sorted({cursor.choose(len(names)) for _ in range(cursor.choose(3))})]
        return RecordLit(tuple((key, sub()) for key in keys))

    compound: list[Callable[[], Expr]] = [
        lambda: Not(sub()),
        lambda: Neg(sub()),
        lambda: And(sub(), sub()),
        lambda: Or(sub(), sub()),
        lambda: If(sub(), sub(), sub()),
        lambda: BinOp(cursor.pick(list(BinaryOp)), sub(), sub()),
        lambda: Like(sub(), Pattern(tuple(
            WILDCARD if cursor.choose(3) == 0 else cursor.pick(PATTERN_CHARS)
            for _ in range(cursor.choose(4))))),
        lambda: HasAttr(sub(), cursor.pick(names)),
        lambda: GetAttr(sub(), cursor.pick(names)),
        lambda: SetLit(tuple(sub() for _ in range(cursor.choose(3)))),
        record,
    ]
    return cursor.pick(leaves + compound)()


# ============================================================================
# POLICIES
# ============================================================================

def _entity_scope(cursor: ByteCursor, world: World):
    uids = [uid for uid in world.store if not uid.is_action]
    choice = cursor.choose(3)
    if choice == 1:
        return EqScope(cursor.pick(uids))
    if choice == 2:
        return InScope(cursor.pick(uids))
    return ANY


def _action_scope(cursor: ByteCursor, world: World):
    actions = sorted(world.schema.actions)
    choice = cursor.choose(3)
    if choice == 1:
        return EqScope(cursor.pick(actions))
    if choice == 2:
        chosen = [uid for uid in actions if cursor.flip()] or [cursor.pick(actions)]
        return InSetScope(tuple(chosen))
    return ANY


def _pinned_entity_scope(cursor: ByteCursor, world: World, requested: EntityUID):
    """``==`` on an entity of the requested type, or ``in`` when no other type can sit below it."""
    type_name = requested.type_name
    same_type = world.entities_of_type(type_name)
    target = requested if cursor.choose(2) == 0 else cursor.pick(same_type)
    below = [other for other in world.schema.entity_types
             if other != type_name and type_name in world.schema.ancestor_types(other)]
    if not below and cursor.flip():
        return InScope(target)
    return EqScope(target)


def _pinned_action_scope(cursor: ByteCursor, world: World, action: EntityUID):
    members = [other for other in world.schema.actions
               if other != action and action in world.schema.action_ancestors(other)]
    if not members and cursor.flip():
        return InSetScope((action,))
    return EqScope(action)


def _typed_condition(cursor: ByteCursor, world: World, limits: GeneratorLimits, perturb: bool,
                     full_depth: Optional[list] = None) -> Condition:
    kind = ConditionKind.WHEN if cursor.choose(2) == 0 else ConditionKind.UNLESS
    generator = _TypedExprGen(cursor, world.env(), world)
    depth = cursor.choose(limits.max_expr_depth + 1)
    literal_first = depth == 0 and cursor.choose(2) == 0
    if full_depth is not None:
        full_depth.append(_TypedExprGen(cursor.clone(), world.env(), world).expr(BOOL, limits.max_expr_depth))
    if literal_first:
        body = generator.literal(BOOL)
    else:
        body = generator.expr(BOOL, depth)
    if perturb and cursor.choose(limits.perturbation_rate) == limits.perturbation_rate - 1:
        index = cursor.choose(expr_size(body))
        body = replace_subexpr(body, index, lambda node: BinOp(BinaryOp.ADD, node, Lit(Bool(True))))
        logger.debug("Perturbed typed condition")
    return Condition(kind, body)


def _effect(cursor: ByteCursor) -> Effect:
    return Effect.PERMIT if cursor.choose(2) == 0 else Effect.FORBID


def gen_policies(mode: GeneratorMode, cursor: ByteCursor, world: World,
                 limits: Optional[GeneratorLimits] = None, perturb: bool = True,
                 full_depth: Optional[list] = None) -> PolicySet:
    """
    Generate a policy set for a world.

    Args:
        mode: Generation style
        cursor: Source of decisions
        world: World whose names the policies use
        limits: Size limits (defaults from configuration)
        perturb: Allow the occasional ill-typed perturbation in typed mode
        full_depth: When given, typed mode appends an expression drawn by the
            expression generator at full depth from the bytes the condition
            body is drawn from (used for literal-fraction statistics)

    Returns:
        PolicySet with ids policy0, policy1, ...
    """
    limits = limits or GeneratorLimits.from_config()
    if mode is GeneratorMode.TYPE_DIRECTED_ABAC:
        request = world.request
        policy = Policy(
            "policy0",
            _effect(cursor),
            _pinned_entity_scope(cursor, world, request.principal),
            _pinned_action_scope(cursor, world, request.action),
            _pinned_entity_scope(cursor, world, request.resource),
            (_typed_condition(cursor, world, limits, perturb, full_depth),),
        )
        return PolicySet((policy,))

    if mode is GeneratorMode.ARBITRARY_ABAC:
        kind = ConditionKind.WHEN if cursor.choose(2) == 0 else ConditionKind.UNLESS
        effect = _effect(cursor)
        scopes = (_entity_scope(cursor, world), _action_scope(cursor, world), _entity_scope(cursor, world))
        body = _gen_untyped(cursor, world, _declared_names(world.schema), cursor.choose(limits.max_expr_depth + 1))
        return PolicySet((Policy("policy0", effect, *scopes, (Condition(kind, body),)),))

    count = 1 + cursor.choose(limits.max_policies)
    policies = []
    for index in range(count):
        policies.append(Policy(
            f"policy{index}",
            _effect(cursor),
            _entity_scope(cursor, world),
            _action_scope(cursor, world),
            _entity_scope(cursor, world),
        ))
    return PolicySet(tuple(policies))


def entity_literals(policy: Policy) -> frozenset:
    """Entity UIDs written as literals inside the policy's conditions."""
    return frozenset(
        node.uid
        for condition in policy.conditions
        for node in walk(condition.body)
        if isinstance(node, EntityLit)
    )


# ============================================================================
# EXHAUSTIVE ENUMERATION
# ============================================================================

ORACLE_GROUP = EntityUID(("Team",), "root")


def oracle_world() -> World:
    """Fixed three-entity world for exhaustive small-scale checks."""
    alice = EntityUID(("User",), "alice")
    team = EntityUID(("Team",), "t")
    store = Entities({
        alice: EntityData(Record.of({"name": Str("a")}), frozenset({team})),
        team: EntityData(Record.of({"name": Str("team")}), frozenset({ORACLE_GROUP})),
        ORACLE_GROUP: EntityData(Record(()), frozenset()),
    })
    schema = Schema(
        {
            "User": EntityTypeDecl(RecordT.of({"name": AttrType(STRING)}), frozenset({"Team"})),
            "Team": EntityTypeDecl(RecordT.of({"name": AttrType(STRING, False)}), frozenset({"Team"})),
        },
        {EntityUID((ACTION_TYPE,), "view"): ActionDecl(
            frozenset({"User"}), frozenset({"Team"}), RecordT.of({"name": AttrType(STRING)}))},
    )
    request = Request(alice, EntityUID((ACTION_TYPE,), "view"), team, Record.of({"name": Str("ctx")}))
    return World(schema, store, request)


_ENUM_LEAVES: tuple = (
    Lit(Bool(True)),
    Lit(Long(1)),
    Lit(Long(LONG_MAX)),
    Lit(Str("a")),
    Var(VarName.PRINCIPAL),
    Var(VarName.ACTION),
    Var(VarName.RESOURCE),
    Var(VarName.CONTEXT),
    EntityLit(ORACLE_GROUP),
)

_ENUM_UNARY: tuple = (
    Not,
    Neg,
    lambda e: HasAttr(e, "name"),
    lambda e: GetAttr(e, "name"),
    lambda e: Like(e, Pattern(("a", WILDCARD))),
)

_ENUM_BINARY: tuple = (
    And,
    Or,
    lambda a, b: BinOp(BinaryOp.EQ, a, b),
    lambda a, b: BinOp(BinaryOp.NEQ, a, b),
    lambda a, b: BinOp(BinaryOp.LT, a, b),
    lambda a, b: BinOp(BinaryOp.LE, a, b),
    lambda a, b: BinOp(BinaryOp.GT, a, b),
    lambda a, b: BinOp(BinaryOp.GE, a, b),
    lambda a, b: BinOp(BinaryOp.ADD, a, b),
    lambda a, b: BinOp(BinaryOp.SUB, a, b),
    lambda a, b: BinOp(BinaryOp.IN, a, b),
    lambda a, b: BinOp(BinaryOp.CONTAINS, a, b),
    lambda a, b: SetLit((a, b)),
    lambda a, b: RecordLit((("name", a), ("size", b))),
)


def enumerate_exprs(max_size: int) -> Iterator[Expr]:
    """
    Every expression over a small fixed alphabet with at most ``max_size`` nodes.

    The alphabet is nine leaves, five unary and fourteen binary constructors
    and ``if``; sizes count AST nodes.
    """
    by_size: dict[int, list[Expr]] = {}
    for size in range(1, max_size + 1):
        current: list[Expr] = []
        if size == 1:
            current.extend(_ENUM_LEAVES)
        else:
            for arg in by_size[size - 1]:
                current.extend(make(arg) for make in _ENUM_UNARY)
            for left_size in range(1, size - 1):
                for left in by_size[left_size]:
                    for right in by_size[size - 1 - left_size]:
                        current.extend(make(left, right) for make in _ENUM_BINARY)
            for a in range(1, size - 2):
                for b in range(1, size - 1 - a):
                    c = size - 1 - a - b
                    for cond in by_size[a]:
                        for then in by_size[b]:
                            for otherwise in by_size[c]:
                                current.append(If(cond, then, otherwise))
        by_size[size] = current
        yield from current
