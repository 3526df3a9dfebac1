"""
Reference Model
---------------
A second, deliberately simple implementation of evaluation, authorization,
slicing and validation, used as the oracle for differential testing.

Shares only ``app.models`` with production code: no imports from the
evaluator, authorizer, hierarchy or validator modules. Everything here is
direct structural recursion with no caching and no indexes.
"""

from __future__ import annotations

from app.models import (
    LONG_MAX,
    LONG_MIN,
    And,
    AnyScope,
    AttrType,
    BinaryOp,
    BinOp,
    Bool,
    BoolT,
    ConditionKind,
    Decision,
    Effect,
    Entities,
    EntityLit,
    EntityRef,
    EntityT,
    EntityUID,
    EqScope,
    EvalError,
    EvalTypeError,
    Expr,
    GetAttr,
    HasAttr,
    If,
    InScope,
    InSetScope,
    IntegerOverflowError,
    Like,
    Lit,
    Long,
    LongT,
    MissingAttrError,
    Neg,
    Not,
    Or,
    Policy,
    PolicySet,
    Record,
    RecordLit,
    RecordT,
    Request,
    Response,
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
    Wildcard,
)


# ============================================================================
# HIERARCHY
# ============================================================================

def ref_ancestors(store: Entities, uid: EntityUID) -> set:
    """Fixpoint iteration: keep adding parents of known ancestors until nothing changes."""
    found = set(store.parents(uid))
    while True:
        bigger = set(found)
        for ancestor in found:
            bigger |= store.parents(ancestor)
        if bigger == found:
            break
        found = bigger
    found.discard(uid)
    return found


def ref_in(store: Entities, a: EntityUID, b: EntityUID) -> bool:
    return a == b or b in ref_ancestors(store, a)


# ============================================================================
# EVALUATION
# ============================================================================

def _need(value: Value, *kinds: str) -> Value:
    if value.kind not in kinds:
        raise EvalTypeError(kinds, value.kind)
    return value


def _long(result: int) -> Long:
    if result < LONG_MIN or result > LONG_MAX:
        raise IntegerOverflowError()
    return Long(result)


def _like(text: str, elements: tuple) -> bool:
    """Naive recursive matcher."""
    if not elements:
        return text == ""
    head, rest = elements[0], elements[1:]
    if isinstance(head, Wildcard):
        return any(_like(text[i:], rest) for i in range(len(text) + 1))
    return text[:1] == head and _like(text[1:], rest)


def _attr(target: Value, store: Entities, name: str):
    if isinstance(target, Record):
        return target.get(name)
    data = store.get(target.uid)
    return None if data is None else data.attrs.get(name)


def ref_evaluate(expr: Expr, req: Request, store: Entities) -> Value:
    ev = lambda e: ref_evaluate(e, req, store)  # noqa: E731
    match expr:
        case Lit(value):
            return value
        case EntityLit(uid):
            return EntityRef(uid)
        case Var(VarName.PRINCIPAL):
            return EntityRef(req.principal)
        case Var(VarName.ACTION):
            return EntityRef(req.action)
        case Var(VarName.RESOURCE):
            return EntityRef(req.resource)
        case Var(VarName.CONTEXT):
            return req.context
        case Not(arg):
            return Bool(not _need(ev(arg), "Bool").value)
        case Neg(arg):
            return _long(-_need(ev(arg), "Long").value)
        case And(left, right):
            if not _need(ev(left), "Bool").value:
                return Bool(False)
            return _need(ev(right), "Bool")
        case Or(left, right):
            if _need(ev(left), "Bool").value:
                return Bool(True)
            return _need(ev(right), "Bool")
        case If(cond, then, otherwise):
            return ev(then) if _need(ev(cond), "Bool").value else ev(otherwise)
        case BinOp(op, left, right):
            return _ref_binary(op, ev(left), ev(right), store)
        case Like(arg, pattern):
            return Bool(_like(_need(ev(arg), "String").value, pattern.elements))
        case HasAttr(arg, name):
            return Bool(_attr(_need(ev(arg), "Entity", "Record"), store, name) is not None)
        case GetAttr(arg, name):
            found = _attr(_need(ev(arg), "Entity", "Record"), store, name)
            if found is None:
                raise MissingAttrError(name)
            return found
        case SetLit(elements):
            return SetValue(frozenset([ev(e) for e in elements]))
        case RecordLit(fields):
            values = [(name, ev(e)) for name, e in fields]
            return Record.of(dict(values))
    raise EvalTypeError(("Expr",), type(expr).__name__)


def _ref_binary(op: BinaryOp, a: Value, b: Value, store: Entities) -> Value:
    match op:
        case BinaryOp.EQ:
            return Bool(a == b)
        case BinaryOp.NEQ:
            return Bool(not a == b)
        case BinaryOp.LT | BinaryOp.LE | BinaryOp.GT | BinaryOp.GE | BinaryOp.ADD | BinaryOp.SUB:
            x = _need(a, "Long").value
            y = _need(b, "Long").value
            results = {
                BinaryOp.LT: lambda: Bool(x < y),
                BinaryOp.LE: lambda: Bool(x <= y),
                BinaryOp.GT: lambda: Bool(x > y),
                BinaryOp.GE: lambda: Bool(x >= y),
                BinaryOp.ADD: lambda: _long(x + y),
                BinaryOp.SUB: lambda: _long(x - y),
            }
            return results[op]()
        case BinaryOp.IN:
            member = _need(a, "Entity").uid
            container = _need(b, "Entity", "Set")
            if isinstance(container, EntityRef):
                return Bool(ref_in(store, member, container.uid))
            groups = [_need(e, "Entity").uid for e in container]
            return Bool(any(ref_in(store, member, g) for g in groups))
        case BinaryOp.CONTAINS:
            return Bool(b in _need(a, "Set").elements)
    raise EvalTypeError(("operator",), op.value)


# ============================================================================
# AUTHORIZATION
# ============================================================================

def _scope_ok(scope, uid: EntityUID, store: Entities) -> bool:
    match scope:
        case AnyScope():
            return True
        case EqScope(target):
            return uid == target
        case InScope(target):
            return ref_in(store, uid, target)
        case InSetScope(targets):
            return any(ref_in(store, uid, t) for t in targets)
    return False


def ref_scope_matches(p: Policy, req: Request, store: Entities) -> bool:
    return (_scope_ok(p.principal_scope, req.principal, store)
            and _scope_ok(p.action_scope, req.action, store)
            and _scope_ok(p.resource_scope, req.resource, store))


def ref_satisfied(p: Policy, req: Request, store: Entities) -> tuple[bool, EvalError | None]:
    """(satisfied, error); a policy with an error is never satisfied."""
    if not ref_scope_matches(p, req, store):
        return False, None
    errors = []
    outcomes = []
    for condition in p.conditions:
        try:
            value = ref_evaluate(condition.body, req, store)
            if not isinstance(value, Bool):
                raise EvalTypeError(("Bool",), value.kind)
            outcomes.append(value.value == (condition.kind == ConditionKind.WHEN))
        except EvalError as exc:
            errors.append(exc)
    if errors:
        return False, errors[0]
    return all(outcomes), None


def ref_is_authorized(req: Request, store: Entities, ps: PolicySet) -> Response:
    results = [(p, ref_satisfied(p, req, store)) for p in ps]
    permits = {p.id for p, (ok, _) in results if ok and p.effect == Effect.PERMIT}
    forbids = {p.id for p, (ok, _) in results if ok and p.effect == Effect.FORBID}
    errors = [(p.id, err) for p, (_, err) in results if err is not None]
    if len(forbids) == 0 and len(permits) > 0:
        return Response(Decision.ALLOW, frozenset(permits), tuple(errors))
    return Response(Decision.DENY, frozenset(forbids), tuple(errors))


def ref_slice(ps: PolicySet, req: Request, store: Entities) -> PolicySet:
    return PolicySet(tuple(p for p in ps if ref_scope_matches(p, req, store)))


# ============================================================================
# VALIDATION
# ============================================================================

class _IllTyped(Exception):
    pass


def _parent_type_closure(schema: Schema, name: str) -> set:
    found = set()
    frontier = [name]
    while frontier:
        decl = schema.entity_types.get(frontier.pop())
        for parent in (decl.allowed_parent_types if decl else ()):
            if parent not in found:
                found.add(parent)
                frontier.append(parent)
    return found


def _action_closure(schema: Schema, action: EntityUID) -> set:
    found = {action}
    frontier = [action]
    while frontier:
        decl = schema.actions.get(frontier.pop())
        for parent in (decl.parents if decl else ()):
            if parent not in found:
                found.add(parent)
                frontier.append(parent)
    return found


def _env_ok(scope, type_name: str, schema: Schema) -> bool:
    match scope:
        case AnyScope():
            return True
        case EqScope(uid):
            return uid.type_name == type_name
        case InScope(uid):
            return uid.type_name == type_name or uid.type_name in _parent_type_closure(schema, type_name)
    return False


def _action_env_ok(scope, action: EntityUID, schema: Schema) -> bool:
    match scope:
        case AnyScope():
            return True
        case EqScope(uid):
            return uid == action
        case InSetScope(uids):
            return any(uid in _action_closure(schema, action) for uid in uids)
    return False


def _declared_attr(receiver: Type, name: str, schema: Schema) -> AttrType | None:
    match receiver:
        case RecordT():
            return receiver.get(name)
        case EntityT(type_name):
            decl = schema.entity_types.get(type_name)
            return decl.attributes.get(name) if decl else None
    raise _IllTyped(f"attribute access on {receiver}")


def _typeof(e: Expr, env: dict, caps: frozenset, schema: Schema) -> tuple[Type, frozenset]:
    """Returns (type, capabilities gained when e is true)."""
    none = frozenset()

    def need(sub: Expr, wanted: Type, with_caps: frozenset = caps) -> frozenset:
        got, gained = _typeof(sub, env, with_caps, schema)
        if got != wanted:
            raise _IllTyped(f"expected {wanted}, got {got}")
        return gained

    match e:
        case Lit(Bool()):
            return BoolT(), none
        case Lit(Long()):
            return LongT(), none
        case Lit(Str()):
            return StringT(), none
        case EntityLit(uid):
            declared = uid in schema.actions if uid.is_action else uid.type_name in schema.entity_types
            if not declared:
                raise _IllTyped(f"undeclared {uid}")
            return EntityT(uid.type_name), none
        case Var(name):
            return env[name], none
        case Not(arg):
            need(arg, BoolT())
            return BoolT(), none
        case Neg(arg):
            need(arg, LongT())
            return LongT(), none
        case And(left, right):
            gained = need(left, BoolT())
            more = need(right, BoolT(), caps | gained)
            return BoolT(), gained | more
        case Or(left, right):
            need(left, BoolT())
            need(right, BoolT())
            return BoolT(), none
        case If(cond, then, otherwise):
            gained = need(cond, BoolT())
            t1, _ = _typeof(then, env, caps | gained, schema)
            t2, _ = _typeof(otherwise, env, caps, schema)
            if t1 != t2:
                raise _IllTyped("if branches differ")
            return t1, none
        case BinOp(BinaryOp.EQ | BinaryOp.NEQ, left, right):
            _typeof(left, env, caps, schema)
            _typeof(right, env, caps, schema)
            return BoolT(), none
        case BinOp(BinaryOp.LT | BinaryOp.LE | BinaryOp.GT | BinaryOp.GE, left, right):
            need(left, LongT())
            need(right, LongT())
            return BoolT(), none
        case BinOp(BinaryOp.ADD | BinaryOp.SUB, left, right):
            need(left, LongT())
            need(right, LongT())
            return LongT(), none
        case BinOp(BinaryOp.IN, left, right):
            lt, _ = _typeof(left, env, caps, schema)
            rt, _ = _typeof(right, env, caps, schema)
            if not isinstance(lt, EntityT):
                raise _IllTyped("in needs an entity on the left")
            if not (isinstance(rt, EntityT) or (isinstance(rt, SetT) and isinstance(rt.element, EntityT))):
                raise _IllTyped("in needs an entity or entity set on the right")
            return BoolT(), none
        case BinOp(BinaryOp.CONTAINS, left, right):
            lt, _ = _typeof(left, env, caps, schema)
            if not isinstance(lt, SetT):
                raise _IllTyped("contains needs a set")
            need(right, lt.element)
            return BoolT(), none
        case Like(arg, _):
            need(arg, StringT())
            return BoolT(), none
        case HasAttr(arg, name):
            receiver, _ = _typeof(arg, env, caps, schema)
            attr = _declared_attr(receiver, name, schema)
            if attr is not None and not attr.required:
                return BoolT(), frozenset({(arg, name)})
            return BoolT(), none
        case GetAttr(arg, name):
            receiver, _ = _typeof(arg, env, caps, schema)
            attr = _declared_attr(receiver, name, schema)
            if attr is None:
                raise _IllTyped(f"undeclared attribute {name}")
            if not attr.required and (arg, name) not in caps:
                raise _IllTyped(f"unguarded optional attribute {name}")
            return attr.type, none
        case SetLit(elements):
            if len(elements) == 0:
                raise _IllTyped("empty set literal")
            first, _ = _typeof(elements[0], env, caps, schema)
            for element in elements[1:]:
                need(element, first)
            return SetT(first), none
        case RecordLit(fields):
            shape = {}
            for name, value in fields:
                shape[name] = AttrType(_typeof(value, env, caps, schema)[0], True)
            return RecordT.of(shape), none
    raise _IllTyped(f"unknown node {type(e).__name__}")


def ref_validate_policy(p: Policy, schema: Schema) -> list[str]:
    """Messages for every (env, condition) that fails to typecheck to Bool; empty means valid."""
    problems = []
    for action, decl in schema.actions.items():
        for principal_type in decl.principal_types:
            for resource_type in decl.resource_types:
                if not (_env_ok(p.principal_scope, principal_type, schema)
                        and _action_env_ok(p.action_scope, action, schema)
                        and _env_ok(p.resource_scope, resource_type, schema)):
                    continue
                env = {
                    VarName.PRINCIPAL: EntityT(principal_type),
                    VarName.ACTION: EntityT(action.type_name),
                    VarName.RESOURCE: EntityT(resource_type),
                    VarName.CONTEXT: decl.context,
                }
                for condition in p.conditions:
                    try:
                        body_type, _ = _typeof(condition.body, env, frozenset(), schema)
                        if body_type != BoolT():
                            raise _IllTyped(f"condition has type {body_type}")
                    except _IllTyped as exc:
                        problems.append(f"({principal_type}, {action}, {resource_type}): {exc}")
    return problems
