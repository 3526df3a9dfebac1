"""
Entity Hierarchy
----------------
Ancestor queries over the parent relation of an entity store.
"""

from app.models import Entities, EntityUID


def ancestors(store: Entities, uid: EntityUID) -> frozenset:
    """
    Transitive closure of the parent relation starting at ``uid``.

    The result never contains ``uid`` itself and is empty for unknown UIDs.
    Results are memoised on the store; cycles (only possible in stores that
    fail conformance) still terminate.

    Example:
        store {A -> {B}, B -> {C}}: ancestors(store, A) == {B, C}
    """
    cached = store.closure_cache.get(uid)
    if cached is not None:
        return cached

    found: set[EntityUID] = set()
    pending = list(store.parents(uid))
    while pending:
        current = pending.pop()
        if current in found:
            continue
        found.add(current)
        known = store.closure_cache.get(current)
        if known is not None:
            found.update(known)
        else:
            pending.extend(store.parents(current))

    found.discard(uid)
    result = frozenset(found)
    store.closure_cache[uid] = result
    return result


def in_relation(store: Entities, a: EntityUID, b: EntityUID) -> bool:
    """Reflexive-transitive membership: ``a in b``."""
    return a == b or b in ancestors(store, a)
