"""
Test Authorization Properties
-----------------------------
Property-based checks over generated worlds and policy sets, for both the
production authorizer and the reference model, plus every fuzz target run
as a hypothesis property.

The dev profile keeps runs short; HYPOTHESIS_PROFILE=acceptance raises
every property to 10,000 examples.

Run: pytest test_properties.py
"""

import hypothesis as hyp
import pytest
from hypothesis import strategies as st

from app.authorizer import is_authorized, satisfied_policies, slice_policy_set
from app.conformance import request_conforms, store_conforms
from app.generators import ByteCursor, GeneratorLimits, GeneratorMode, entity_literals, gen_policies, gen_world
from app.harness import TARGETS, UNSOUND_KINDS
from app.models import Decision, Effect, PolicySet
from app.reference import ref_is_authorized, ref_slice, ref_validate_policy
from app.validator import validate_policy_set

LIMITS = GeneratorLimits()

AUTHORIZERS = pytest.mark.parametrize("authorize", [is_authorized, ref_is_authorized],
                                      ids=["production", "reference"])

inputs = st.binary(max_size=512)
modes = st.sampled_from(list(GeneratorMode))


def generate(mode: GeneratorMode, data: bytes):
    cursor = ByteCursor(data)
    world = gen_world(cursor, LIMITS)
    return world, gen_policies(mode, cursor, world, LIMITS)


# ============================================================================
# DECISION PROPERTIES
# ============================================================================

@AUTHORIZERS
@hyp.given(mode=modes, data=inputs)
def test_forbid_trumps_permit(authorize, mode, data):
    world, policies = generate(mode, data)
    forbids = satisfied_policies(Effect.FORBID, policies, world.request, world.store)
    response = authorize(world.request, world.store, policies)
    if forbids:
        assert response.decision is Decision.DENY
        assert response.determining == forbids


@AUTHORIZERS
@hyp.given(mode=modes, data=inputs)
def test_default_deny(authorize, mode, data):
    world, policies = generate(mode, data)
    permits = satisfied_policies(Effect.PERMIT, policies, world.request, world.store)
    response = authorize(world.request, world.store, policies)
    if not permits:
        assert response.decision is Decision.DENY


@AUTHORIZERS
@hyp.given(mode=modes, data=inputs)
def test_allow_is_explained_by_permits(authorize, mode, data):
    world, policies = generate(mode, data)
    response = authorize(world.request, world.store, policies)
    if response.decision is Decision.ALLOW:
        assert response.determining
        assert response.determining == satisfied_policies(Effect.PERMIT, policies, world.request, world.store)


@AUTHORIZERS
@hyp.given(mode=modes, data=inputs, draw=st.data())
def test_order_and_duplicates_do_not_matter(authorize, mode, data, draw):
    world, policies = generate(mode, data)
    original = authorize(world.request, world.store, policies)

    # Test 1: any permutation of the policy list
    ordered = list(policies)
    shuffled = PolicySet(tuple(draw.draw(st.permutations(ordered))))
    response = authorize(world.request, world.store, shuffled)
    assert response.decision is original.decision
    assert response.determining == original.determining

    # Test 2: a copy of one policy under a fresh id
    copied = draw.draw(st.sampled_from(ordered))
    doubled = PolicySet(tuple(ordered) + (copied.with_id("duplicate"),))
    response = authorize(world.request, world.store, doubled)
    assert response.decision is original.decision
    expected = original.determining | ({"duplicate"} if copied.id in original.determining else set())
    assert response.determining == expected


# ============================================================================
# SLICING AND VALIDATION PROPERTIES
# ============================================================================

def production_accepts(policies, schema) -> bool:
    return not any(validate_policy_set(policies, schema).values())


def reference_accepts(policies, schema) -> bool:
    return all(ref_validate_policy(policy, schema) == [] for policy in policies)


@pytest.mark.parametrize("slice_set,authorize", [
    (slice_policy_set, is_authorized),
    (ref_slice, ref_is_authorized),
], ids=["production", "reference"])
@hyp.given(mode=modes, data=inputs)
def test_slicing_keeps_the_decision(slice_set, authorize, mode, data):
    world, policies = generate(mode, data)
    full = authorize(world.request, world.store, policies)
    partial = authorize(world.request, world.store, slice_set(policies, world.request, world.store))
    assert partial.decision is full.decision
    assert partial.determining == full.determining


@hyp.given(mode=modes, data=inputs)
def test_slices_agree(mode, data):
    world, policies = generate(mode, data)
    sliced = slice_policy_set(policies, world.request, world.store)
    assert sliced == ref_slice(policies, world.request, world.store)


@pytest.mark.parametrize("accepts,authorize", [
    (production_accepts, is_authorized),
    (reference_accepts, ref_is_authorized),
], ids=["production", "reference"])
@hyp.given(data=inputs)
def test_validated_policies_never_hit_type_errors(accepts, authorize, data):
    world, policies = generate(GeneratorMode.TYPE_DIRECTED_ABAC, data)
    # vacuous unless the policies validate and the data conforms
    if not accepts(policies, world.schema):
        return
    if store_conforms(world.store, world.schema) or request_conforms(world.request, world.schema, world.store):
        return
    if any(uid not in world.store for policy in policies for uid in entity_literals(policy)):
        return
    response = authorize(world.request, world.store, policies)
    unsound = {pid: kind for pid, kind in response.error_kinds().items() if kind in UNSOUND_KINDS}
    assert unsound == {}


# ============================================================================
# FUZZ TARGETS AS PROPERTIES
# ============================================================================

@pytest.mark.parametrize("name", list(TARGETS))
@hyp.given(data=inputs)
def test_fuzz_target_holds(name, data):
    verdict = TARGETS[name].run(data)
    assert verdict.passed, verdict.report
