"""
Authorizer
----------
Combines per-policy satisfaction into an authorization decision and slices
a policy set down to the policies relevant to a request.

Decision rule: Allow iff no forbid policy is satisfied and at least one
permit policy is. Policies that raise an evaluation error neither permit
nor forbid; they are reported in ``Response.errors``.
"""

import logging

from app.evaluator import satisfied, scope_matches
from app.models import (
    Decision,
    Effect,
    Entities,
    PolicySet,
    Request,
    Response,
    SatisfactionStatus,
)

logger = logging.getLogger(__name__)


def satisfied_policies(effect: Effect, policies: PolicySet, request: Request,
                       store: Entities) -> frozenset:
    """Ids of the policies with the given effect that are satisfied by the request."""
    return frozenset(
        policy.id
        for policy in policies
        if policy.effect is effect
        and satisfied(policy, request, store).status is SatisfactionStatus.SATISFIED
    )


def is_authorized(request: Request, store: Entities, policies: PolicySet) -> Response:
    """
    Authorize a request against a policy set.

    Args:
        request: The request to decide
        store: Entity store
        policies: Policy set to evaluate

    Returns:
        Response carrying the decision, the determining policy ids and
        every (policy id, error) pair in policy order

    Example:
        TinyTodo, alice GetList l1 -> Response(ALLOW, {"policy0", "policy1"}, ())
    """
    permits: set[str] = set()
    forbids: set[str] = set()
    errors = []
    for policy in policies:
        outcome = satisfied(policy, request, store)
        if outcome.status is SatisfactionStatus.ERRORED:
            errors.append((policy.id, outcome.error))
        elif outcome.status is SatisfactionStatus.SATISFIED:
            (permits if policy.effect is Effect.PERMIT else forbids).add(policy.id)

    if not forbids and permits:
        response = Response(Decision.ALLOW, frozenset(permits), tuple(errors))
    else:
        response = Response(Decision.DENY, frozenset(forbids), tuple(errors))
    logger.debug(
        f"Decision {response.decision.value} for {request.principal} {request.action} "
        f"{request.resource}: determining={sorted(response.determining)} errors={len(errors)}"
    )
    return response


def slice_policy_set(policies: PolicySet, request: Request, store: Entities) -> PolicySet:
    """Keep exactly the policies whose scope matches the request, in their original order."""
    return PolicySet(tuple(p for p in policies if scope_matches(p, request, store)))
