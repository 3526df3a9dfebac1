"""
Application Configuration
-------------------------
Global settings for the policy engine, the generators and the fuzz harness.

Every value comes from the environment (a local .env file is loaded first)
and has a default, so nothing needs to be set for the CLI or the tests.
"""

import logging
import os
import sys

from dotenv import load_dotenv

# Load environment variables from .env file (if it exists)
load_dotenv()


def _int_env(name: str, default: int) -> int:
    """Read an integer setting, falling back to the default on bad input."""
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def clamp_depth_limit(value: int, recursion_limit: int | None = None) -> int:
    """
    Keep a recursion guard well under the interpreter's own stack limit.

    Each guarded level costs a few Python frames, so the guard may use at
    most a quarter of ``sys.getrecursionlimit()``.
    """
    ceiling = (recursion_limit or sys.getrecursionlimit()) // 4
    if value > ceiling:
        logging.getLogger(__name__).warning(f"Clamping depth limit {value} to {ceiling}")
    return max(1, min(value, ceiling))


# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING").upper()

_logging_configured = False


def configure_logging(level: str | None = None) -> None:
    """
    Configure root logging once for CLI runs.

    Records go to stderr so that stdout only ever carries command output.
    """
    global _logging_configured
    if _logging_configured:
        return
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    _logging_configured = True


# ============================================================================
# EVALUATION / PARSING GUARDS
# ============================================================================

EVAL_DEPTH_LIMIT = clamp_depth_limit(_int_env("EVAL_DEPTH_LIMIT", 200))  # evaluate + typecheck recursion guard
PARSE_NESTING_LIMIT = _int_env("PARSE_NESTING_LIMIT", 64)  # deeper text is a ParseError
FORMAT_WIDTH = _int_env("FORMAT_WIDTH", 80)

# ============================================================================
# GENERATOR CONFIGURATION
# ============================================================================

GEN_MAX_ENTITY_TYPES = _int_env("GEN_MAX_ENTITY_TYPES", 4)
GEN_MAX_ATTRIBUTES = _int_env("GEN_MAX_ATTRIBUTES", 4)
GEN_MAX_ENTITIES = _int_env("GEN_MAX_ENTITIES", 8)
GEN_MAX_TYPE_DEPTH = _int_env("GEN_MAX_TYPE_DEPTH", 3)
GEN_MAX_ACTIONS = _int_env("GEN_MAX_ACTIONS", 4)
GEN_MAX_EXPR_DEPTH = _int_env("GEN_MAX_EXPR_DEPTH", 4)
GEN_MAX_POLICIES = _int_env("GEN_MAX_POLICIES", 8)
GEN_PERTURBATION_RATE = _int_env("GEN_PERTURBATION_RATE", 16)  # 1 in N typed conditions

# ============================================================================
# FUZZ HARNESS CONFIGURATION
# ============================================================================

CORPUS_DIR = os.getenv("CORPUS_DIR", "corpus")
FUZZ_WORKERS = _int_env("FUZZ_WORKERS", 1)
FUZZ_MAX_INPUT_LEN = _int_env("FUZZ_MAX_INPUT_LEN", 512)
