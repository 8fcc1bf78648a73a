"""Exception types raised across the engine.

Each maps to one failure mode a caller can act on; the REST layer
translates them into status codes.
"""

from __future__ import annotations


class StoryloomError(Exception):
    """Base class for all engine errors."""


# --- prompt rendering / extraction ---

class InvalidTemplate(StoryloomError):
    """Template has an empty instruction or an unparseable one-shot example."""


class NoJsonFound(StoryloomError):
    """No balanced JSON object could be parsed out of the raw text."""


class SchemaMismatch(StoryloomError):
    """A JSON object was found but required keys are missing or mistyped."""

    def __init__(self, missing: list[str], mistyped: list[str]):
        self.missing = list(missing)
        self.mistyped = list(mistyped)
        super().__init__(
            f"object does not satisfy schema (missing={self.missing}, mistyped={self.mistyped})"
        )


# --- LLM gateway ---

class TransportError(StoryloomError):
    """Connection or timeout failure after all retries."""


class UpstreamStatus(StoryloomError):
    """Endpoint returned a non-2xx status (after retries, for 5xx)."""

    def __init__(self, code: int, detail: str = ""):
        self.code = code
        super().__init__(f"upstream returned HTTP {code}" + (f": {detail}" if detail else ""))


class MalformedResponse(StoryloomError):
    """2xx response without a parsable first choice."""


class NoScriptedMatch(StoryloomError):
    """No scripted rule matched and no default response was configured."""


# --- initialization pipeline ---

class StageFailed(StoryloomError):
    """An initialization stage exhausted its retries."""

    def __init__(self, stage: str, last_error: Exception):
        self.stage = stage
        self.last_error = last_error
        super().__init__(f"stage '{stage}' failed: {last_error}")


class InvariantViolation(StoryloomError):
    """Generated content broke a domain invariant (e.g. a trait score of 140)."""


class InvalidCriteria(StoryloomError):
    """Designer criteria document is malformed or incomplete."""


# --- validation ---

class JudgeUnavailable(StoryloomError):
    """The rule judge produced malformed or failed completions past its retry budget."""


# --- session engine ---

class TurnInFlight(StoryloomError):
    """Another turn is already being processed for this session."""


class UnknownAction(StoryloomError):
    """Player input referenced a mechanic or suggestion that does not exist."""


class UnknownNpc(StoryloomError):
    """Player input targeted an NPC id not present in the game definition."""


class TurnFailed(StoryloomError):
    """The turn could not complete (upstream LLM failure); session state is unchanged."""
