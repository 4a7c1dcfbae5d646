"""Exception hierarchy shared across the platform.

The service layer maps these onto HTTP status codes, so every module
raises from this tree rather than ad-hoc exceptions.
"""


class CorpusForgeError(Exception):
    """Base class for all domain errors."""


class ValidationError(CorpusForgeError):
    """Bad input: invalid span, schema violation, malformed payload (HTTP 400)."""


class NotFoundError(CorpusForgeError):
    """Unknown id: document, annotation, project, round, workspace (HTTP 404)."""


class AuthError(CorpusForgeError):
    """Missing, expired or invalid session token (HTTP 401)."""


class ForbiddenError(CorpusForgeError):
    """Authenticated but not allowed to touch this resource (HTTP 403)."""


class StateError(CorpusForgeError):
    """Operation illegal in the current life-cycle state, e.g. editing a
    workspace of a CLOSED round (HTTP 409)."""


class ParseError(ValidationError):
    """Malformed or inconsistent BioC input."""


class TransportError(CorpusForgeError):
    """Remote fetch failed after retries."""
