"""Shared exception types."""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(AuditError):
    """Input data violates a documented invariant."""


class FormatError(AuditError):
    """A serialized artifact is malformed (bad magic, truncation, NaNs)."""


class GatewayError(AuditError):
    """The inference endpoint misbehaved in a non-retryable way."""


class RetryExhausted(GatewayError):
    """A transient failure persisted through the bounded retry budget."""
