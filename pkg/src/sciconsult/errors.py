"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SciConsultError(Exception):
    """Base class for all package errors."""


class SchemaConfigError(SciConsultError):
    """Questionnaire schema config failed to parse or violates an invariant."""


class GatewayError(SciConsultError):
    """Base class for LLM gateway failures."""


class TransportError(GatewayError):
    """Remote backend could not be reached after bounded retries."""


class TokenLimitError(GatewayError):
    """Estimated request size exceeds the backend's context window."""


class TranscriptExhaustedError(GatewayError):
    """Scripted backend ran out of recorded responses."""


class StructuredOutputError(GatewayError):
    """Model output never parsed/validated against the schema descriptor.

    Carries every raw response seen across the repair loop.
    """

    def __init__(self, message: str, raw_responses: list[str]):
        super().__init__(message)
        self.raw_responses = list(raw_responses)


class ConnectorError(SciConsultError):
    """Base class for arXiv connector failures."""


class HttpStatusError(ConnectorError):
    def __init__(self, url: str, status: int):
        super().__init__(f"HTTP {status} for {url}")
        self.url = url
        self.status = status


class FeedParseError(ConnectorError):
    """Atom feed body did not parse as XML."""


class NonPdfPayloadError(ConnectorError):
    """PDF endpoint returned bytes without the %PDF magic."""


class ConversionUnavailableError(ConnectorError):
    """No PDF-to-Markdown converter is configured."""


class ConversionFailedError(ConnectorError):
    """Configured converter exited nonzero; message includes its stderr."""


class SourceUnavailableError(ConnectorError):
    """Both the LaTeX-source path and the PDF fallback failed."""

    def __init__(self, arxiv_id: str, causes: list[str]):
        super().__init__(
            f"no usable source for {arxiv_id}: " + "; ".join(causes)
        )
        self.causes = list(causes)


class CassetteMissError(ConnectorError):
    """Replay transport had no recorded exchange for the requested URL."""


class ConfigError(SciConsultError):
    """Service config file failed to parse or violates an invariant."""


class CatalogError(SciConsultError):
    """Dataset catalog file failed to parse or violates an invariant."""


class SmartFillPartialError(SciConsultError):
    """A Smart Fill gateway call failed after some suggestions were produced.

    Carries the suggestions gathered before the failure.
    """

    def __init__(self, message: str, suggestions: list):
        super().__init__(message)
        self.suggestions = list(suggestions)


class RetrievalError(SciConsultError):
    """Base class for evidence-retrieval failures."""


class NoQueriesError(RetrievalError):
    """Query generation produced an empty list after cleaning."""


class RetrievalFailedError(RetrievalError):
    """Every query in the plan failed."""


class EmptyShortlistError(RetrievalError):
    """Shortlisting selected no paper present in the candidate pool."""


class ContextError(SciConsultError):
    """Base class for context-builder failures."""


class ContextEmptyError(ContextError):
    """No paper in the shortlist yielded a context block."""


class RecommendationParseError(SciConsultError):
    """Recommendation markdown is missing or duplicating a required heading."""


class PrototypeError(SciConsultError):
    """Base class for prototype-builder failures."""


class UnknownToolError(PrototypeError):
    pass


class ParamValidationError(PrototypeError):
    def __init__(self, message: str, param: str | None = None):
        super().__init__(message)
        self.param = param


class MetricInputError(PrototypeError):
    """Predictions and ground truth are misaligned or incompatible."""


class ServiceError(SciConsultError):
    """Base class for consult-service failures."""

    code = "internal"
    http_status = 500


class NotFoundError(ServiceError):
    code = "not_found"
    http_status = 404


class ConflictError(ServiceError):
    code = "conflict"
    http_status = 409


class BadRequestError(ServiceError):
    code = "bad_request"
    http_status = 400

    def __init__(self, message: str, details: list[dict] | None = None):
        super().__init__(message)
        self.details = details or []
