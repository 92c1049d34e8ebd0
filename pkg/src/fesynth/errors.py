"""Exception taxonomy shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(PipelineError):
    pass


class StoreError(PipelineError):
    pass


class ArtifactNotFoundError(StoreError):
    pass


class ManifestCorruptError(StoreError):
    pass


class HarvestError(PipelineError):
    pass


class AuthError(HarvestError):
    pass


class RateLimitedError(HarvestError):
    """Code-hosting API throttled us; carries the server's wait hint."""

    def __init__(self, message: str, wait_seconds: float = 60.0):
        super().__init__(message)
        self.wait_seconds = wait_seconds


class FetchError(HarvestError):
    pass


class ExtractError(PipelineError):
    pass


class SealError(PipelineError):
    """Sealing could not complete; carries the outstanding violations."""

    def __init__(self, message: str, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class DependencyCycleError(SealError):
    def __init__(self, message: str, cycle=None):
        super().__init__(message)
        self.cycle = list(cycle or [])


class GatewayError(PipelineError):
    pass


class ProviderError(GatewayError):
    pass


class MissingVariableError(GatewayError):
    pass


class ResponseParseError(GatewayError):
    """A provider response did not follow the template's response grammar."""


class MissingMarkerError(ResponseParseError):
    pass


class SchemaError(ResponseParseError):
    pass


class SynthesisError(PipelineError):
    """A strategy run aborted; tagged with the stage that failed."""

    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


class SandboxError(PipelineError):
    """Renderer infrastructure failed (distinct from a snippet failing)."""


class AssembleError(PipelineError):
    pass


class ExportError(AssembleError):
    def __init__(self, message: str, offenders=None):
        super().__init__(message)
        self.offenders = list(offenders or [])


class EvalError(PipelineError):
    pass
