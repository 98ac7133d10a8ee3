"""Exception hierarchy shared by the pipeline stages."""


class ChronotopicsError(Exception):
    pass


class ConfigError(ChronotopicsError):
    """Invalid configuration value, unknown key or missing path (usage error)."""


class CorpusError(ChronotopicsError):
    pass


class ModelError(ChronotopicsError):
    pass


class MetricsError(ChronotopicsError):
    pass


class SummarizerError(ChronotopicsError):
    pass
