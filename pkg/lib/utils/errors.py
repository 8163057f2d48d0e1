class SemKGNError(Exception):
    """Base class of every error raised by the package."""


class ConfigError(SemKGNError, ValueError):
    pass


class UsageError(SemKGNError, ValueError):
    """Bad command line: unknown flag, missing input file."""


class DatasetFormatError(SemKGNError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ''
        if path is not None:
            where = f'{path}'
        if line is not None:
            where = f'{where}:{line}' if where else f'line {line}'
        super().__init__(f'{where}: {message}' if where else message)


class KnowledgeBaseError(DatasetFormatError):
    pass


class UndefinedMarginalError(SemKGNError, ValueError):
    pass


class DimensionError(SemKGNError, ValueError):
    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        dims = ' vs '.join(str(tuple(s)) for s in shapes)
        super().__init__(f'{op}: incompatible shapes {dims}')


class ContractError(SemKGNError, ValueError):
    pass


class ConsistencyError(SemKGNError, RuntimeError):
    pass


class MissingFeatureError(SemKGNError, LookupError):
    pass
