"""Error hierarchy; every class carries the process exit code it maps to."""


class ExportError(Exception):
    exit_code = 1


class ParamError(ExportError):
    exit_code = 2


class IoError(ExportError):
    exit_code = 3


class LayerError(ExportError):
    exit_code = 4


class ShapeError(ExportError):
    exit_code = 5
