"""Exception hierarchy shared by the simulator modules.

Each exception carries a short machine-readable ``code`` used by the
command-line frontend when reporting failures.
"""


class CimuError(Exception):
    code = "CimuError"
    exit_status = 4


class InputError(CimuError):
    """Malformed or out-of-range user input."""

    code = "InputError"
    exit_status = 2


class PlanError(CimuError):
    """Capacity or lowering failure."""

    code = "PlanError"
    exit_status = 3


class UnrepresentableValue(InputError, ValueError):
    code = "UnrepresentableValue"


class WidthMismatch(InputError, ValueError):
    code = "WidthMismatch"


class SegmentOutOfRange(InputError, IndexError):
    code = "SegmentOutOfRange"


class CapacityExceeded(PlanError):
    code = "CapacityExceeded"


class ModeFormatMismatch(PlanError):
    code = "ModeFormatMismatch"


class QuantaOutOfRange(InputError, ValueError):
    code = "QuantaOutOfRange"


class CodeOutOfRange(InputError, ValueError):
    code = "CodeOutOfRange"


class PlaneCountMismatch(InputError, ValueError):
    code = "PlaneCountMismatch"


class InvalidPostOps(InputError, ValueError):
    code = "InvalidPostOps"


class ElementTooWide(InputError, ValueError):
    code = "ElementTooWide"


class BankBusy(CimuError, RuntimeError):
    code = "BankBusy"


class PlaneOutOfRange(InputError, IndexError):
    code = "PlaneOutOfRange"


class GeometryNotConvolutional(PlanError):
    code = "GeometryNotConvolutional"


class UnloweredPlan(PlanError):
    code = "UnloweredPlan"


class UnknownCorner(InputError, KeyError):
    code = "UnknownCorner"

    def __str__(self):
        return Exception.__str__(self)


class UnsupportedKernel(PlanError):
    code = "UnsupportedKernel"


class ShapeMismatch(InputError, ValueError):
    code = "ShapeMismatch"


class NetworkParseError(InputError, ValueError):
    code = "NetworkParseError"


class FileFormatError(InputError, ValueError):
    code = "FileFormatError"


class MissingFile(InputError, FileNotFoundError):
    code = "MissingFile"
