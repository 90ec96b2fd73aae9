# errors.py - shared error types for the bolt digital twin toolkit
from typing import Any, Dict


class PmiError(Exception):
    """Base error. `error_code` is the stable name used on the wire and in reports."""

    http_status = 400
    exit_code = 1

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__

    @property
    def error_code(self) -> str:
        return self.__class__.__name__

    def to_dict(self) -> Dict[str, Any]:
        return {"error_code": self.error_code, "message": self.message}


class InputError(PmiError):
    """Unreadable or malformed input (files, CSV, JSON, meshes)."""

    exit_code = 2


# ── twin model ──────────────────────────────────────────────────────────
class MalformedJson(InputError):
    pass


class UnsupportedSchema(PmiError):
    pass


class DuplicateProperty(PmiError):
    pass


class EmptyModel(PmiError):
    pass


class InvalidModel(PmiError):
    pass


class KindMismatch(PmiError):
    pass


class NonFiniteFloat(PmiError):
    pass


# ── twin store ──────────────────────────────────────────────────────────
class UnknownModel(PmiError):
    http_status = 404


class ModelConflict(PmiError):
    http_status = 409


class DuplicateTwin(PmiError):
    http_status = 409


class UnknownTwin(PmiError):
    http_status = 404


class UnknownProperty(PmiError):
    pass


class CorruptLog(InputError):
    http_status = 500


# ── geometry ────────────────────────────────────────────────────────────
class EmptyMesh(PmiError):
    pass


class NoSensors(PmiError):
    pass


class EmptyScan(PmiError):
    pass


class DegenerateTriangle(PmiError):
    pass


class FeatureOutsideMesh(PmiError):
    pass


class MeshFormatError(InputError):
    pass


# ── pipeline ────────────────────────────────────────────────────────────
class MissingColumn(InputError):
    pass


class UnpairedDimensionalColumn(InputError):
    pass


class DuplicateKey(InputError):
    pass


class FractureNotTerminal(InputError):
    pass


class UnimputableCell(PmiError):
    pass


class MissingMeasurement(PmiError):
    pass


class NonPositiveArea(PmiError):
    pass


class NonPositiveLength(PmiError):
    pass


class EmptyInput(PmiError):
    pass


# ── ml / eval ───────────────────────────────────────────────────────────
class DegenerateSplit(PmiError):
    pass


class EmptyNode(PmiError):
    pass


class PartitionMismatch(PmiError):
    pass


class EmptyTrainingSet(PmiError):
    pass


class ArityMismatch(PmiError):
    pass


class UntrainedModel(PmiError):
    http_status = 503


class LengthMismatch(PmiError):
    pass


class InvalidConfig(InputError):
    pass
