"""Exception types raised by dilatekit.

Every error carries a short machine-readable ``code`` used by the CLI report.
"""


class DilateKitError(Exception):
    """Base class for all domain errors."""

    code = "domain-error"

    def __init__(self, message="", **details):
        super().__init__(message)
        self.details = details


class NotAContraction(DilateKitError):
    code = "not-a-contraction"


class NotARowContraction(DilateKitError):
    code = "not-a-row-contraction"


class AmbientMismatch(DilateKitError):
    code = "ambient-mismatch"


class DimensionMismatch(DilateKitError):
    code = "dimension-mismatch"


class NotAnIsometry(DilateKitError):
    code = "not-an-isometry"


class NotCommuting(DilateKitError):
    code = "not-commuting"


class NotIntertwining(DilateKitError):
    code = "not-intertwining"


class NotATree(DilateKitError):
    code = "not-a-tree"


class NotTransitive(DilateKitError):
    code = "not-transitive"


class NotExtremal(DilateKitError):
    code = "not-extremal"


class NotNilpotent(DilateKitError):
    code = "not-nilpotent"


class NotAnAlgebra(DilateKitError):
    code = "not-an-algebra"


class NotCovariant(DilateKitError):
    code = "not-covariant"


class NotAnAutomorphism(DilateKitError):
    code = "not-an-automorphism"


class UnknownFixture(DilateKitError):
    code = "unknown-fixture"


class LiftingFailed(DilateKitError):
    """A finite lifting search found no contractive solution."""

    code = "lifting-failed"


class InputError(DilateKitError):
    """Malformed job input (bad JSON, missing fields, wrong shapes)."""

    code = "input-error"
