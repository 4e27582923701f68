"""Exception hierarchy.

Every error carries a short machine-readable ``code``; the CLI maps codes to
exit statuses one-to-one through :data:`EXIT_CODES`.
"""


class FmppError(ValueError):
    code = "fmpp-error"


class InvalidWindow(FmppError):
    code = "invalid-window"


class InvalidArgument(FmppError):
    code = "invalid-argument"


class EmptyErosion(FmppError):
    code = "empty-erosion"


class ZeroArc(FmppError):
    code = "zero-arc"


class Unsupported(FmppError):
    code = "unsupported"


class MissingCurve(FmppError):
    code = "missing-curve"


class OrphanCurve(FmppError):
    code = "orphan-curve"


class GridMismatch(FmppError):
    code = "grid-mismatch"


class DuplicateId(FmppError):
    code = "duplicate-id"


class PointOutsideWindow(FmppError):
    code = "point-outside-window"


class CoincidentPoints(FmppError):
    code = "coincident-points"


class MalformedInput(FmppError):
    code = "malformed-input"


class NonpositiveKlInput(FmppError):
    code = "nonpositive-kl-input"


class ArityMismatch(FmppError):
    code = "arity-mismatch"


class MissingAuxScalar(FmppError):
    code = "missing-aux-scalar"


class EmptyPattern(FmppError):
    code = "empty-pattern"


class TooFewPoints(FmppError):
    code = "too-few-points"


class OutsideWindow(FmppError):
    code = "outside-window"


class NonFiniteContrast(FmppError):
    code = "non-finite-contrast"


class EmptyRWindow(FmppError):
    code = "empty-r-window"


class RateOverflow(FmppError):
    code = "rate-overflow"


class CholeskyFailure(FmppError):
    code = "cholesky-failure"


class ProblemTooLarge(FmppError):
    code = "problem-too-large"


class NonpositiveDt(FmppError):
    code = "nonpositive-dt"


class EmptySeries(FmppError):
    code = "empty-series"


class FileNotFound(FmppError):
    code = "file-not-found"


def _all_error_classes():
    seen = []
    stack = [FmppError]
    while stack:
        cls = stack.pop(0)
        seen.append(cls)
        stack.extend(cls.__subclasses__())
    return seen


# 1 is reserved for unexpected failures, 2 for usage errors (argparse).
EXIT_CODES = {cls.code: 10 + i for i, cls in enumerate(_all_error_classes())}
