"""Exception types raised across the association pipeline."""


class CalibrationError(ValueError):
    """Calibration file missing, malformed, or carrying an invalid field."""


class AnnotationError(ValueError):
    """Annotation file malformed; message carries the offending record index."""


class MatchFormatError(ValueError):
    """Match interchange file malformed; message carries the offending line."""


class EstimationError(RuntimeError):
    """Homography estimation failed (too few or degenerate correspondences)."""


class NoOverlapError(EstimationError):
    """Camera pair shares too few co-visible grid points to fit a homography."""


class MaskDegenerateError(RuntimeError):
    """Warped image rectangle collapsed or self-intersects; mask unusable."""


class PointAtInfinityError(ArithmeticError):
    """Homography maps the point (numerically) onto the line at infinity."""
