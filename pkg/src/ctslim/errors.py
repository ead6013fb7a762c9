"""Exception types raised across the package."""


class CtslimError(Exception):
    """Base class for all ctslim errors."""


# --- scan loading -------------------------------------------------------

class EmptyScan(CtslimError):
    """A scan directory contains no readable image files."""


class MixedDimensions(CtslimError):
    """Slices of one scan disagree on width/height or bit depth."""


class UnparsableIndex(CtslimError):
    """A slice filename has no usable trailing integer index."""


class DecodeError(CtslimError):
    """An image file could not be decoded."""


class InvalidSpec(CtslimError):
    """A synthetic scan spec violates its own invariants."""


# --- spatial step -------------------------------------------------------

class EmptyMask(CtslimError):
    """A segmentation mask has no foreground pixel."""


class AllSlicesEmpty(CtslimError):
    """Every slice of a scan produced an empty mask."""


class BoxOutOfBounds(CtslimError):
    """A crop box does not fit inside the slice it is applied to."""


# --- slice step ---------------------------------------------------------

class EmptyProfile(CtslimError):
    """An area profile contains no slices."""


# --- sampling -----------------------------------------------------------

class NoData(CtslimError):
    """No positions were given to the density estimator."""


class AllZeroWeights(CtslimError):
    """All kernel weights are zero; the density is undefined."""


class InvalidProbability(CtslimError):
    """A probability argument lies outside [0, 1]."""


class EmptyWindow(CtslimError):
    """A selection window covers no slices."""


# --- metrics / pipeline -------------------------------------------------

class NoClasses(CtslimError):
    """Macro averaging was requested over zero classes."""


class ParseError(CtslimError):
    """A prediction or config file contains a malformed row."""


class NoScans(CtslimError):
    """A corpus directory contains no scan subdirectories."""
