"""Exception hierarchy shared by all biorel modules.

Everything raised on purpose derives from BioRelError so callers (and the
CLI) can distinguish operational failures from genuine bugs.
"""


class BioRelError(Exception):
    """Base class for all errors raised by biorel."""


# --- relation names, selectors, catalog ---------------------------------

class MalformedNameError(BioRelError):
    """Relation name does not follow the underscore naming convention."""


class UnknownDbTokenError(MalformedNameError):
    """Database token is not one of the registered four-letter codes."""


class UnknownOrgTokenError(MalformedNameError):
    """Organism token is not registered."""


class MalformedSelectorError(BioRelError):
    """Cell selector text is not '', 'org' or 'org/db'."""


class TableNotInCatalogError(BioRelError):
    """Relation name parses but has no catalog entry."""


# --- store ----------------------------------------------------------------

class DataDirUnavailableError(BioRelError):
    """The configured data directory does not exist and cannot be created."""


class BackendUnavailableError(BioRelError):
    """Backend cannot be opened, e.g. a second writer on the same data dir."""


class TableMissingAndFetchForbiddenError(BioRelError):
    """Canonical file absent locally and fetch policy is 'never'."""


class UserDeclinedError(BioRelError):
    """Interactive download prompt was answered 'no'."""


class FetchFailedError(BioRelError):
    """Remote fetch failed (HTTP error, unreachable host, ...)."""


class ImportFailedError(BioRelError):
    """Canonical file could not be imported into a backend."""


class SchemaMismatchError(ImportFailedError):
    """File header declares a different relation or arity than expected."""


class CorruptFileError(ImportFailedError):
    """Canonical file is truncated, mistyped or inconsistent with its header."""


class ChecksumMismatchError(BioRelError):
    """Downloaded file failed the row-count sanity check."""


class MalformedPatternError(BioRelError):
    """Query pattern length does not match the relation arity."""


class TypeMismatchError(BioRelError):
    """A bound query value conflicts with the column type."""


# --- ingest ----------------------------------------------------------------

class MissingColumnError(BioRelError):
    """A required column is absent from an upstream dump header."""


class MalformedTermIdError(BioRelError):
    """A GO term identifier could not be parsed to an integer."""


class BuilderNotImplementedError(BioRelError, NotImplementedError):
    """Builder for this source database is a registered stub only."""


class EmptyFileError(BioRelError):
    """Input file holds no data rows."""


# --- graph / analytics -------------------------------------------------

class DuplicateHitSymbolError(BioRelError):
    """The same symbol appears in a hits list with conflicting signs."""


class EmptyGraphError(BioRelError):
    """Nothing to render: no nodes, no edges, and isolated nodes excluded."""


class DomainError(BioRelError, ValueError):
    """Numeric arguments violate a documented precondition."""


class EmptyUniverseError(BioRelError):
    """Over-representation requested against an empty background."""


class EmptyFamilyError(BioRelError):
    """Gene family resolved to an empty symbol set."""
