"""biorel: curated biological relation tables behind a uniform store,
plus experiment-driven analytics on top of them."""

from .config import Options
from .errors import BioRelError
from .relcore import (
    CatalogEntry,
    CellSelector,
    ColumnType,
    OrgToken,
    RelKind,
    RelName,
    RelationInfo,
    RelationSchema,
    catalog_entry,
    catalog_list,
    format_go_id,
    format_rel_name,
    parse_rel_name,
    selector_parse,
)
from .store import (
    FREE,
    BackendKind,
    FetchPolicy,
    Origin,
    QueryPattern,
    Store,
    StoreConfig,
    TableHandle,
    open_store,
)

__version__ = "0.1.0"

__all__ = [
    "BioRelError",
    "Options",
    "CatalogEntry",
    "CellSelector",
    "ColumnType",
    "OrgToken",
    "RelKind",
    "RelName",
    "RelationInfo",
    "RelationSchema",
    "catalog_entry",
    "catalog_list",
    "format_go_id",
    "format_rel_name",
    "parse_rel_name",
    "selector_parse",
    "FREE",
    "BackendKind",
    "FetchPolicy",
    "Origin",
    "QueryPattern",
    "Store",
    "StoreConfig",
    "TableHandle",
    "open_store",
    "__version__",
]
