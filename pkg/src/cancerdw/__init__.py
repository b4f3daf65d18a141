"""Star-schema data warehouse for cancer treatment records."""

from .schema import StarSchema, parse_schema, print_schema, reference_schema
from .store import Warehouse, init_warehouse, open_warehouse, persist

__version__ = "0.1.0"

__all__ = ["StarSchema", "parse_schema", "print_schema", "reference_schema",
           "Warehouse", "init_warehouse", "open_warehouse", "persist"]
