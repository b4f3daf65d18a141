"""Load the clean operational tables straight into a warehouse.

Used when a benchmark needs both stores to hold exactly the same events,
independent of what cleansing did to the corrupted exports.
"""

from __future__ import annotations

from ..etl import DATE_DIMENSION_EPOCH, coerce_text, date_attributes
from ..schema import StarSchema, reference_schema
from ..store import Warehouse
from .oltp import OltpEmulation


def warehouse_from_oltp(oltp: OltpEmulation, schema: StarSchema | None = None) -> Warehouse:
    schema = schema or reference_schema()
    wh = Warehouse(schema)
    t = oltp.tables
    with wh.batch():
        for dim, table in (("DimPatient", "patients"), ("DimCancerType", "diagnoses"),
                           ("DimProcedure", "procedures")):
            d = schema.dimension(dim)
            tab = t[table]
            for row in tab.rows:
                attrs = {a.name: coerce_text(a.kind, row[tab.col(a.name)], "%Y-%m-%d") for a in d.attributes}
                wh.upsert_dimension_row(dim, attrs[d.natural_key], attrs, DATE_DIMENSION_EPOCH)
        ev = t["treatment_events"]
        pi, ci, ri, di = (ev.col(c) for c in ("patientNo", "cancerCode", "procCode", "treatmentDate"))
        cost, deaths = ev.col("cost"), ev.col("deaths")
        date_names = schema.dimension("DimDate").attribute_names
        seen: set[str] = set()
        for r in ev.rows:
            d = r[di]
            nk = str(d.year * 10000 + d.month * 100 + d.day)
            if nk not in seen:
                wh.upsert_dimension_row("DimDate", nk, date_attributes(d, date_names), DATE_DIMENSION_EPOCH)
                seen.add(nk)
            wh.append_fact({"DimPatient": r[pi], "DimCancerType": r[ci], "DimProcedure": r[ri], "DimDate": nk},
                           {"cost": r[cost], "deaths": float(r[deaths])}, d)
    return wh
