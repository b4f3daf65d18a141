"""Golden MDX queries over the reference schema and the synthetic vocabulary."""

from __future__ import annotations

GOLDEN_QUERIES: dict[str, str] = {
    "g01_cost_by_year": "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS FROM [Treatment]",
    "g02_cost_by_cancer": "SELECT {[Measures].[cost]} ON COLUMNS, {[DimCancerType].[cancerName].MEMBERS} ON ROWS "
                          "FROM [Treatment]",
    "g03_death_rate_by_organ": "SELECT {[Measures].[deathRate]} ON COLUMNS, {[DimCancerType].[organ].MEMBERS} ON ROWS "
                               "FROM [Treatment]",
    "g04_cancer_by_year": "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS, {[DimCancerType].[cancerName].MEMBERS} ON ROWS "
                          "FROM [Treatment] WHERE ([Measures].[cost])",
    "g05_volume_by_quarter": "SELECT {[DimDate].[quarter].MEMBERS} ON COLUMNS, {[DimProcedure].[kind].MEMBERS} ON ROWS "
                             "FROM [Treatment] WHERE ([Measures].[patients])",
    "g06_blood_children": "SELECT {[DimCancerType].[organ].[Blood].CHILDREN} ON COLUMNS FROM [Treatment]",
    "g07_year_children": "SELECT {[DimDate].[year].[2010].CHILDREN} ON COLUMNS, {[Measures].[deaths]} ON ROWS "
                         "FROM [Treatment]",
    "g08_sliced_female": "SELECT {[DimProcedure].[kind].MEMBERS} ON COLUMNS FROM [Treatment] "
                         "WHERE ([DimPatient].[sex].[F])",
    "g09_multi_slicer": "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS, {[DimCancerType].[organ].MEMBERS} ON ROWS "
                        "FROM [Treatment] WHERE ([DimPatient].[sex].[M], [DimProcedure].[kind].[Surgery])",
    "g10_measures_columns": "SELECT {[Measures].[cost], [Measures].[deaths], [Measures].[patients], "
                            "[Measures].[deathRate]} ON COLUMNS, {[DimPatient].[stage].MEMBERS} ON ROWS "
                            "FROM [Treatment]",
    "g11_single_member": "SELECT {[DimCancerType].[cancerCode].[C50]} ON COLUMNS FROM [Treatment]",
    "g12_explicit_members": "SELECT {[DimDate].[year].[2008], [DimDate].[year].[2012]} ON COLUMNS, "
                            "{[DimProcedure].[procName].[Lobectomy], [DimProcedure].[procName].[Brachytherapy]} ON ROWS "
                            "FROM [Treatment]",
    "g13_stage_by_phase": "SELECT {[DimPatient].[phase].MEMBERS} ON COLUMNS, {[DimPatient].[stage].MEMBERS} ON ROWS "
                          "FROM [Treatment] WHERE ([Measures].[patients])",
    "g14_quarter_in_year": "SELECT {[DimDate].[quarter].MEMBERS} ON COLUMNS, {[DimCancerType].[organ].MEMBERS} ON ROWS "
                           "FROM [Treatment] WHERE ([DimDate].[year].[2011], [Measures].[deathRate])",
    "g15_kind_children": "SELECT {[DimProcedure].[kind].[Chemotherapy].CHILDREN} ON COLUMNS, "
                         "{[DimDate].[year].MEMBERS} ON ROWS FROM [Treatment]",
    "g16_month_volume": "SELECT {[DimDate].[month].MEMBERS} ON COLUMNS FROM [Treatment] "
                        "WHERE ([Measures].[patients])",
    "g17_organ_children_rows": "SELECT {[Measures].[cost], [Measures].[deathRate]} ON COLUMNS, "
                               "{[DimCancerType].[organ].[Lung].CHILDREN} ON ROWS FROM [Treatment]",
    "g18_fact_name": "SELECT {[DimPatient].[sex].MEMBERS} ON COLUMNS FROM [FactTreatment]",
    "g19_transplant_deaths": "SELECT {[DimCancerType].[organ].MEMBERS} ON COLUMNS FROM [Treatment] "
                             "WHERE ([DimProcedure].[kind].[Transplant], [Measures].[deaths])",
    "g20_mixed_rows": "SELECT {[DimDate].[year].MEMBERS} ON COLUMNS, "
                      "{[Measures].[cost], [DimPatient].[sex].[F], [DimPatient].[sex].[M]} ON ROWS "
                      "FROM [Treatment]",
    "g21_quarter_children": "SELECT {[DimDate].[quarter].[3].CHILDREN} ON COLUMNS FROM [Treatment] "
                            "WHERE ([DimProcedure].[kind].[Radiotherapy])",
    "g22_stage_sliced_rate": "SELECT {[DimCancerType].[organ].MEMBERS} ON COLUMNS FROM [Treatment] "
                             "WHERE ([DimPatient].[stage].[IV], [Measures].[deathRate])",
}
