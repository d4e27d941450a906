"""plmobs: trace observation for collaborative PLM activity.

Ingests server log lines, structures them into (activity, object, actor)
extraction contexts, mines frequent triplets, computes monitoring indicators,
fires threshold alerts, and serves the dashboards behind the regulator's console.
"""

__version__ = "0.1.0"
