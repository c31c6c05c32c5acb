"""Independent checks: AC power flow, exhaustive planning and linearisation audits."""

from .acflow import AcFlowResult, ac_power_flow, admittance_matrix
from .audit import AuditReport, AuditRow, bus_injections, linearization_audit
from .brute import BINARY_LIMIT, brute_force_plan

__all__ = [
    "ac_power_flow", "AcFlowResult", "admittance_matrix",
    "linearization_audit", "AuditReport", "AuditRow", "bus_injections",
    "brute_force_plan", "BINARY_LIMIT",
]
