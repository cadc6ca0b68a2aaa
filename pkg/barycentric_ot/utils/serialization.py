"""
JSON payloads for measures, plans, certificates and reports.
Floats are written with Python's shortest round-trip representation.
"""

import json
import math
from enum import Enum
from typing import Any, Dict
import numpy as np
from pydantic import BaseModel

from barycentric_ot.models import (
    CheckReport, DiscreteMeasure, DualCertificate, MaxAffineFunction, OrderCertificate,
    TransportPlan
)


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy data and models to JSON-ready values."""
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "NaN"
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return value
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), indent=2, ensure_ascii=False) + "\n"


def measure_payload(measure: DiscreteMeasure) -> Dict[str, Any]:
    return {"dim": measure.dim, "points": measure.points, "weights": measure.weights}


def plan_payload(plan: TransportPlan) -> list:
    return to_jsonable(plan.matrix)


def max_affine_payload(function: MaxAffineFunction) -> list:
    return [
        {"slope": slope, "offset": offset}
        for slope, offset in zip(function.slopes, function.offsets)
    ]


def order_payload(certificate: OrderCertificate) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "relation": certificate.relation.value,
        "holds": certificate.holds,
        "residual": certificate.residual,
        "marginal": certificate.marginal,
    }
    if certificate.witness is not None:
        payload["witness"] = plan_payload(certificate.witness)
    if certificate.violation is not None:
        violation = certificate.violation
        record: Dict[str, Any] = {"amount": violation.amount}
        if violation.threshold is not None:
            record["threshold"] = violation.threshold
        if violation.separating_function is not None:
            record["separating_function"] = max_affine_payload(violation.separating_function)
        payload["violation"] = record
    return payload


def report_payload(report: CheckReport) -> Dict[str, Any]:
    return to_jsonable(report)


def certificate_payload(certificate: DualCertificate, pieces: MaxAffineFunction) -> Dict[str, Any]:
    return {
        "gap": certificate.gap,
        "certified": certificate.certified,
        "primal_value": certificate.primal_value,
        "dual_value": certificate.dual_value,
        "q2_values": certificate.q2_values,
        "f_on_nu": certificate.f_on_nu,
        "pieces": max_affine_payload(pieces),
    }
