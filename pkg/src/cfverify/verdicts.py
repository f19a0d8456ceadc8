"""Shared vocabulary for check outcomes.

Verification routines report what they measured together with an
objective verdict.  Matching verdicts against declared expectations
(a predicted divergence counting as success, say) is left to the suite
layer, so the records here never encode intent, only outcome.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .exceptions import ContractError

PASS = "pass"
FAIL = "fail"
EXPECTED_FAILURE = "expected-failure"
DIVERGENT = "divergent"
INCONCLUSIVE = "inconclusive"

VERDICTS = (PASS, FAIL, EXPECTED_FAILURE, DIVERGENT, INCONCLUSIVE)


@dataclass(frozen=True)
class CheckRecord:
    """One labelled comparison: a value, its reference, the outcome.

    `trace` optionally keeps a refinement or convergence sequence so the
    report layer can serialize it without recomputing.
    """

    label: str
    verdict: str
    value: Optional[complex] = None
    reference: Optional[complex] = None
    error: Optional[float] = None
    trace: tuple = ()

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ContractError(f"unknown verdict {self.verdict!r}")


def graded(label: str, value, reference, tol: float,
           trace: tuple = ()) -> CheckRecord:
    """Record whose verdict is the absolute error against a tolerance."""
    err = float(abs(value - reference))
    verdict = PASS if err <= tol else FAIL
    return CheckRecord(label, verdict, complex(value), complex(reference),
                       err, trace)


@dataclass(frozen=True)
class VerificationReport:
    """Bundle of check records produced by one verification routine."""

    name: str
    records: tuple

    def record(self, label: str) -> CheckRecord:
        for rec in self.records:
            if rec.label == label:
                return rec
        raise KeyError(label)

    def verdicts(self) -> tuple:
        return tuple(rec.verdict for rec in self.records)

    def passed(self, allow: Sequence[str] = (PASS,)) -> bool:
        return all(rec.verdict in allow for rec in self.records)
