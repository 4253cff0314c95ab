"""
Models for model-vs-simulation comparisons.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator

from app.constants import STATUS_FAIL

Status = Literal['pass', 'fail', 'untestable', 'info']


class AttackParams(BaseModel):
    """Inputs of the closed-form predictions. Times in us, sizes in bytes, R in bytes/s."""
    T: Optional[int] = None
    rtt: int
    cwnd0: Optional[float] = None
    W: int = 0
    mss: int = 1000
    R: Optional[int] = None
    d_prop: Optional[int] = None
    L: Optional[int] = None
    copies: int = 3

    @field_validator('rtt')
    @classmethod
    def validate_rtt(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("rtt must be > 0")
        return v


class ComparisonRow(BaseModel):
    claim: str
    metric: str
    simulated: Optional[float] = None
    predicted: Optional[float] = None
    status: Status
    note: str = ''


class ComparisonReport(BaseModel):
    scenario: str
    strategy: str
    tolerance: float
    steady_state_index: Optional[int] = None
    rows: List[ComparisonRow] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(row.status == STATUS_FAIL for row in self.rows)

    def add(self, claim: str, metric: str, status: str, simulated=None, predicted=None,
            note: str = '') -> ComparisonRow:
        row = ComparisonRow(
            claim=claim,
            metric=metric,
            simulated=None if simulated is None else float(simulated),
            predicted=None if predicted is None else float(predicted),
            status=status,
            note=note,
        )
        self.rows.append(row)
        return row
