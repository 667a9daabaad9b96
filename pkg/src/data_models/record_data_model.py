from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ValidationError, model_validator

from data_models.config_validator import Experiment, Method
from evaluation.metrics import EvalRecord

RECORD_STATUS_OK = "ok"
RECORD_STATUS_FAILED = "failed"


class RunRecord(BaseModel):
    """
    One method's run on one sweep coordinate.

    `dataset_seed` regenerates the coordinate's dataset bit-exactly and
    `method_seed` is the CicmeConfig seed every method of the coordinate
    shares. A failed run carries the error and no evaluation.
    """

    experiment: Experiment
    n: int
    repeat: int
    method: Method
    dataset_seed: int
    method_seed: int
    status: str = RECORD_STATUS_OK
    error: Optional[str] = None
    variable_names: List[str] = []
    evaluation: Optional[EvalRecord] = None
    stable_set: Optional[List[int]] = None
    p_values: Optional[List[float]] = None
    timings: Dict[str, float] = {}
    convergence: Dict[str, bool] = {}

    @model_validator(mode="after")
    def status_consistency(self):
        if self.status not in (RECORD_STATUS_OK, RECORD_STATUS_FAILED):
            raise ValueError(f"Unknown record status '{self.status}'")
        if self.status == RECORD_STATUS_OK and self.evaluation is None:
            raise ValueError("A successful run record needs an evaluation")
        if self.status == RECORD_STATUS_FAILED and not self.error:
            raise ValueError("A failed run record needs an error message")
        return self

    @property
    def key(self) -> Tuple[str, int, int, str]:
        return (self.experiment.value, self.n, self.repeat, self.method.value)

    @property
    def failed(self) -> bool:
        return self.status == RECORD_STATUS_FAILED

    def to_json_line(self) -> str:
        # timings are wall-clock and the only non-reproducible field
        return self.model_dump_json()


def parse_run_record(line: str) -> RunRecord:
    """
    Validate one line of a runs file.

    Raises:
        ValueError: if the line is not a valid record
    """
    try:
        return RunRecord.model_validate_json(line)
    except ValidationError as exc:
        raise ValueError(f"Invalid run record: {exc}") from exc
