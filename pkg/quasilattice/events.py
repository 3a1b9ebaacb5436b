from enum import Enum

class RunEventName(str, Enum):
    RUN_START = "run_start"
    STAGE_START = "stage_start"
    STAGE_FINISH = "stage_finish"
    TRIAL_START = "trial_start"
    TRIAL_FINISH = "trial_finish"
    ERROR = "error"
    DONE = "done"
