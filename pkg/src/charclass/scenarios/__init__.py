from .constructions import (
    Scenario, atiyah, baby, blowup, braid, build, fay_reduce, grassmann,
)
from .pipelines import (
    RUNNERS, dr_extract, kill_test, oddness_check, printed_dr, run_joint,
)
from .recursion import (
    RecursionReport, d_table, joint_solve, leading_scan, solve_recursion,
)

__all__ = [
    "Scenario", "atiyah", "baby", "blowup", "braid", "build", "fay_reduce", "grassmann",
    "RUNNERS", "dr_extract", "kill_test", "oddness_check", "printed_dr", "run_joint",
    "RecursionReport", "d_table", "joint_solve", "leading_scan", "solve_recursion",
]
