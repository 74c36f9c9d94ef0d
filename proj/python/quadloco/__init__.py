"""Python interface to the chance-constrained quadruped locomotion stack."""

from ._quadloco import (
    NonconvexProblemError,
    OutOfWorkspaceError,
    RobotModel,
    chance_tighten,
    forward_kinematics,
    inverse_kinematics,
    leg_jacobian,
    normal_quantile,
    plan_grf,
    run_scenario,
    run_scenario_file,
    solve_qp,
    stance_feedforward,
    terrain_height,
)

__all__ = [
    "NonconvexProblemError",
    "OutOfWorkspaceError",
    "RobotModel",
    "chance_tighten",
    "forward_kinematics",
    "inverse_kinematics",
    "leg_jacobian",
    "normal_quantile",
    "plan_grf",
    "run_scenario",
    "run_scenario_file",
    "solve_qp",
    "stance_feedforward",
    "terrain_height",
]
