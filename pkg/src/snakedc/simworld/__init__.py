from snakedc.simworld.pegs import spawn_peg_array
from snakedc.simworld.world import (
    ContactForce,
    JointReadings,
    WorldParams,
    WorldState,
    geometric_center,
    resolve_contacts,
    sense_external_torques,
    step_world,
)

__all__ = [
    "ContactForce",
    "JointReadings",
    "WorldParams",
    "WorldState",
    "geometric_center",
    "resolve_contacts",
    "sense_external_torques",
    "spawn_peg_array",
    "step_world",
]
