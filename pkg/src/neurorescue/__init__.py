"""Multi-robot rescue planning on shunting neural fields.

Targets excite a bounded neural field that propagates globally while
obstacles carve local inhibitory wells, so gradient-following robots reach
targets collision-free in dynamic worlds. Executed trajectories feed a
feature extractor that condenses the dense field into a sparse roadmap of
feature neurons plus a link matrix, over which later queries plan near
shortest paths in microseconds instead of waiting for field propagation.
"""

from .environment import (Environment, GridSpec, Obstacle, RobotState,
                          ScenarioError, Target, gamma, load_scenario,
                          serialize_scenario, step_environment)
from .features import (FeatureNeuron, FeatureStore, Representativeness,
                       activity_channel, angle_candidate, collision_free_link,
                       distance_channel, optimize_feature, representativeness,
                       secondary_fusion, supercover_cells,
                       update_feature_matrix)
from .field import (NeuralField, ShuntingParams, assemble_external_input,
                    connection_weight, isolated_equilibrium, relax,
                    shunting_step, step_field)
from .navigation import (ActivityMatrix, Assignment, advance_robot,
                         assign_targets, build_activity_matrix, command_neuron)
from .planner import (AttachmentError, HeuristicPath, NoPathError, PlanQuery,
                      attach_endpoint, plan_via_matrix)
from .runner import (RescueReport, RescueSimulation, SweepSpec, run_benchmark,
                     run_rescue, run_sweep)
from .scenarios import Scenario, builtin, random_scenario

__version__ = "0.1.0"
