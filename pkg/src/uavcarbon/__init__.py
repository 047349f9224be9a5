"""Carbon-aware multi-UAV edge computing toolkit.

Subpackages: physics (scenario/kinematics/channel/energy), the episodic MDP
wrapper, a from-scratch dense-network substrate with compiled rollout
kernels, the diffusion policy and its double-regularized soft actor-critic
trainer with dynamic pruning, baselines, a deterministic hybrid retriever,
and the experiment CLI.
"""

from .scenario import Scenario, default_scenario, load_scenario

__all__ = ["Scenario", "default_scenario", "load_scenario"]
__version__ = "0.1.0"
