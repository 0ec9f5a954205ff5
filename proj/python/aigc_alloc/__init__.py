"""Edge AIGC QoE allocation toolkit.

Python bindings over the C++ core: scenario/QoE model, feasibility
projection, exhaustive oracle, heuristics and the diffusion-policy,
SAC-lite and PPO-lite trainers.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
