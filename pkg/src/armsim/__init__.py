"""armsim: lead-screw robotic-arm simulator with live teleoperation.

Subsystems: plant (axis + stepper dynamics), controller (PI + power gate),
sensing (encoders and IR pose detection), simkit (closed-loop runner,
signals, latency channel, metrics), experiments (configs and canned runs),
teleop (live service).
"""

from .kernel import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
