"""Simulation and analysis of optical side channels on smart bulbs.

Bulb-side visualizers emit LIFX-style control packets, a parametric optical
channel turns the light timeline into sensor samples, and the adversary side
matches luminance/color profiles against a reference library or demodulates an
M-ary ASK infrared covert channel.
"""

__version__ = "0.1.0"
