"""Exact truncations of a Read-type quasinilpotent operator on l1.

Builds the operator columns two independent ways from a growth sequence,
splits them into positive/negative parts, certifies the nuclearity bound on
the negative part, and produces Perron/irreducibility witnesses on finite
truncations.
"""

__version__ = "0.1.0"
