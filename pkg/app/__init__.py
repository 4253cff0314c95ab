"""
Stealth tunnel simulator.

Deterministic discrete-event simulation of rate-limited man-in-the-middle
attacks on TCP carried over an IPsec tunnel, the reordering tolerant
gateway defense (RTTP), and the closed-form bounds the runs are checked
against.
"""
__version__ = '0.1.0'
