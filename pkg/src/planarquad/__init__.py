"""Planar quadruped locomotion learning stack.

A self-contained study of how much controller structure helps a learned
velocity-tracking trot: an 11-DoF planar rigid-body simulator with penalty
ground contact, three policy structures (direct torque, task-space polar
impedance, parameterized trot controller), from-scratch MLP training
machinery, TD3 and one-step DDPG trainers, and an experiment harness.
"""

__version__ = "0.1.0"
