"""Desk-scale web teleoperation stack for a simulated two-arm mobile
manipulator: kinematics, quasi-static world, modal control server, session
telemetry, and an assessment harness."""

__version__ = "0.1.0"
