"""DC motor position control: discrete PID and a neural model-reference controller."""

__version__ = "0.1.0"
