"""triagekit: special-care triage models from sparse lab-exam data."""

__version__ = "0.1.0"
