"""Multi-objective parameter auto-tuning for segmentation workflows."""
__version__ = "0.1.0"
