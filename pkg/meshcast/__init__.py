"""
meshcast: sequence-aware MRI segmentation with Mesh-Cast sequential modules.
"""

__version__ = "0.1.0"
