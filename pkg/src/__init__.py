"""
SPDRF - Self-Paced Deep Regression Forests
Core package initialization
"""

__version__ = "1.0.0"
__author__ = "SPDRF Development Team"
__description__ = "Self-paced deep regression forests for robust regression on tabular data"
