"""
lqlab - numerical laboratory for L^q empirical processes of sub-Gaussian classes
"""

__version__ = "0.3.0"
