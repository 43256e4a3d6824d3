"""Physical constants (SI) used throughout the package."""

from scipy.constants import c as C_LIGHT  # m/s
from scipy.constants import epsilon_0 as EPS0  # F/m
from scipy.constants import hbar as HBAR  # J s
from scipy.constants import pi as PI

TWO_PI = 2.0 * PI

__all__ = ["C_LIGHT", "EPS0", "HBAR", "PI", "TWO_PI"]
