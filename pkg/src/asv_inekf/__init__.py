"""Left-invariant EKF on SE_2(3) with partial orientation updates for surface vessels."""

__version__ = "0.1.0"
