"""momplan - centroidal momentum planning and LQR tracking source package."""

from src.config import APP_NAME, APP_VERSION

__all__ = ["APP_NAME", "APP_VERSION"]
