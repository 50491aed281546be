"""wgd: harvest, clean, aggregate and serve gender/age statistics for
Wikipedia Person biographies."""

__version__ = "0.1.0"
