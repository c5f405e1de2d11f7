"""201-209 GHz indoor channel simulator."""

__version__ = "0.1.0"
