"""telewalk: bipedal telelocomotion reference generation, balance control, and simulation."""

__version__ = "0.1.0"
