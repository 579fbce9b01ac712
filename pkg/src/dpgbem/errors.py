"""Exception types shared across the package."""


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class ConfigError(Exception):
    """Invalid experiment configuration."""


class NumericalError(Exception):
    """A linear-algebra step failed (non-SPD system, singular matrix, ...)."""
