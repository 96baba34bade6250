"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: GuardError -> 2, ConvergenceError -> 3,
FormatError -> 4.  Everything else is a plain bug and propagates.
"""


class KGBreatherError(Exception):
    pass


class GuardError(KGBreatherError):
    """A precondition or runtime guard was violated (amplitude too large,
    contraction estimate above threshold, resonant harmonic, ...)."""


class ResonanceError(GuardError):
    """A per-harmonic symbol of the linearized wave operator is too close
    to zero to invert safely."""

    def __init__(self, harmonic: int, magnitude: float):
        self.harmonic = harmonic
        self.magnitude = magnitude
        super().__init__(
            f"near-singular harmonic l={harmonic}: |symbol| = {magnitude:.3e}"
        )


class ConvergenceError(KGBreatherError):
    """An iterative solver ran out of iterations or diverged."""


class FormatError(KGBreatherError):
    """Malformed input file or inconsistent serialized data."""
