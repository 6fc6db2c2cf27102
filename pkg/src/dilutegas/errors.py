"""Exception types shared across the package."""


class SingularTMatrix(Exception):
    """A scattering inverse is numerically singular at some energy bin.

    Signals a resonance of the model at that bin; carries the bin energy
    and the offending condition number.
    """

    def __init__(self, energy, cond):
        self.energy = energy
        self.cond = cond
        super().__init__(f"scattering inverse singular at E={energy:g} (cond={cond:.3e})")


class InvalidState(Exception):
    """Input density matrix fails Hermiticity / positivity / unit-trace checks."""


class ShapeMismatch(Exception):
    """A generator's non-jump remainder cannot be written as
    -(1/2){B, X} + i[H, X] with Hermitian H; indicates an assembly bug."""


class TruncationTooSmall(Exception):
    """A Fock-space cutoff is too small for the requested amplitude at the
    configured tail tolerance."""


class CombinatoricsOverflow(Exception):
    """Pairing count times bin-tuple count exceeds the configured budget."""


class ModelFormatError(Exception):
    """Model definition file is malformed; message carries a path to the
    offending element."""
