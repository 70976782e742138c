"""Exception hierarchy shared across the package."""


class MolpromptError(Exception):
    """Base class for all package-specific errors."""


class InputError(MolpromptError):
    """Bad user input (files, SMILES, CLI arguments). Maps to exit code 2."""


class NumericError(MolpromptError):
    """Numerical failure (non-finite loss, degenerate system). Exit code 3."""


class SmilesSyntaxError(InputError):
    """Malformed SMILES text. Carries the 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ValenceError(InputError):
    """An atom exceeds its allowed valence."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class MultiFragmentError(SmilesSyntaxError):
    """Disconnected (multi-fragment) SMILES are not supported."""


class SizeLimitError(MolpromptError):
    """Graph too large for the exact isomorphism search."""


class NoPerturbationSite(MolpromptError):
    """Molecule has no scaffold or no side chain to perturb."""


class NoValidFragment(MolpromptError):
    """No pool fragment fits the free valence at the chosen site."""


class EmptyClass(MolpromptError):
    """A metric needs both classes (e.g. cliff and non-cliff pairs) present."""


class StereoIgnoredWarning(UserWarning):
    """Stereochemistry marks were parsed and dropped."""
