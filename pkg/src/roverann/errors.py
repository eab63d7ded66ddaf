"""Exception types shared by the network, trainer and simulator."""


class ShapeError(ValueError):
    """Vector or matrix dimensions disagree with the network topology."""


class NonFiniteError(ArithmeticError):
    """A weight, delta or loss became NaN or infinite."""


class FormatError(ValueError):
    """A network, dataset or scenario file is malformed."""
