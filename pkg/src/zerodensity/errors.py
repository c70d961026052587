"""Exception hierarchy.

Every error carries a ``category`` used by the command line to pick an exit
code: ``validation`` (1), ``numerical`` (2) or ``io`` (3).
"""


class ZeroDensityError(Exception):
    category = "validation"


class ValidationError(ZeroDensityError):
    category = "validation"


class NumericalError(ZeroDensityError):
    category = "numerical"


class IOFailure(ZeroDensityError):
    category = "io"


# mesh
class ParseError(ValidationError):
    pass


class NotClosed(ValidationError):
    pass


class NonOrientable(ValidationError):
    pass


class DegenerateFace(ValidationError):
    pass


# bundle
class ZeroNormal(NumericalError):
    pass


class ZeroProjection(NumericalError):
    pass


class BranchBoundary(NumericalError):
    pass


class NotInteger(NumericalError):
    pass


class HolonomyMismatch(ValidationError):
    pass


class DisconnectedPath(ValidationError):
    pass


# laplace / spectral
class NonRealEnergy(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class KTooLarge(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class NegativeT(ValidationError):
    pass


class ZeroSection(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


# index
class ZeroAtVertex(NumericalError):
    def __init__(self, vertex, msg=None):
        self.vertex = int(vertex)
        super().__init__(msg or f"section vanishes at vertex {vertex}")


class AntipodalEdge(NumericalError):
    def __init__(self, i, j, msg=None):
        self.edge = (int(i), int(j))
        super().__init__(msg or f"transported value is antipodal on edge ({i}, {j})")


# closed form
class TZero(ValidationError):
    pass


class UnwrapAmbiguous(NumericalError):
    def __init__(self, face, msg=None):
        self.face = int(face)
        super().__init__(msg or f"phase unwrapping failed on face {face}")


class OutOfGrid(ValidationError):
    pass


# monte carlo
class TooManyDegenerate(NumericalError):
    pass


EXIT_CODES = {"validation": 1, "numerical": 2, "io": 3}
