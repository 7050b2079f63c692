"""Exception types raised across the package."""


class TextonError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(TextonError, ValueError):
    pass


class UnknownColor(TextonError, ValueError):
    def __init__(self, x, y, rgb):
        self.x, self.y, self.rgb = x, y, tuple(int(v) for v in rgb)
        super().__init__(f"pixel ({x}, {y}) has color {self.rgb} not in palette")


class IndexOutOfPalette(TextonError, ValueError):
    pass


class InvalidWindowSize(TextonError, ValueError):
    pass


class ImageSmallerThanKernel(TextonError, ValueError):
    pass


class TooFewPoints(TextonError, ValueError):
    pass


class EmptyRegion(TextonError, ValueError):
    pass


class ClassUnderpopulated(TextonError, ValueError):
    def __init__(self, class_index, count, k):
        self.class_index = class_index
        super().__init__(
            f"class {class_index} has {count} training samples, need at least {k}")


class FormatVersionMismatch(TextonError, ValueError):
    pass


class CorruptFile(TextonError, ValueError):
    pass


class ImageTooSmall(TextonError, ValueError):
    pass


class ConfigMismatch(TextonError, ValueError):
    pass


class ClassTooSmall(TextonError, ValueError):
    pass


class DatasetError(TextonError):
    pass
