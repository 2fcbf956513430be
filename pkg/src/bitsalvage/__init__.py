"""bitsalvage: recovery toolkit for bitstream-corrupted JPEG files."""

__version__ = "0.1.0"

from .image import ImageBuffer, load_raster, save_raster

__all__ = ["ImageBuffer", "load_raster", "save_raster", "__version__"]
