from semsplat.raster.project import SplatBatch, project
from semsplat.raster.forward import RenderOutput, RetainedState, render
from semsplat.raster.reference import render_reference
from semsplat.raster.backward import RenderGradients, render_backward
from semsplat.raster.imageio import (
    read_float_image,
    write_float_image,
    write_png,
)

__all__ = [
    "RenderGradients",
    "RenderOutput",
    "RetainedState",
    "SplatBatch",
    "project",
    "read_float_image",
    "render",
    "render_backward",
    "render_reference",
    "write_float_image",
    "write_png",
]
