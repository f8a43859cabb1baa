"""Point cloud upsampling with local parameterization."""

from ._geoup import (
    ArgumentError,
    FormatError,
    GeometryError,
    GeoupError,
    IoError,
    NumericalError,
    chamfer,
    curvatures,
    farthest_point_sample,
    hausdorff,
    jsd,
    p2f,
    poisson_disk_sample,
    read_mesh,
    read_xyz,
    upsample_analytic,
    upsample_model,
    write_xyz,
)

__all__ = [
    "ArgumentError",
    "FormatError",
    "GeometryError",
    "GeoupError",
    "IoError",
    "NumericalError",
    "chamfer",
    "curvatures",
    "farthest_point_sample",
    "hausdorff",
    "jsd",
    "p2f",
    "poisson_disk_sample",
    "read_mesh",
    "read_xyz",
    "upsample_analytic",
    "upsample_model",
    "write_xyz",
]
