"""gliakit: evaluation, post-processing, ensembling and augmentation for
brain-tumour segmentation volumes."""

__version__ = "0.1.0"

from .errors import (
    EmptyMaskError,
    GeometryMismatchError,
    GliakitError,
    NiftiFormatError,
    UnsupportedDatatypeError,
    ValidationError,
)
from .labels import AGPT, PRE_TREATMENT, LabelSchema, extract_region, get_schema, region_volumes
from .nifti import read_nifti, read_probmap, write_nifti, write_probmap
from .volume import Geometry, LabelMap, ProbMap, Volume, fft3, ifft3

__all__ = [
    "__version__",
    "Geometry",
    "Volume",
    "LabelMap",
    "ProbMap",
    "fft3",
    "ifft3",
    "read_nifti",
    "write_nifti",
    "read_probmap",
    "write_probmap",
    "LabelSchema",
    "AGPT",
    "PRE_TREATMENT",
    "get_schema",
    "extract_region",
    "region_volumes",
    "GliakitError",
    "ValidationError",
    "GeometryMismatchError",
    "NiftiFormatError",
    "UnsupportedDatatypeError",
    "EmptyMaskError",
]
