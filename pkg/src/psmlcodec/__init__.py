"""PSML quadtree image codec with a wedgelet baseline."""

from .codec import (CodestreamError, EncoderConfig, Encoding, RateDistortionPoint, RateError,
                    decode, decompose, encode, prune, quantize_gray)
from .geometry import LinePartition, OrientationSet, orientations, partition
from .pixel_grid import PatchView, PgmError, PixelGrid, psnr, read_pgm, synth_ridge, write_pgm
from .psml import FitResult, FitState, PsmlModel, fit_patch_exhaustive, fit_patch_fast
from .wedgelet import WedgeletModel, enumerate_beamlets, fit_wedgelet

__all__ = [
    "CodestreamError", "EncoderConfig", "Encoding", "RateDistortionPoint", "RateError",
    "decode", "decompose", "encode", "prune", "quantize_gray",
    "LinePartition", "OrientationSet", "orientations", "partition",
    "PatchView", "PgmError", "PixelGrid", "psnr", "read_pgm", "synth_ridge", "write_pgm",
    "FitResult", "FitState", "PsmlModel", "fit_patch_exhaustive", "fit_patch_fast",
    "WedgeletModel", "enumerate_beamlets", "fit_wedgelet",
]
