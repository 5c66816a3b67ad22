"""Synthetic deblurring and tomography test problems."""
from .base import TestProblem
from .bundle import export_bundle, load_bundle, problem_metadata
from .deblur import blur_matrix_1d, deblur1d, deblur2d, gaussian_psf_1d, gaussian_psf_2d
from .noise import add_noise
from .phantoms import IMAGES, MOTIONS, PHANTOMS, SIGNALS, image, motion_frames, phantom, signal
from .tomo import angle_schedule, dynamic_tomo, n_detectors, parallel_beam_matrix, tomo

__all__ = [
    "TestProblem", "add_noise", "deblur1d", "deblur2d", "tomo", "dynamic_tomo",
    "gaussian_psf_1d", "gaussian_psf_2d", "blur_matrix_1d", "parallel_beam_matrix",
    "angle_schedule", "n_detectors", "export_bundle", "load_bundle", "problem_metadata",
    "signal", "image", "phantom", "motion_frames", "SIGNALS", "IMAGES", "PHANTOMS", "MOTIONS",
]
