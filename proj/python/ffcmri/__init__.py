"""Fast field-cycling MRI reconstruction toolbox."""

from ._ffcmri import (
    Protocol,
    dispersion_t1,
    fit_h1,
    fit_pixelwise,
    joint_histogram,
    mean_rel_error,
    protocol,
    reconstruct,
    schedule,
    signal,
    simulate_phantom,
)

__all__ = [
    "Protocol",
    "dispersion_t1",
    "fit_h1",
    "fit_pixelwise",
    "joint_histogram",
    "mean_rel_error",
    "protocol",
    "reconstruct",
    "schedule",
    "signal",
    "simulate_phantom",
]
