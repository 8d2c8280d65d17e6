"""Desk-scale lab for conditioning-channel data poisoning of controllable
diffusion models: poisoned corpus construction, control-branch training
against a frozen denoiser, triggered generation, and dual-threshold attack
evaluation."""

from cplab._core import (
    composite_trigger,
    config_keys,
    default_attack_target,
    default_trigger_glyph,
    edge_map,
    load_png,
    make_schedule,
    mse,
    psnr,
    q_sample,
    run,
    save_png,
    ssim,
    verify,
)

__all__ = [
    "composite_trigger",
    "config_keys",
    "default_attack_target",
    "default_trigger_glyph",
    "edge_map",
    "load_png",
    "make_schedule",
    "mse",
    "psnr",
    "q_sample",
    "run",
    "save_png",
    "ssim",
    "verify",
]
