"""WiFi CSI multi-person pose estimation.

Pipeline: CSI amplitude windows are resampled and cut into frequency and time
tokens, encoded by two attention branches, fused into a square feature map,
refined over several stages into keypoint confidence maps (PCM) and part
affinity fields (PAF), then decoded into skeletons.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .model import MultiFormer, parameter_breakdown
from .presets import PRESETS, ModelConfig, get_preset

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "PRESETS", "ModelConfig", "MultiFormer", "__version__", "get_preset", "parameter_breakdown"]
