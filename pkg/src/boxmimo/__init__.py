"""Box decoding MIMO detection with sort-free candidate pruning."""

from ._backend import active as active_backend
from ._backend import compiled_available, set_backend
from .boxdec import (
    BoxCluster,
    PruneConfig,
    Strategy,
    box_detect,
    icp_select,
    make_cluster,
    metric1_select,
    metric2_order,
    scp_prune,
)
from .channel import ChannelInstance, SeedSpec, draw_instance
from .constellation import GridIndex, Qam, bits_to_symbol, box_candidates, make_qam, quantize_base, symbol_to_bits
from .detectors import (
    DetectionResult,
    DetectorStats,
    PathNode,
    kbest_detect,
    lmmse_detect,
    ml_brute_force,
    ped_extend,
    sphere_detect,
    zf_detect,
)
from .numerics import QrFactors, back_substitute, herm_mul_vec, qr_decompose

__all__ = [
    "BoxCluster", "ChannelInstance", "DetectionResult", "DetectorStats", "GridIndex", "PathNode",
    "PruneConfig", "Qam", "QrFactors", "SeedSpec", "Strategy", "active_backend", "back_substitute",
    "bits_to_symbol", "box_candidates", "box_detect", "compiled_available", "draw_instance",
    "herm_mul_vec", "icp_select", "kbest_detect", "lmmse_detect", "make_cluster", "make_qam",
    "metric1_select", "metric2_order", "ml_brute_force", "ped_extend", "qr_decompose",
    "quantize_base", "scp_prune", "set_backend", "sphere_detect", "symbol_to_bits", "zf_detect",
]
