# SPDX-License-Identifier: Apache-2.0
"""Radio-map synthesis, sparse sampling, reconstruction and emitter
localization on occupancy grids."""

from ._core import (
    __version__,
    argmax_in_region,
    diffraction_parameter,
    excess_loss_db,
    extract_edges,
    extract_vertices,
    fresnel,
    idw_reconstruct,
    make_mask,
    normalize_map,
    normalize_rss,
    run_stage,
    sample_rss,
    synthesize,
)

__all__ = [
    "__version__",
    "argmax_in_region",
    "diffraction_parameter",
    "excess_loss_db",
    "extract_edges",
    "extract_vertices",
    "fresnel",
    "idw_reconstruct",
    "make_mask",
    "normalize_map",
    "normalize_rss",
    "run_stage",
    "sample_rss",
    "synthesize",
]
