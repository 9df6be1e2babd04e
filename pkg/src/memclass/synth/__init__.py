from .color import (
    ColorDatasetSpec,
    ColorImages,
    generate_color_dataset,
    render_color_image,
    sample_patch_center,
)
from .corruptions import (CORRUPTIONS, NOISE_KINDS, SEVERITY_PARAMS, CorruptionSpec, apply_corruption, corrupt,
                          corrupt_dataset)
from .leaf import LeafDatasetSpec, generate_leaf_dataset, generate_synthetic_leaf
from .rng import derive_seed, image_seed, key_of, stream
