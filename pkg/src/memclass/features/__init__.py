from .extractors import (
    ColorExtractor,
    Extractor,
    FeatureVector,
    LeafExtractor,
    PixelGridExtractor,
    extractor_from_dict,
)
from .hsv import hsv_to_rgb_image, rgb_to_hsv, rgb_to_hsv_image
from .hull import convex_hull, hull_mask, points_in_hull
from .leaf import HsvRange, HsvThresholds, denoise, leaf_features, leaf_masks, noise_sigma
from .lesion import lesion_features
from .segment import COLOR_NAMES, NO_COLOR, Segment, color_feature, segment_image
from .similarity import (
    ColorSimilarity,
    PrecomputedSimilarity,
    RbfSimilarity,
    Similarity,
    TreeSimilarity,
    similarity_from_dict,
    tree_similarity,
)
