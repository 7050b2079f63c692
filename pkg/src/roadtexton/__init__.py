"""Class-semantic colour-texture textons with superpixel voting for roadside scene segmentation."""
from .classifier import (
    SegmentationResult, classify_image, classify_pixelwise, classify_region, map_to_textons,
)
from .features import FeatureConfig, build_filter_bank, extract_features
from .image import UNKNOWN, ClassPalette, rgb_to_lab
from .superpixels import SegParams, segment_graph_based
from .textons import Metric, TextonDictionary, kmeans, train_dictionary

__version__ = "0.1.0"

__all__ = [
    "SegmentationResult", "classify_image", "classify_pixelwise", "classify_region", "map_to_textons",
    "FeatureConfig", "build_filter_bank", "extract_features", "UNKNOWN", "ClassPalette", "rgb_to_lab",
    "SegParams", "segment_graph_based", "Metric", "TextonDictionary", "kmeans", "train_dictionary",
]
