from .feature_extractor import FCN, FeatureExtractor, FeatureExtractorConfig, train_feature_extractor
from .metrics import embed_2d, fid, inception_score, probe_accuracy

__all__ = [
    "FCN",
    "FeatureExtractor",
    "FeatureExtractorConfig",
    "train_feature_extractor",
    "embed_2d",
    "fid",
    "inception_score",
    "probe_accuracy",
]
