from sectioner.cnn.model import CnnArchitecture, SectionCnn
from sectioner.cnn.train import TrainConfig, train_section_cnn, score_section, score_images
from sectioner.cnn.bundle import SectionModelBundle, save_bundle, load_bundle

__all__ = [
    "CnnArchitecture",
    "SectionCnn",
    "TrainConfig",
    "train_section_cnn",
    "score_section",
    "score_images",
    "SectionModelBundle",
    "save_bundle",
    "load_bundle",
]
