"""Scene-aware ship detection for SAR-style grayscale imagery.

Pipeline: unsupervised inshore/offshore scene clustering, global-threshold
sea-land masks for inshore scenes, a fixed convolutional feature pyramid,
feature-level land suppression, and a threshold/blob/NMS detection head with
COCO-style evaluation. See the CLI (``seaward --help``) for the file-mediated
stage-by-stage interface.
"""

from .attention import (SuppressionWeights, attention_map, compute_lambda,
                        default_suppression_weights, init_suppression_weights,
                        load_suppression_weights, modulate, pool_flatten,
                        project_channels, save_suppression_weights,
                        suppress_pyramid, zero_suppression_weights)
from .backbone import (BackboneWeights, build_pyramid, default_weights,
                       init_weights, load_weights, save_weights)
from .detector import Detection, DetectorConfig, detect, iou, nms, propose, score_map
from .errors import (ConfigError, DegenerateInputError, DimensionError,
                     EmptyImageError, FormatError, InputError, OutputError,
                     PlacementError, SeawardError)
from .imagery import (histogram, load_image, load_mask, resize_nearest,
                      save_image, save_mask)
from .metrics import (AblationReport, MetricsReport, average_precision,
                      coco_map, land_false_positives, run_ablation,
                      run_detection_passes, ship_ground_truth)
from .otsu import OtsuResult, class_variance, global_mean, otsu_threshold, segment
from .scenes import (KMeansModel, classify_images, distance, kmeans2,
                     label_scenes, scene_feature)
from .synth import (GroundTruthBox, SceneSample, SceneSpec, apply_speckle,
                    generate_dataset, generate_scene, read_dataset,
                    write_dataset)

__version__ = "0.1.0"
