"""Fringe-pattern analysis toolkit for vibrating-surface interferogram video."""

from .annot import (
    AnnotationError,
    BBox,
    EllipseAnnotation,
    FrameRecord,
    VolunteerBatch,
    aggregate_volunteers,
    ellipse_to_bbox,
    parse_annotations,
    write_annotations,
)
from .detect import Detection, DetectorConfig, detect_antinodes, local_contrast_map
from .metrics import (
    EvalReport,
    LossConfig,
    LossRanking,
    PixelEvalReport,
    ScoredBox,
    TruthBox,
    coco_map,
    evaluate_detections,
    frame_loss,
    iou,
    match,
    pixel_scores,
    rank_by_loss,
    ring_scores,
)
from .rings import (
    CropPatch,
    RadialProfile,
    RingCount,
    RingCounterConfig,
    count_rings,
    count_rings_oracle,
    crop_and_square,
    extract_spokes,
)
from .segmap import (
    QuantizedRingMap,
    RingMap,
    analyze_frame,
    build_target_map,
    map_to_counts,
    predict_map,
    quantize_map,
)
from .synth import (
    AntinodeSpec,
    DatasetConfig,
    SynthSpec,
    fringe_profile,
    render_dataset,
    render_frame,
    sample_spec,
)
from .track import RiseFit, Track, TrackConfig, fit_rise, link, series_correlation

__version__ = "0.1.0"
