"""esv-forge: surgical-video curation, timeline segmentation, and search."""

from .taxonomy import (
    Triplet,
    TaxonomyRegistry,
    default_registry,
    format_triplet,
    load_registry,
    parse_triplet,
    slug,
)
from .annotations import (
    ClipManifest,
    RawAnnotationSegment,
    SurgeryTimeline,
    assemble_timeline,
    lookup_label,
    parse_annotation_export,
)
from .frames import (
    CutoutSpec,
    Frame,
    FrameSignature,
    KeyframeRecord,
    crop_surgical_view,
    cutout_window,
    frame_signature,
    select_keyframes,
    transcode_plan,
)
from .dataset import (
    DatasetManifest,
    DatasetRow,
    decode_frame_filename,
    emit_dataset,
    encode_frame_filename,
    remaining_time,
)
from .temporal import (
    FeatureSequence,
    HeadParams,
    LossWeights,
    TripletLogits,
    attention_pool,
    combined_loss,
    correct_predictions,
    head_forward,
    lstm_forward,
    mean_ensemble,
    softmax_triplet,
)
from .metrics import RocSeries, accuracy, f1_scores, per_class_summary, roc_auc
from .index import IndexSegment, SearchQuery, TimelineIndex, build_index, load_index, persist_index, search
from .service import create_server

__version__ = "0.1.0"
