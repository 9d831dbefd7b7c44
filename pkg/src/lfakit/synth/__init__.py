from .params import (ArtifactSpec, CassetteParams, GroundTruth, VISIBLE_THRESHOLD,
                     FAINT_RANGE, classify_intensities, ground_truth_for,
                     is_faint, polygon_bbox)
from .render import render_sample
from .corpus import GenRanges, exact_class_counts, generate_corpus, sample_params
