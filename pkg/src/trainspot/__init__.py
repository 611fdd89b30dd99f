"""trainspot: train timetable reconstruction from passive WiFi probe traces.

The library turns anonymized probe-request logs from station access
points into the line's actual timetable: records are reduced to
per-stay extremities, segmented into monotone passenger journeys,
embedded as extended-real time vectors, clustered into trains by
normalized spectral clustering with eigengap model selection, cleaned
of two outlier families, and enveloped into per-train arrival/departure
times with headway/dwell KPIs and robust incident flags. A synthetic
scenario generator provides exact ground truth for evaluation.
"""

__version__ = "0.1.0"

from ._accel import ACTIVE_BACKEND, HAS_NUMBA
from .baseline import DbscanParams, LabeledRecord, baseline_cluster, dbscan_1d
from .config import PipelineConfig
from .errors import ConfigError, DataError, TrainspotError
from .evaluate import EvalReport, evaluate
from .journeys import (CleaningLevel, Journey, JourneyParams, Leg, apply_cleaning,
                       coverage_ratio_matrix, extract_journeys)
from .outliers import OutlierParams, knn_filter, mad, mad_filter, mad_sigma
from .pipeline import PipelineResult, run_pipeline
from .records import (ExtremityRecord, WifiRecord, parse_records, reduce_extremities,
                      serialize_records)
from .scenario import ScenarioConfig, StationEvent, preset
from .similarity import (JourneyVector, SimilarityGraph, SimilarityParams, build_graph,
                         l0_norm, linf_norm, similarity, vec_difference, vectorize)
from .simulate import SimResult, simulate
from .spectral import (Clustering, LaplacianPair, Spectrum, connected_components,
                       eigengap_select, generalized_eigs, kmeans, laplacian, ncut,
                       spectral_cluster)
from .timetable import (HeadwayEntry, IncidentFlag, KpiSeries, StationTimes,
                        TrainTimetable, compute_kpis, derive_timetable, detect_incidents,
                        dwell_times, headways, interpolate_missing,
                        merge_duplicate_trains)

__all__ = [name for name in dir() if not name.startswith("_")]
