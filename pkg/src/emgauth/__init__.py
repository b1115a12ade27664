"""sEMG biometric authentication toolkit.

Feature extraction over sliding windows (time-domain, spectral band, and
autoregressive features), Mahalanobis gesture-user class models, verification
and identification evaluation under three threat scenarios, and greedy
forward channel selection. See the README for the CLI and dataset layout.
"""

from emgauth._kernels import backend_name
from emgauth.dataset import (
    BipolarPairing,
    DatasetError,
    DatasetMeta,
    SynthSpec,
    TrialRecording,
    default_bipolar_pairing,
    derive_bipolar,
    load_dataset,
    save_dataset,
    select_channels,
    synth_dataset,
    validate_dataset,
)
from emgauth.evaluation import (
    CmcCurve,
    DetCurve,
    EvalReport,
    EvaluationError,
    IdentificationResult,
    ScoreSet,
    auc,
    build_verification_scores,
    cmc,
    det_curve,
    eer,
    evaluate,
    identify,
    rank_k_error,
)
from emgauth.features import (
    FeatureError,
    FeatureMatrix,
    FeatureSpec,
    WindowSpec,
    ar_coeffs,
    default_fdt_bands,
    extract_features,
    fdt,
    mav,
    rms,
    ssc,
    window_signal,
    wl,
    zc,
)
from emgauth.model import (
    ClassModel,
    LooSchedule,
    ModelError,
    SingularCovarianceError,
    fit_class_model,
    load_model,
    loo_schedule,
    mahalanobis_score,
    mahalanobis_scores,
    save_model,
)
from emgauth.selection import SelectionError, SfsTrace, error_range, sfs

__version__ = "0.1.0"
