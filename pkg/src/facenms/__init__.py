"""Core-set selection for identity-grouped face embeddings."""

__version__ = "0.1.0"

from .errors import FaceNMSError, ValidationError  # noqa: E402
from .store import (  # noqa: E402
    Dataset,
    IdentityGroup,
    SelectionManifest,
    apply_manifest,
    read_dataset,
    read_manifest,
    write_dataset,
    write_manifest,
)
from .vecmath import ClusterCenter, center_similarity, cluster_center, cosine, normalize  # noqa: E402
from .metrics import (  # noqa: E402
    contribution_diff,
    count_stats,
    intra_similarity_histogram,
    sparsity,
    sparsity_report,
)
from .samplers import (  # noqa: E402
    SamplerConfig,
    calibrate_threshold,
    face_nms,
    run_sampler,
)
from .synth import SynthConfig, generate  # noqa: E402
from .evaluation import compare, ncm_identify, tar_at_far, verify  # noqa: E402
