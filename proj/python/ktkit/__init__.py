"""Container-aware knowledge tracing toolkit.

Python access to the C++ core: container attention plans, the rank AUC,
the synthetic student generator, feature streaming, and a full-model
gradient check. Training and evaluation run through the ``kt`` CLI.
"""

from ._core import (
    __version__,
    gradcheck_micro,
    make_plan,
    roc_auc,
    stream_features,
    synth_summary,
)

__all__ = [
    "__version__",
    "gradcheck_micro",
    "make_plan",
    "roc_auc",
    "stream_features",
    "synth_summary",
]
