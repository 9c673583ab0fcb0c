from semsplat.guidance.schedule import NoiseSchedule, add_noise
from semsplat.guidance.oracles import (
    AnalyticOracle,
    RecordedOracle,
    RemoteOracle,
    request_digest,
)
from semsplat.guidance.compose import (
    ComposedScore,
    ScoreGradient,
    compose_scores,
    plain_sds_grad,
    semantic_sds_grad,
)
from semsplat.guidance.wire import decode_tensor, encode_tensor

__all__ = [
    "AnalyticOracle",
    "ComposedScore",
    "NoiseSchedule",
    "RecordedOracle",
    "RemoteOracle",
    "ScoreGradient",
    "add_noise",
    "compose_scores",
    "decode_tensor",
    "encode_tensor",
    "plain_sds_grad",
    "request_digest",
    "semantic_sds_grad",
]
