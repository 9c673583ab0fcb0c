from semsplat.semantic.providers import (
    FileEmbeddingProvider,
    PseudoEmbeddingProvider,
    RemoteEmbeddingProvider,
    pseudo_embedding,
)
from semsplat.semantic.codec import EmbeddingCodec, codec_loss_and_grad, train_codec
from semsplat.semantic.maps import (
    MaskSet,
    SubpromptSet,
    apply_background,
    decode_map,
    masks,
    pool_masks,
    probabilities,
)
from semsplat.semantic.tables import read_embedding_table, write_embedding_table

__all__ = [
    "EmbeddingCodec",
    "FileEmbeddingProvider",
    "MaskSet",
    "PseudoEmbeddingProvider",
    "RemoteEmbeddingProvider",
    "SubpromptSet",
    "apply_background",
    "codec_loss_and_grad",
    "decode_map",
    "masks",
    "pool_masks",
    "probabilities",
    "pseudo_embedding",
    "read_embedding_table",
    "train_codec",
    "write_embedding_table",
]
