from .cache import Description, EnrichmentCache, cache_key
from .client import VLMClient
from .pipeline import (
    build_feature_tables,
    clean_description,
    describe_item,
    enrich_corpus,
)
from .prompts import NO_TITLE_SPEC, PromptSpec, build_prompt
from .textenc import HashingTextEncoder, SentenceTransformerEncoder, make_encoder

__all__ = [
    "Description",
    "EnrichmentCache",
    "cache_key",
    "VLMClient",
    "build_feature_tables",
    "clean_description",
    "describe_item",
    "enrich_corpus",
    "NO_TITLE_SPEC",
    "PromptSpec",
    "build_prompt",
    "HashingTextEncoder",
    "SentenceTransformerEncoder",
    "make_encoder",
]
