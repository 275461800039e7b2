"""Enrichment pipeline: generate cached item descriptions through the VLM
endpoint and encode descriptions plus raw metadata text into feature tables.
"""

import datetime
import hashlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..corpus import MetadataTable
from ..errors import GenerationError, TransportError
from ..features import FeatureTable
from ..fingerprint import sha256_hex
from .cache import Description, EnrichmentCache, cache_key
from .client import VLMClient
from .prompts import PromptSpec, build_prompt

ABSENT_IMAGE_HASH = "absent"


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def load_image(ref) -> bytes | None:
    """Read image bytes from a local path; unreadable or missing refs count as absent."""
    if not ref:
        return None
    path = Path(ref)
    if path.exists() and path.is_file():
        return path.read_bytes()
    return None


def describe_item(client: VLMClient, cache: EnrichmentCache, spec: PromptSpec,
                  item_key: str, title: str, image_bytes: bytes | None) -> Description:
    """Return the cached description or generate (and cache) a fresh one.

    An absent image short-circuits into degraded mode: the raw title stands in
    for the description and no network call is made.
    """
    image_hash = (
        hashlib.sha256(image_bytes).hexdigest() if image_bytes else ABSENT_IMAGE_HASH
    )
    key = cache_key(item_key, image_hash, spec.prompt_version, client.model)
    cached = cache.get(key)
    if cached is not None:
        return cached

    if image_bytes is None:
        description = Description(
            item_key=item_key,
            text=title if title else "unknown product",
            model_name=client.model,
            prompt_version=spec.prompt_version,
            created_at=_now(),
            degraded=True,
        )
    else:
        prompt = build_prompt(spec, title)
        text = client.describe(prompt, image_bytes, item_key=item_key)
        description = Description(
            item_key=item_key,
            text=text,
            model_name=client.model,
            prompt_version=spec.prompt_version,
            created_at=_now(),
        )
    cache.put(key, description)
    return description


def enrich_corpus(metadata: MetadataTable, client: VLMClient, cache: EnrichmentCache,
                  spec: PromptSpec, titles=None, concurrency: int = 4,
                  image_loader=load_image):
    """Describe every item, bounded-concurrently; collect per-item failures.

    ``titles`` overrides the titles fed to the prompt (the no-title arm passes
    all-empty titles). Returns (descriptions keyed by item index, failures).
    """
    if titles is None:
        titles = metadata.titles
    descriptions: dict[int, Description] = {}
    failures: list[dict] = []

    def work(idx: int):
        key = metadata.item_ids[idx]
        image = image_loader(metadata.image_refs[idx])
        return idx, describe_item(client, cache, spec, key, titles[idx], image)

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = [pool.submit(work, idx) for idx in range(len(metadata))]
        for future in futures:
            try:
                idx, description = future.result()
            except (GenerationError, TransportError) as e:
                failures.append({"item": e.item_key, "error": str(e)})
                continue
            descriptions[idx] = description
    return descriptions, failures


def clean_description(text: str, marker: str | None = None) -> str:
    """Drop echoed chain-of-thought: keep text after ``marker`` when present,
    else the final paragraph."""
    if marker and marker in text:
        return text.rsplit(marker, 1)[1].strip()
    paragraphs = [p.strip() for p in text.split("\n\n") if p.strip()]
    return paragraphs[-1] if paragraphs else text.strip()


def concat_text_fields(metadata: MetadataTable, idx: int) -> str:
    """Join brand, title, description, category with '. ', dropping empties."""
    parts = (
        metadata.brands[idx],
        metadata.titles[idx],
        metadata.descriptions[idx],
        metadata.categories[idx],
    )
    return ". ".join(p for p in parts if p)


def build_feature_tables(metadata: MetadataTable, descriptions: dict, encoder,
                         cot_marker: str | None = None):
    """Encode descriptions and concatenated metadata into (visual, textual) tables.

    Items without a description (generation failures) get an all-zero visual
    row recorded in the table's missing mask. The textual table never touches
    the endpoint and is computable fully offline.
    """
    n = len(metadata)
    visual_rows = np.zeros((n, encoder.dim), dtype=np.float32)
    missing = set()
    visual_inputs = []
    for idx in range(n):
        description = descriptions.get(idx)
        if description is None:
            missing.add(idx)
            visual_inputs.append((metadata.item_ids[idx], None, None, None))
            continue
        text = clean_description(description.text, cot_marker)
        visual_rows[idx] = encoder.encode(text)
        visual_inputs.append(
            (metadata.item_ids[idx], text, description.prompt_version, description.model_name)
        )

    textual_inputs = [concat_text_fields(metadata, idx) for idx in range(n)]
    textual_rows = encoder.encode_many(textual_inputs)

    visual = FeatureTable(
        kind="item",
        modality="visual",
        ids=metadata.item_ids,
        matrix=visual_rows,
        fingerprint=sha256_hex(encoder.encoder_id, visual_inputs),
        missing=frozenset(missing),
    )
    textual = FeatureTable(
        kind="item",
        modality="textual",
        ids=metadata.item_ids,
        matrix=textual_rows.astype(np.float32),
        fingerprint=sha256_hex(
            encoder.encoder_id, list(zip(metadata.item_ids, textual_inputs))
        ),
    )
    return visual, textual
