"""Prompt templates for title-guided item description generation.

Templates are versioned; the rendered prompt feeds the chat endpoint together
with the item image. Rendering is a pure string substitution so identical
(spec, title) pairs always produce identical prompts.
"""

from dataclasses import dataclass

from ..errors import ConfigError

PLACEHOLDER = "{title}"
FALLBACK_SUBJECT = "the main retail product"

DEFAULT_TEMPLATE = (
    "You are looking at a retail product photo. Think step by step.\n"
    "Step 1: identify {title} in the image, ignoring people, backgrounds and "
    "any other objects.\n"
    "Step 2: describe only that product's visual attributes: color, shape, "
    "material, and distinguishing features.\n"
    "Step 3: write your final answer as one single paragraph containing only "
    "the description."
)


@dataclass(frozen=True)
class PromptSpec:
    template_id: str = "title-guided-cot"
    template_text: str = DEFAULT_TEMPLATE
    version: int = 1

    @property
    def prompt_version(self) -> str:
        """Cache-key component; changes whenever the template does."""
        return f"{self.template_id}/{self.version}"


NO_TITLE_SPEC = PromptSpec(template_id="untitled-cot", template_text=DEFAULT_TEMPLATE, version=1)


def build_prompt(spec: PromptSpec, title: str) -> str:
    """Render the template; an empty title falls back to a generic subject."""
    if spec.template_text.count(PLACEHOLDER) != 1:
        raise ConfigError(
            f"prompt template {spec.template_id!r} must contain {PLACEHOLDER} exactly once"
        )
    subject = f'the product "{title}"' if title else FALLBACK_SUBJECT
    return spec.template_text.replace(PLACEHOLDER, subject)
