"""Access to the bundled prompt template files.

Templates live as editable text files under ``taxonomine/prompts/``.  Their
placeholders are plain bracketed tokens (for example ``{CANDIDATES}``) that
are substituted by literal string replacement — not ``str.format`` — so the
surrounding prompt text may contain braces freely.
"""

from __future__ import annotations

from importlib import resources

LEAF_LABEL = "leaf_label.txt"
LABEL_AGGREGATION = "label_aggregation.txt"
TAXONOMY_JUDGE = "taxonomy_judge.txt"
TEST_SET_LABEL = "test_set_label.txt"


def load_template(name: str) -> str:
    """Read a bundled prompt template by file name."""
    return (
        resources.files("taxonomine").joinpath("prompts").joinpath(name).read_text("utf-8")
    )


def render(template: str, **placeholders: str) -> str:
    """Substitute ``{KEY}`` tokens by literal replacement.

    Keys are given with underscores standing in for spaces (Python keyword
    syntax cannot carry spaces): ``TAXONOMY_JSON_STRING`` fills the
    ``{TAXONOMY JSON STRING}`` slot.
    """
    out = template
    for key, value in placeholders.items():
        token = "{" + key.replace("_", " ") + "}"
        if token not in out and "{" + key + "}" in out:
            token = "{" + key + "}"
        out = out.replace(token, value)
    return out
