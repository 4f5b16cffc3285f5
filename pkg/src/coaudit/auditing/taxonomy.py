"""Map free-text vulnerability descriptions to taxonomy categories."""

import json
import re
from dataclasses import dataclass
from dataclasses import field
from importlib.resources import files
from pathlib import Path

FALLBACK_CATEGORY = "other"


@dataclass(frozen=True)
class Taxonomy:
    """Vulnerability categories and the phrases that point to them.

    Attributes:
        categories: Category names in reporting order.
        synonyms: Lower-case phrase to category.
    """

    categories: tuple[str, ...]
    synonyms: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Check that the table is closed over its categories."""
        if FALLBACK_CATEGORY not in self.categories:
            raise ValueError(f"The taxonomy must contain the '{FALLBACK_CATEGORY}' category.")
        unknown = sorted(set(self.synonyms.values()) - set(self.categories))
        if unknown:
            raise ValueError(f"Synonyms point to unknown categories: {', '.join(unknown)}")

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Taxonomy":
        """Read a taxonomy JSON file with 'categories' and 'synonyms'.

        Args:
            path: JSON file. The packaged taxonomy is used when omitted.

        Returns:
            The taxonomy.
        """
        source = Path(path) if path is not None else files("coaudit") / "data" / "taxonomy.json"
        with source.open(encoding="utf-8") as handle:
            data = json.load(handle)
        synonyms = {phrase.lower(): category for phrase, category in data["synonyms"].items()}
        return cls(categories=tuple(data["categories"]), synonyms=synonyms)

    def _pattern(self) -> re.Pattern[str]:
        # Longest phrases first so alternation prefers them at equal starts
        phrases = sorted(self.synonyms, key=lambda p: (-len(p), p))
        alternatives = "|".join(re.escape(phrase) for phrase in phrases)
        return re.compile(rf"(?<![\w.])(?:{alternatives})(?![\w])", re.IGNORECASE)

    def classify(self, text: str, detected: bool = True) -> list[str]:
        """List the categories whose phrases occur in ``text``.

        Matches are case-insensitive, on word boundaries and non-overlapping,
        the longest phrase winning where phrases overlap.

        Args:
            text: Free text, e.g. an exploitation narrative or a catalog name.
            detected: Whether the response claimed a vulnerability. Without
                a matching phrase a detection falls back to 'other'.

        Returns:
            Categories in taxonomy order.
        """
        if not self.synonyms:
            return [FALLBACK_CATEGORY] if detected else []
        found = {self.synonyms[m.group(0).lower()] for m in self._pattern().finditer(text)}
        categories = [category for category in self.categories if category in found]
        if not categories and detected:
            return [FALLBACK_CATEGORY]
        return categories
