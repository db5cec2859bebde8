"""In-memory corpus types: one generation, and one model's samples on one instance."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from sepkit.errors import ValidationError
from sepkit.textsim import TokenEmbeddings, TokenSequence, extract_entities, tokenize

DEFAULT_K = 5
DEFAULT_TEMPERATURE = 0.5


@dataclass(frozen=True)
class Generation:
    instance_id: str
    model_id: str
    sample_index: int
    text: str
    token_embeddings_ref: str | None = None
    entities: frozenset[str] | None = None
    embeddings: TokenEmbeddings | None = field(default=None, compare=True, repr=False)

    def __post_init__(self) -> None:
        if self.sample_index < 0:
            raise ValidationError(f"sample_index must be >= 0, got {self.sample_index}")
        if self.entities is not None and not isinstance(self.entities, frozenset):
            object.__setattr__(self, "entities", frozenset(self.entities))

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.instance_id, self.model_id, self.sample_index)

    @property
    def key_str(self) -> str:
        return f"{self.instance_id}/{self.model_id}/{self.sample_index}"

    @cached_property
    def tokens(self) -> TokenSequence:
        return tokenize(self.text)

    @cached_property
    def entity_set(self) -> frozenset[str]:
        if self.entities is not None:
            return self.entities
        return extract_entities(self.text)


@dataclass(frozen=True)
class GenerationSet:
    instance_id: str
    model_id: str
    samples: tuple[Generation, ...]
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        for gen in self.samples:
            if gen.instance_id != self.instance_id or gen.model_id != self.model_id:
                raise ValidationError(
                    f"sample {gen.key_str} does not belong to set {self.instance_id}/{self.model_id}"
                )

    @property
    def k(self) -> int:
        return len(self.samples)

    @classmethod
    def from_texts(
        cls, instance_id: str, model_id: str, texts, temperature: float = DEFAULT_TEMPERATURE
    ) -> GenerationSet:
        samples = tuple(
            Generation(instance_id, model_id, j, text) for j, text in enumerate(texts)
        )
        return cls(instance_id, model_id, samples, temperature)
