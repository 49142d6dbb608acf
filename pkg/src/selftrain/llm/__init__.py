from .client import (
    FixtureEntry,
    HttpChatClient,
    LlmClient,
    LlmClientConfig,
    MockLlmClient,
    load_fixture,
)
from .pipeline import (
    LlmLabelRecord,
    LlmMode,
    filter_records,
    llm_classify,
    llm_pseudo_label,
    sample_fewshot_examples,
    train_slm_on_pseudo_labels,
)
from .prompts import (
    PromptTemplate,
    parse_label,
    parse_label_conf,
    parse_label_score,
    render_messages,
)

__all__ = [
    "FixtureEntry",
    "HttpChatClient",
    "LlmClient",
    "LlmClientConfig",
    "LlmLabelRecord",
    "LlmMode",
    "MockLlmClient",
    "PromptTemplate",
    "filter_records",
    "llm_classify",
    "llm_pseudo_label",
    "load_fixture",
    "parse_label",
    "parse_label_conf",
    "parse_label_score",
    "render_messages",
    "sample_fewshot_examples",
    "train_slm_on_pseudo_labels",
]
