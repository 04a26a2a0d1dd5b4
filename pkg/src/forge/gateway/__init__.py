"""Client interfaces for external and model-backed services, with offline fakes."""

from .fakes import (
    CountingProxy,
    DictionaryNer,
    ExtractiveSnippetWriter,
    FakeCrawler,
    FakeEngine,
    FixtureCorpus,
    HashingEmbedder,
    OverlapReranker,
    RuleJudge,
    ScriptedEngine,
    ScriptedSolver,
    TemplateQuestionGenerator,
    TemplateRephraser,
    answer_matches,
    choose_blocked,
    cosine,
    extract_final_answer,
)
from .types import (
    ClientError,
    Crawler,
    Embedder,
    EngineResult,
    EntityRecognizer,
    ErrorKind,
    Judge,
    JudgeVerdict,
    Mention,
    QuestionGenerator,
    Rephraser,
    Reranker,
    SearchEngine,
    SnippetVerdict,
    SnippetWriter,
    Solver,
)

__all__ = [
    "ClientError", "CountingProxy", "Crawler", "DictionaryNer", "Embedder", "EngineResult",
    "EntityRecognizer", "ErrorKind", "ExtractiveSnippetWriter", "FakeCrawler", "FakeEngine",
    "FixtureCorpus", "HashingEmbedder", "Judge", "JudgeVerdict", "Mention", "OverlapReranker",
    "QuestionGenerator", "Rephraser", "Reranker", "RuleJudge", "ScriptedEngine", "ScriptedSolver",
    "SearchEngine", "SnippetVerdict", "SnippetWriter", "Solver", "TemplateQuestionGenerator",
    "TemplateRephraser", "answer_matches", "choose_blocked", "cosine", "extract_final_answer",
]
