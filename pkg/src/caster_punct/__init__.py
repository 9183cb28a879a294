"""caster-punct: caption-stream punctuation strategies, commentary pair
corpora, and a self-contained BLEU/ROUGE/METEOR evaluation harness."""

__version__ = "0.1.0"

from .captions import (  # noqa: F401
    CaptionCue,
    EmptyTranscript,
    FetchTimeout,
    HttpError,
    MalformedInput,
    Transcript,
    fetch_captions,
    parse_captions,
)
from .dataset import (  # noqa: F401
    CommentaryPair,
    Corpus,
    DegenerateSplit,
    SchemaError,
    SplitSpec,
    corpus_stats,
    make_pairs,
    read_jsonl,
    split_by_video,
    write_jsonl,
)
from .generation import (  # noqa: F401
    AdapterConfig,
    AdapterCrashed,
    AdapterTimeout,
    EmptyTrainingSet,
    ProtocolError,
    RetrievalIndex,
    build_index,
    retrieve_generate,
    run_external,
)
from .metrics import (  # noqa: F401
    MetricReport,
    PRF,
    TokenSeq,
    bleu_corpus,
    evaluate,
    meteor,
    ngram_counts,
    rouge_l,
    rouge_n,
    tokenize,
)
from .punctuation import (  # noqa: F401
    CommentarySentence,
    Strategy,
    parse_strategy_spec,
    punctuate,
    render_with_markers,
)
