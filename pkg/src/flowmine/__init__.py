"""flowmine: mine an executable TaskFlow tree from chat logs and serve it.

Offline: cluster utterances into dialogue actions, standardize dialogues by
retrieval, fit an n-gram transition model, beam-sample likely action
sequences and merge them into a condition-guarded tree. Online: an execution
engine walks the tree, calls API stubs and answers with canonical staff
utterances.
"""

from .corpus import Dialogue, Utterance, load_dialogues, save_dialogues, tokenize
from .actions import (
    DialogueAction,
    Vectorizer,
    apply_manifest,
    build_actions,
    embed,
    fit_vectorizer,
    kmeans_cluster,
)
from .standardize import (
    EOS,
    SOS,
    ActionLabel,
    ActionSequence,
    RetrievalIndex,
    bm25_recall,
    build_bm25_index,
    similarity,
    standardize_dialogue,
    standardize_utterance,
)
from .ngram import NGramModel, fit_ngram, ngram_prob, sequence_prob
from .sampler import BeamConfig, ScoredSequence, sample_sequences, top_k_continuations
from .taskflow import (
    ApiSpec,
    Predicate,
    TaskFlow,
    build_taskflow,
    insert_api_node,
    set_edge_condition,
    validate_taskflow,
)
from .extract import (
    Mention,
    ParamDef,
    ParamValue,
    default_param_defs,
    extract_params,
    normalize_mention,
)
from .synth import make_corpus, synthesize_dialogues
from .engine import Session, TurnResult, create_session, eval_condition, step
from .harness import (
    ConformanceReport,
    PipelineConfig,
    replay_conformance,
    run_pipeline,
)

__version__ = "0.1.0"
