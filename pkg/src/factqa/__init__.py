"""Fact-based visual question answering: a commonsense triple store, detected
visual concepts, an LSTM query classifier, a keyword-matching answer engine and
the evaluation harness around them."""

from .answer import AnswerFrequencyTable, answer, answer_batch
from .classifier import QueryClassifier, QueryType, TrainingConfig, train
from .concepts import ImageAnnotation, ingest_annotations
from .evaluation import evaluate, load_dataset, make_splits
from .kb import Triple, TripleStore, ingest_kb, query_vc

__version__ = "0.1.0"
