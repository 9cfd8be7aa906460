"""Review polarity from (weighted) averaged word vectors, small neural
classifiers trained from scratch, and two ways of ensembling them."""

from .corpus import LabeledDataset, LabeledReview, load_reviews, split_dataset, tokenize
from .embeddings import EmbeddingTable, concat_lookup, load_embedding_file, normalize_vector
from .ensemble import grid_search_weights, interpolate_log_probs, train_stacker
from .features import build_review_matrix, build_review_vector
from .models import build_cnn, build_ffnn
from .stats import compute_word_stats, rank_words, select_top_n, word_weight

__version__ = "0.1.0"
