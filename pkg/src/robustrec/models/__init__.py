from .base import Recommender, load_model, top_k
from .bpr import BPRMF, BPRParams
from .context import FactorizationMachine, FeatureEncoder, FMParams, LogisticRegression, LRParams
from .itemknn import ItemKNN, ItemKNNParams
from .pop import Pop, PopParams

MODELS = {
    "pop": Pop,
    "itemknn": ItemKNN,
    "bpr": BPRMF,
    "lr": LogisticRegression,
    "fm": FactorizationMachine,
}

ALIASES = {"mf-bpr": "bpr", "mf_bpr": "bpr", "bprmf": "bpr", "item-knn": "itemknn", "item_knn": "itemknn"}


def canonical_name(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in MODELS:
        raise KeyError(name)
    return key


def create(name: str, **params) -> Recommender:
    return MODELS[canonical_name(name)](**params)


__all__ = [
    "MODELS", "Recommender", "load_model", "top_k", "create", "canonical_name",
    "Pop", "PopParams", "ItemKNN", "ItemKNNParams", "BPRMF", "BPRParams",
    "LogisticRegression", "LRParams", "FactorizationMachine", "FMParams", "FeatureEncoder",
]
