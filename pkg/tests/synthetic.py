"""Synthetic data generators used by the test suite."""

import random

import numpy as np

from medlit.corpus import TokenLabel
from medlit.frames import FramePrediction

HIDDEN_LEXICON = [
    "insulin", "metformin", "glucagon", "neuropathy", "retinopathy", "nephropathy", "ketoacidosis",
    "hyperglycemia", "hypoglycemia", "gastroparesis", "sulfonylurea", "pioglitazone", "sitagliptin",
    "empagliflozin", "liraglutide", "acarbose", "glipizide", "glyburide", "dapagliflozin", "exenatide",
    "polyuria", "polydipsia", "microalbuminuria", "dyslipidemia", "hypertension", "angiopathy",
    "glucosuria", "hemoglobin", "pancreatitis", "lipohypertrophy",
]
FILLERS = [
    "breakfast", "music", "garden", "weekend", "coffee", "friends", "movies", "sunshine", "dogs",
    "pizza", "traffic", "holidays", "shoes", "gym", "books", "rain", "camera", "kitchen", "beach",
    "cookies", "bicycle", "laptop", "weather", "party", "cats", "concert", "jacket", "soccer",
    "painting", "vacation",
]
TEMPLATES = [
    "my doctor said {T} could help with my {F}",
    "i love {F} but i worry about {T}",
    "the nurse explained how {T} affects {T} in older adults",
    "we talked about {F} and {F} all afternoon",
    "taking {T} every day changed my {F}",
    "she never mentioned {T} during our {F} trip",
    "ask your pharmacist whether {T} is safe with {T}",
    "nothing beats {F} on a sunny {F}",
    "untreated {T} may lead to {T} later",
    "his {F} reminded me to check for {T}",
]


def template_corpus(n_sentences=200, seed=0):
    """Token lists and gold labels; MT exactly at term slots."""
    rng = random.Random(seed)
    X, y = [], []
    for _ in range(n_sentences):
        tokens, labels = [], []
        for word in rng.choice(TEMPLATES).split():
            if word == "{T}":
                tokens.append(rng.choice(HIDDEN_LEXICON))
                labels.append(TokenLabel.MT)
            elif word == "{F}":
                tokens.append(rng.choice(FILLERS))
                labels.append(TokenLabel.NA)
            else:
                tokens.append(word)
                labels.append(TokenLabel.NA)
        X.append(tokens)
        y.append(labels)
    return X, y


def memorization_fixture():
    """Five short annotated sentences."""
    rows = [
        ("insulin lowers blood sugar", "MT NA MT MT"),
        ("watch our video about metformin", "NA NA NA NA MT"),
        ("thanks for watching", "NA NA NA"),
        ("neuropathy affects the feet", "MT NA NA NA"),
        ("check your a1c with your doctor", "NA NA MT NA NA NA"),
    ]
    return [s.split() for s, _ in rows], [[TokenLabel(t) for t in lab.split()] for _, lab in rows]


def separable_points(n=40, seed=0, margin=0.5):
    """Two linearly separable classes in 3-D with a guaranteed margin."""
    rng = np.random.default_rng(seed)
    w = np.array([1.0, -2.0, 0.5])
    X, y = [], []
    while len(X) < n:
        x = rng.normal(0, 3, size=3)
        s = x @ w / np.linalg.norm(w)
        if abs(s) < margin:
            continue
        X.append(x)
        y.append("high" if s > 0 else "low")
    return np.array(X), y


def random_frames(rng, video_id="v", n_frames=None, categories=None):
    categories = categories or ["syringe", "stethoscope", "pizza", "desk", "pill bottle", "cat", "plate"]
    n_frames = rng.integers(0, 12) if n_frames is None else n_frames
    frames = []
    for i in range(n_frames):
        probs = np.sort(rng.dirichlet(np.ones(6))[:5])[::-1]
        cats = rng.choice(categories, size=5, replace=False)
        frames.append(FramePrediction(video_id, i, tuple(zip(cats.tolist(), probs.tolist()))))
    return frames
