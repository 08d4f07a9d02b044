from __future__ import annotations

import numpy as np
from sklearn.decomposition import PCA
from sklearn.manifold import TSNE
from sklearn.neighbors import KNeighborsClassifier
from sklearn.svm import SVC


def probe_accuracy(train_reps, train_labels, test_reps, test_labels, kind: str = "knn5") -> float:
    """Test accuracy of a linear SVM or a 5-NN classifier fit on frozen representations."""
    train_reps = np.asarray(train_reps, dtype=np.float64).reshape(len(train_reps), -1)
    test_reps = np.asarray(test_reps, dtype=np.float64).reshape(len(test_reps), -1)
    if len(np.unique(train_labels)) < 2:
        raise ValueError("probe needs at least two classes in the train split")
    if kind == "svm_linear":
        clf = SVC(kernel="linear")
    elif kind == "knn5":
        clf = KNeighborsClassifier(n_neighbors=min(5, len(train_reps)))
    else:
        raise ValueError(f"unknown probe {kind!r}")
    clf.fit(train_reps, train_labels)
    return float((clf.predict(test_reps) == np.asarray(test_labels)).mean())


def inception_score(class_probs, eps: float = 1e-12) -> float:
    """exp(E_x KL(p(y|x) || p(y)))."""
    p = np.asarray(class_probs, dtype=np.float64)
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("rows of class_probs must sum to 1")
    marginal = p.mean(axis=0, keepdims=True)
    kl = (p * (np.log(p + eps) - np.log(marginal + eps))).sum(axis=1)
    return float(np.exp(kl.mean()))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def fid(features_real, features_gen, eps: float = 0.0) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    The cross term uses tr((S_r^1/2 S_g S_r^1/2)^1/2), which equals
    tr((S_r S_g)^1/2) but stays symmetric positive semi-definite.
    """
    a = np.asarray(features_real, dtype=np.float64)
    b = np.asarray(features_gen, dtype=np.float64)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("non-finite features")
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    mu_a, mu_b = a.mean(0), b.mean(0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))
    if eps:
        cov_a = cov_a + eps * np.eye(len(cov_a))
        cov_b = cov_b + eps * np.eye(len(cov_b))
    root_a = _psd_sqrt(cov_a)
    cross = _psd_sqrt(root_a @ cov_b @ root_a)
    value = float(((mu_a - mu_b) ** 2).sum() + np.trace(cov_a) + np.trace(cov_b) - 2 * np.trace(cross))
    return max(value, 0.0)


def embed_2d(representations, method: str = "pca", seed: int = 0) -> np.ndarray:
    x = np.asarray(representations, dtype=np.float64)
    x = x.reshape(len(x), -1)
    if len(x) < 3:
        raise ValueError("need at least 3 points to embed")
    if method == "pca":
        return PCA(n_components=2, random_state=seed).fit_transform(x)
    if method == "tsne":
        perplexity = min(30.0, (len(x) - 1) / 3)
        return TSNE(n_components=2, perplexity=perplexity, init="pca", random_state=seed).fit_transform(x)
    raise ValueError(f"unknown embedding method {method!r}")
