"""Fitted-model JSON documents (format ``ptree-model/1``).

A document stores the fitted tree in preorder (depths, counts, cuts,
children and cell bounds per node), the prior, and the log-evidences.
Loading rebuilds the message tables from the stored tree and prior with
the same code path as fitting, so a loaded model predicts bit for bit
like the in-memory one.  Floats are written as shortest round-trip
decimals; non-finite values are written as strings.
"""

import json
import math

import numpy as np

from .errors import DataParseError, ModelVersionError
from .markov import StateModel
from .multivariate import Expansion, JointPosterior, SplitPrior, message_pass_joint
from .polya import Likelihood

MODEL_VERSION = "ptree-model/1"


def _enc(x):
    if isinstance(x, list):
        return [_enc(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _dec(x):
    if isinstance(x, list):
        return [_dec(v) for v in x]
    if isinstance(x, str):
        return float(x)
    return x


def summary(post: JointPosterior, n_obs=None):
    out = {
        "log_bayes_factor": post.root_log_phi(),
        "dimension": post.dim,
        "mode": post.ex.mode.value,
        "max_depth": post.max_depth,
        **post.stats(),
    }
    out["n"] = int(post.ex.n[0]) if n_obs is None else int(n_obs)
    return out


def model_to_dict(post: JointPosterior):
    ex = post.ex
    return {
        "version": MODEL_VERSION,
        "dimension": ex.dim,
        "mode": ex.mode.value,
        "max_depth": post.max_depth,
        "expansion_depth": ex.max_depth,
        "p": ex.p,
        "leaf_size": ex.leaf_size,
        "prior": {
            "states": post.model.to_dict(),
            "split_weights": [float(v) for v in post.split_prior.lam],
        },
        "summary": summary(post),
        "nodes": {
            "depth": ex.depth.tolist(),
            "n": ex.n.tolist(),
            "lower": ex.lower.tolist(),
            "upper": ex.upper.tolist(),
            "cut": ex.cut.tolist(),
            "counts": ex.cnt.tolist(),
            "children": ex.child.tolist(),
            "log_eta": _enc(post.log_eta.tolist()),
            "log_phi": _enc(post.log_phi.tolist()),
        },
    }


def model_from_dict(doc) -> JointPosterior:
    version = doc.get("version")
    if version != MODEL_VERSION:
        raise ModelVersionError(f"unsupported model version {version!r}")
    d = int(doc["dimension"])
    nd = doc["nodes"]
    N = len(nd["depth"])
    ex = Expansion(
        np.asarray(nd["depth"], dtype=np.int64),
        np.asarray(nd["n"], dtype=np.int64),
        np.asarray(nd["lower"], dtype=float).reshape(N, d),
        np.asarray(nd["upper"], dtype=float).reshape(N, d),
        np.asarray(nd["cut"], dtype=float).reshape(N, d),
        np.asarray(nd["counts"], dtype=np.int64).reshape(N, d, 2),
        np.asarray(nd["children"], dtype=np.int64).reshape(N, d, 2),
        Likelihood(doc["mode"]), int(doc["expansion_depth"]), float(doc["p"]),
        int(doc["leaf_size"]), int(doc["summary"].get("prune_count", 0)),
        int(doc["summary"].get("memo_hits", 0)))
    prior = doc["prior"]
    model = StateModel.from_dict(prior["states"])
    split_prior = SplitPrior(tuple(prior["split_weights"]))
    return message_pass_joint(ex, model, split_prior, int(doc["max_depth"]))


def dumps(post: JointPosterior) -> str:
    return json.dumps(model_to_dict(post), allow_nan=False)


def loads(text) -> JointPosterior:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DataParseError(e.lineno, f"model file is not valid JSON: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ModelVersionError("not a model document")
    return model_from_dict(doc)


def save_model(post: JointPosterior, path):
    with open(path, "w") as fh:
        fh.write(dumps(post))


def load_model(path) -> JointPosterior:
    with open(path) as fh:
        return loads(fh.read())


def stored_log_phi(doc):
    """Per-node log phi table as written in a document."""
    return np.asarray(_dec(doc["nodes"]["log_phi"]), dtype=float)
