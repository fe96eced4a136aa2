from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from rtmtest.model import RTM, Annotation, AnnotationKind, Component, Connector, Lifecycle
from rtmtest.properties import register_predicate

DATA = Path(__file__).resolve().parents[1] / "src" / "rtmtest" / "data"
ONEWAY = DATA / "oneway"

IFACES = [f"I{i}" for i in range(6)]
TYPES = ["Alpha", "Beta", "Gamma", "Delta"]
KINDS = [k for k in AnnotationKind if k is not AnnotationKind.PLANNED_ACTION]


@register_predicate("letter")
def _letter(ctx, x):
    # test alphabet: a snapshot "is" the letter its model id names
    return ctx.model.id == x


@pytest.fixture
def data_dir():
    return DATA


def _subset(rng, pool, p):
    return [x for x in pool if rng.random() < p]


def _component(rng, cid):
    return Component(cid, TYPES[rng.integers(len(TYPES))], list(Lifecycle)[rng.integers(4)],
                     _subset(rng, IFACES, 0.3), _subset(rng, IFACES, 0.3), bool(rng.random() < 0.2))


def _connectors(rng, comps, p=0.6):
    out = []
    for c in comps:
        for iface in sorted(c.required):
            providers = [d for d in comps if iface in d.provided]
            if providers and rng.random() < p:
                to = providers[rng.integers(len(providers))]
                out.append(Connector(f"{c.id}:{iface}", c.id, iface, to.id, iface))
    return out


def _annotations(rng, model_id, ids, n):
    out = []
    for _ in range(n):
        kind = KINDS[rng.integers(len(KINDS))]
        target = ([model_id] + ids)[rng.integers(len(ids) + 1)]
        out.append(Annotation(kind, target, {"k": str(rng.integers(3))}))
    return out


def _metrics(rng, ids, p=0.3):
    return {e: {"m": float(rng.integers(5)), **({"n": 1.5} if rng.random() < 0.5 else {})}
            for e in ids if rng.random() < p}


def random_model(rng, max_components=25, model_id="m"):
    comps = [_component(rng, f"c{i}") for i in range(rng.integers(0, max_components + 1))]
    conns = _connectors(rng, comps)
    ids = [c.id for c in comps] + [c.id for c in conns]
    return RTM(model_id, comps, conns, _annotations(rng, model_id, ids, rng.integers(0, 4)),
               _metrics(rng, ids + [model_id]))


def perturb(rng, model, max_components=25):
    """A second model sharing most element ids with ``model``."""
    comps = []
    for c in model.components.values():
        r = rng.random()
        if r < 0.15:
            continue
        if r < 0.35:
            field = rng.integers(4)
            if field == 0:
                c = c.replace(lifecycle=list(Lifecycle)[rng.integers(4)])
            elif field == 1:
                c = c.replace(type_name=TYPES[rng.integers(len(TYPES))])
            elif field == 2:
                c = c.replace(critical=not c.critical)
            else:
                c = c.replace(provided=frozenset(_subset(rng, IFACES, 0.3)))
        comps.append(c)
    start = len(model.components)
    for i in range(rng.integers(0, 4)):
        if len(comps) < max_components:
            comps.append(_component(rng, f"c{start + i}"))
    by_id = {c.id: c for c in comps}
    kept = [k for k in model.connectors.values()
            if rng.random() < 0.8 and k.from_component in by_id and k.to_component in by_id
            and k.required_interface in by_id[k.from_component].required
            and k.provided_interface in by_id[k.to_component].provided]
    new = [k for k in _connectors(rng, comps, 0.3) if k.id not in {x.id for x in kept}]
    conns = kept + new
    model_id = model.id if rng.random() < 0.9 else model.id + "2"
    ids = set(by_id) | {c.id for c in conns}
    anns = [a for a in model.annotations if a.target in ids and rng.random() < 0.7]
    anns += _annotations(rng, model_id, sorted(ids), rng.integers(0, 3))
    metrics = {}
    for e, vals in model.metrics.items():
        e = model_id if e == model.id else e
        if (e in ids or e == model_id) and rng.random() < 0.8:
            vals = dict(vals)
            if rng.random() < 0.3:
                vals["m"] = float(rng.integers(5))
            metrics[e] = vals
    for e, vals in _metrics(rng, sorted(ids), 0.1).items():
        metrics.setdefault(e, vals)
    return RTM(model_id, comps, conns, anns, metrics)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
