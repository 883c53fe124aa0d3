"""JSON documents for strategies, following the assembly document layout.

Labels and instrument outcomes may be tuples; JSON turns them into lists,
so lists are read back as tuples. Only scalar ``meta`` entries survive.
"""

from __future__ import annotations

import json

from ..povm import GSpec, assembly_from_dict, assembly_to_dict, matrix_from_json, matrix_to_json
from .core import Instrument, Strategy, StrategyError


def _label_out(x):
    return [_label_out(v) for v in x] if isinstance(x, tuple) else x


def _label_in(x):
    return tuple(_label_in(v) for v in x) if isinstance(x, list) else x


def _scalar(v) -> bool:
    return isinstance(v, (str, int, float, bool)) or v is None


def strategy_to_dict(s: Strategy) -> dict:
    inst = s.instrument
    entries = []
    for y in range(s.n):
        for c in inst.outcomes:
            ops = s.conditional_povms[(y, c)]
            entries.append({
                "y": y,
                "c": _label_out(c),
                "povm": {"labels": [_label_out(b) for b in ops],
                         "effects": [matrix_to_json(m) for m in ops.values()]},
                "response": [[_label_out(b), float(p)] for b, p in s.response.get((y, c), {}).items()],
                "guess": _label_out(s.guess[(y, c)]) if (y, c) in s.guess else None,
            })
    target = None
    if s.target is not None:
        a_ideal, eta, case, nu = s.target
        if isinstance(case, GSpec):
            case = {"guessable": [[_label_out(b) for b in sorted(sub, key=repr)] for sub in case.subsets]}
        target = {"assembly": assembly_to_dict(a_ideal), "eta": float(eta), "case": case,
                  "nu_vis": float(nu)}
    return {
        "n": s.n,
        "labels": [[_label_out(b) for b in lab] for lab in s.labels],
        "instrument": {"outcomes": [_label_out(c) for c in inst.outcomes],
                       "kraus": [[matrix_to_json(k) for k in ks] for ks in inst.kraus_sets]},
        "entries": entries,
        "target": target,
        "meta": {k: v for k, v in s.meta.items() if _scalar(v)},
    }


def strategy_from_dict(doc: dict) -> Strategy:
    try:
        inst_doc = doc["instrument"]
        inst = Instrument([_label_in(c) for c in inst_doc["outcomes"]],
                          [[matrix_from_json(k) for k in ks] for ks in inst_doc["kraus"]])
        cond, resp, guess = {}, {}, {}
        for e in doc["entries"]:
            key = (int(e["y"]), _label_in(e["c"]))
            labels = [_label_in(b) for b in e["povm"]["labels"]]
            cond[key] = dict(zip(labels, (matrix_from_json(m) for m in e["povm"]["effects"])))
            if e["response"]:
                resp[key] = {_label_in(b): float(p) for b, p in e["response"]}
            if e["guess"] is not None:
                guess[key] = _label_in(e["guess"])
        target = doc.get("target")
        if target is not None:
            case = target["case"]
            if isinstance(case, dict):
                case = GSpec([[_label_in(b) for b in sub] for sub in case["guessable"]])
            target = (assembly_from_dict(target["assembly"]), float(target["eta"]), case,
                      float(target["nu_vis"]))
        return Strategy(inst, cond, resp, guess, int(doc["n"]),
                        tuple(tuple(_label_in(b) for b in lab) for lab in doc["labels"]),
                        target, dict(doc.get("meta", {})))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, StrategyError):
            raise
        raise StrategyError(f"malformed strategy document: {exc!r}") from None


def dumps_strategy(s: Strategy, **kwargs) -> str:
    return json.dumps(strategy_to_dict(s), ensure_ascii=False, **kwargs)


def loads_strategy(text: str) -> Strategy:
    return strategy_from_dict(json.loads(text))
