"""Versioned JSON model files.

A file stores hyperparameters, design indices and the training rows those
indices reference (in coded units); factorizations are rebuilt on load.
"""

import logging
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from ..errors import ModelFormatError
from ..gp.core import fit_gp
from ..gp.kernel import InputCoding, Nugget
from ..lagp.local_expert import LocalExpert
from ..storage.files import PathLike, atomic_write
from .model import PalmModel
from .two_stage import GlobalPlusPalmModel

logger = logging.getLogger(__name__)

FORMAT_NAME = "palm-model"
FORMAT_VERSION = 2

AnyModel = Union[PalmModel, GlobalPlusPalmModel]


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RowStore(_Record):
    """Training rows referenced by any design, keyed by global index"""

    indices: List[int]
    inputs: List[List[float]]
    responses: List[float]


class ExpertRecord(_Record):
    center: List[float]
    design_indices: List[int]
    theta: List[float]
    mse: float
    mean: float
    provisional_tau2: float
    provisional_eta: float


class PalmRecord(_Record):
    coding_lo: List[float]
    coding_hi: List[float]
    tau2: float
    eta: float
    eta_is_jitter: bool
    power_p: float
    s2: float
    rho: List[List[float]]
    theta_cap: List[float]
    theta_start: float
    center_modes: List[str]
    experts: List[ExpertRecord]
    rows: RowStore


class GlobalRecord(_Record):
    indices: List[int]
    inputs: List[List[float]]
    responses: List[float]
    theta: List[float]
    mean: float
    tau2: float
    eta: float
    additive_variance: bool


class ModelFile(_Record):
    format: Literal["palm-model"] = FORMAT_NAME
    version: int = FORMAT_VERSION
    kind: Literal["palm", "global+palm"]
    palm: PalmRecord
    global_stage: Optional[GlobalRecord] = None


def _palm_record(m: PalmModel) -> PalmRecord:
    rows: Dict[int, tuple] = {}
    for e in m.experts:
        for pos, idx in enumerate(e.design_indices):
            rows.setdefault(int(idx), (e.fit.design[pos], e.fit.responses[pos]))
    indices = sorted(rows)
    return PalmRecord(
        coding_lo=m.coding.lo.tolist(),
        coding_hi=m.coding.hi.tolist(),
        tau2=m.tau2,
        eta=m.nugget.eta,
        eta_is_jitter=m.nugget.is_jitter,
        power_p=m.power_p,
        s2=m.s2,
        rho=m.rho.tolist(),
        theta_cap=m.theta_cap.tolist(),
        theta_start=m.theta_start,
        center_modes=list(m.center_modes),
        experts=[
            ExpertRecord(
                center=e.center.tolist(),
                design_indices=[int(i) for i in e.design_indices],
                theta=e.fit.theta.tolist(),
                mse=e.mse,
                mean=e.fit.mean,
                provisional_tau2=e.provisional_fit.tau2,
                provisional_eta=e.provisional_fit.eta,
            )
            for e in m.experts
        ],
        rows=RowStore(
            indices=indices,
            inputs=[rows[i][0].tolist() for i in indices],
            responses=[float(rows[i][1]) for i in indices],
        ),
    )


def to_record(model: AnyModel) -> ModelFile:
    if isinstance(model, GlobalPlusPalmModel):
        g = model.global_fit
        return ModelFile(
            kind="global+palm",
            palm=_palm_record(model.palm),
            global_stage=GlobalRecord(
                indices=[int(i) for i in model.global_indices],
                inputs=g.design.tolist(),
                responses=g.responses.tolist(),
                theta=g.theta.tolist(),
                mean=g.mean,
                tau2=g.tau2,
                eta=g.eta,
                additive_variance=model.additive_variance,
            ),
        )
    return ModelFile(kind="palm", palm=_palm_record(model))


def _palm_from_record(rec: PalmRecord) -> PalmModel:
    lookup = {idx: pos for pos, idx in enumerate(rec.rows.indices)}
    inputs = np.asarray(rec.rows.inputs, dtype=float)
    responses = np.asarray(rec.rows.responses, dtype=float)
    experts = []
    for er in rec.experts:
        try:
            positions = [lookup[i] for i in er.design_indices]
        except KeyError as e:
            raise ModelFormatError(f"Design index {e} has no stored training row") from e
        Xd, yd, theta = inputs[positions], responses[positions], np.asarray(er.theta)
        fit = fit_gp(Xd, yd, theta, rec.tau2, rec.eta, mean=er.mean)
        provisional = fit_gp(Xd, yd, theta, er.provisional_tau2, er.provisional_eta, mean=er.mean)
        experts.append(
            LocalExpert(
                center=np.asarray(er.center, dtype=float),
                design_indices=np.asarray(er.design_indices, dtype=int),
                fit=fit,
                mse=er.mse,
                provisional=provisional,
            )
        )
    nugget = Nugget(rec.eta, is_jitter=rec.eta_is_jitter)
    return PalmModel(
        experts=tuple(experts),
        rho=np.asarray(rec.rho, dtype=float),
        tau2=rec.tau2,
        nugget=nugget,
        power_p=rec.power_p,
        s2=rec.s2,
        coding=InputCoding(lo=np.asarray(rec.coding_lo), hi=np.asarray(rec.coding_hi)),
        theta_cap=np.asarray(rec.theta_cap, dtype=float),
        theta_start=rec.theta_start,
        center_modes=tuple(rec.center_modes),
    )


def from_record(record: ModelFile) -> AnyModel:
    if record.version != FORMAT_VERSION:
        raise ModelFormatError(f"Unsupported model file version {record.version}")
    palm = _palm_from_record(record.palm)
    if record.kind == "palm":
        return palm
    g = record.global_stage
    if g is None:
        raise ModelFormatError("global+palm model file is missing its global stage")
    global_fit = fit_gp(
        np.asarray(g.inputs), np.asarray(g.responses), np.asarray(g.theta), g.tau2, g.eta, mean=g.mean
    )
    return GlobalPlusPalmModel(
        global_fit=global_fit,
        global_indices=np.asarray(g.indices, dtype=int),
        palm=palm,
        additive_variance=g.additive_variance,
    )


def model_json(model: AnyModel) -> str:
    return to_record(model).model_dump_json(indent=1)


def save_model(model: AnyModel, path: PathLike) -> None:
    record = to_record(model)
    with atomic_write(path) as f:
        f.write(record.model_dump_json(indent=1))
    logger.info(f"Saved {record.kind} model with {len(record.palm.experts)} experts to {path}")


def load_model(path: PathLike) -> AnyModel:
    try:
        with open(path, "r", encoding="utf-8") as f:
            record = ModelFile.model_validate_json(f.read())
    except FileNotFoundError as e:
        raise ModelFormatError(f"Model file not found: {path}") from e
    except ValidationError as e:
        raise ModelFormatError(f"Malformed model file {path}: {e}") from e
    return from_record(record)
