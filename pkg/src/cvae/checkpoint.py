"""
The "cavae-v1" checkpoint format.

Layout: 8-byte little-endian header length, UTF-8 JSON header (sorted keys), then every tensor of
the model's state dict, in header order, as little-endian float64.
"""

import json
import math
from pathlib import Path

import numpy as np
import torch

from src.common.errors import CheckpointVersionError, RecordParseError
from src.common.utils.io import atomic_open
from src.common.utils.logger import logger
from src.cvae.models import CHECKPOINT_VERSION, CheckpointHeader, TensorSpec
from src.cvae.network import ContextAwareVAE

LENGTH_DTYPE = np.dtype("<u8")
TENSOR_DTYPE = np.dtype("<f8")


def save_checkpoint(path: str | Path, model: ContextAwareVAE, agent_table: dict[str, int], seed: int) -> None:
    state = model.state_dict()
    header = CheckpointHeader(
        hyperparams=model.hp,
        vocab_size=model.vocab_size,
        poi_dim=model.poi_dim,
        mode=model.mode,
        seed=seed,
        agent_table=dict(sorted(agent_table.items())),
        tensors=[TensorSpec(name=name, shape=list(t.shape)) for name, t in state.items()],
    )
    blob = json.dumps(header.model_dump(mode="json"), sort_keys=True, separators=(",", ":")).encode("utf-8")
    with atomic_open(path, "wb") as f:
        f.write(np.array([len(blob)], dtype=LENGTH_DTYPE).tobytes())
        f.write(blob)
        for t in state.values():
            f.write(t.detach().cpu().numpy().astype(TENSOR_DTYPE).tobytes())
    logger.info("Wrote checkpoint %s (%d tensors)", path, len(state))


def read_header(path: str | Path) -> CheckpointHeader:
    with open(path, "rb") as f:
        return _read_header(f.read(), path)[0]


def _read_header(raw: bytes, path: str | Path) -> tuple[CheckpointHeader, int]:
    if len(raw) < LENGTH_DTYPE.itemsize:
        raise RecordParseError(str(path), 1, "truncated checkpoint")
    size = int(np.frombuffer(raw[: LENGTH_DTYPE.itemsize], dtype=LENGTH_DTYPE)[0])
    end = LENGTH_DTYPE.itemsize + size
    try:
        data = json.loads(raw[LENGTH_DTYPE.itemsize : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise RecordParseError(str(path), 1, f"bad checkpoint header: {e}") from e
    version = data.get("version") if isinstance(data, dict) else None
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: checkpoint version {version!r}, expected {CHECKPOINT_VERSION!r}"
        )
    return CheckpointHeader.model_validate(data), end


def load_checkpoint(path: str | Path) -> tuple[ContextAwareVAE, CheckpointHeader]:
    """Rebuild the model saved at `path`.

    Raises:
        CheckpointVersionError: if the header's version is not "cavae-v1".
        RecordParseError: if the file is truncated or the header is malformed.
    """
    with open(path, "rb") as f:
        raw = f.read()
    header, offset = _read_header(raw, path)
    model = ContextAwareVAE(
        header.hyperparams,
        header.vocab_size,
        n_agents=len(header.agent_table),
        poi_dim=header.poi_dim,
        mode=header.mode,
    )
    state: dict[str, torch.Tensor] = {}
    for entry in header.tensors:
        count = math.prod(entry.shape)
        nbytes = count * TENSOR_DTYPE.itemsize
        if offset + nbytes > len(raw):
            raise RecordParseError(str(path), 1, f"checkpoint truncated in tensor {entry.name}")
        values = np.frombuffer(raw, dtype=TENSOR_DTYPE, count=count, offset=offset).reshape(entry.shape)
        state[entry.name] = torch.from_numpy(values.astype(np.float64))
        offset += nbytes
    model.load_state_dict(state)
    model.eval()
    return model, header
