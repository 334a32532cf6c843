"""Seeded minibatch training of the conditional VAE."""

import math
from collections.abc import Sequence

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict

from src.common.errors import EmptyInput, NonFiniteLoss
from src.common.models import HyperParams
from src.common.utils.config import get_config
from src.common.utils.logger import logger
from src.cvae.context import ContextBuilder
from src.cvae.core import elbo_loss, elbo_terms
from src.cvae.models import EpochLoss
from src.cvae.network import ContextAwareVAE
from src.preprocess import TokenSequence

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class TrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: ContextAwareVAE
    trace: list[EpochLoss]


def build_model(hp: HyperParams, vocab_size: int, builder: ContextBuilder) -> ContextAwareVAE:
    """Fresh model initialised from `hp.seed`."""
    model = ContextAwareVAE(hp, vocab_size, builder.n_agents, builder.poi_dim, builder.mode)
    model.reset_parameters(torch.Generator().manual_seed(hp.seed))
    return model


def train(
    sequences: Sequence[TokenSequence],
    builder: ContextBuilder,
    vocab_size: int,
    hp: HyperParams | None = None,
) -> TrainResult:
    """Maximise the ELBO with Adam over seeded minibatches.

    Shuffling, initialisation and latent noise all derive from `hp.seed`, so two runs with the
    same inputs produce identical parameters.

    Raises:
        EmptyInput: if there are no training sequences.
        NonFiniteLoss: if a batch loss becomes NaN or infinite.
    """
    hp = hp or get_config().model
    if not sequences:
        raise EmptyInput("no training sequences")

    model = build_model(hp, vocab_size, builder)
    model.train()
    data = builder.batch(sequences)
    optimizer = torch.optim.Adam(model.parameters(), lr=hp.lr, betas=ADAM_BETAS, eps=ADAM_EPS)
    shuffle = np.random.default_rng(hp.seed)
    noise = torch.Generator().manual_seed(hp.seed + 1)

    trace: list[EpochLoss] = []
    n = len(data)
    for epoch in range(1, hp.epochs + 1):
        order = torch.from_numpy(shuffle.permutation(n))
        losses: list[float] = []
        for b, start in enumerate(range(0, n, hp.batch_size)):
            batch = data.select(order[start : start + hp.batch_size])
            loss, _ = elbo_loss(batch, model, hp, noise)
            if not math.isfinite(loss):
                raise NonFiniteLoss(epoch, b, loss)
            optimizer.step()
            losses.append(loss * len(batch))

        with torch.no_grad():
            recon, kl = elbo_terms(data, model, torch.Generator().manual_seed(hp.seed))
        trace.append(
            EpochLoss(
                epoch=epoch,
                loss=sum(losses) / n,
                recon_loglik=float(recon.mean()),
                kl=float(kl.mean()),
            )
        )
        logger.debug("epoch %d: loss %.4f", epoch, trace[-1].loss)
        if epoch == 1 or epoch == hp.epochs or epoch % 10 == 0:
            logger.info(
                "[%s] epoch %d/%d loss %.4f recon %.4f kl %.4f",
                builder.mode.slug,
                epoch,
                hp.epochs,
                trace[-1].loss,
                trace[-1].recon_loglik,
                trace[-1].kl,
            )
    model.eval()
    return TrainResult(model=model, trace=trace)
