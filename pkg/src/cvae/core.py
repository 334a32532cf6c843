"""Encoding, reconstruction likelihood, anomaly scores and the ELBO objective."""

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from joblib import Parallel, delayed

from src.common.errors import EmptyInput, ShapeMismatch
from src.common.models import HyperParams
from src.common.utils.io import read_csv, write_csv
from src.common.utils.logger import logger
from src.cvae.context import ContextBuilder
from src.cvae.models import Batch, ContextVector, LatentPosterior, ScoreRecord
from src.cvae.network import DTYPE, ContextAwareVAE, kl_to_standard_normal
from src.preprocess import TokenSequence

SCORE_COLUMNS = ["subtraj_id", "agent_id", "recon_loglik", "score"]
SCORE_CHUNK = 256
MODEL_DIMS = ("d_tok", "d_agent", "d_ctx", "d_hid", "d_z")


def _single(
    seq: TokenSequence, c: ContextVector, p: ContextAwareVAE
) -> tuple[torch.Tensor, torch.Tensor, ContextVector]:
    if not 2 <= len(seq.tokens) <= p.hp.w_max:
        raise ShapeMismatch(f"sequence length {len(seq.tokens)} outside [2, {p.hp.w_max}]")
    tokens = torch.tensor([seq.tokens], dtype=torch.long)
    lengths = torch.tensor([len(seq.tokens)], dtype=torch.long)
    return tokens, lengths, c.reshape(1, -1)


def encode(seq: TokenSequence, c: ContextVector, p: ContextAwareVAE) -> LatentPosterior:
    tokens, lengths, cb = _single(seq, c, p)
    post = p.encode(tokens, lengths, cb)
    return LatentPosterior(mu=post.mu[0], logvar=post.logvar[0])


def reparameterize(post: LatentPosterior, eps: torch.Tensor) -> torch.Tensor:
    """z = mu + exp(logvar / 2) * eps, differentiable in mu and logvar."""
    return post.mu + post.std * eps


def decode_loglik(
    seq: TokenSequence,
    c: ContextVector,
    z: torch.Tensor,
    p: ContextAwareVAE,
    length_normalize: bool | None = None,
) -> float:
    tokens, lengths, cb = _single(seq, c, p)
    normalize = p.hp.length_normalize if length_normalize is None else length_normalize
    with torch.no_grad():
        return float(p.decode_loglik(tokens, lengths, cb, z.reshape(1, -1), normalize)[0])


def _mc_loglik(p: ContextAwareVAE, batch: Batch, c: ContextVector, eps: torch.Tensor) -> torch.Tensor:
    """Mean decode log-likelihood over eps[:, b] draws for every row b; eps is (L, B, d_z)."""
    n_samples, size = eps.shape[0], len(batch)
    post = p.encode(batch.tokens, batch.lengths, c)
    z = (post.mu[None] + post.std[None] * eps).reshape(n_samples * size, -1)
    loglik = p.decode_loglik(
        batch.tokens.repeat(n_samples, 1),
        batch.lengths.repeat(n_samples),
        c.repeat(n_samples, 1),
        z,
        p.hp.length_normalize,
    )
    return loglik.reshape(n_samples, size).mean(dim=0)


def recon_loglik_mc(
    seq: TokenSequence,
    c: ContextVector,
    p: ContextAwareVAE,
    n_samples: int,
    rng: torch.Generator,
) -> float:
    """Monte-Carlo estimate of E_q[log p(x | z, c)] from `n_samples` reparameterized draws."""
    if n_samples < 1:
        raise ValueError("need at least one Monte-Carlo sample")
    tokens, lengths, cb = _single(seq, c, p)
    eps = torch.randn(n_samples, 1, p.hp.d_z, generator=rng, dtype=DTYPE)
    batch = Batch(tokens=tokens, lengths=lengths, agent_idx=torch.zeros(1, dtype=torch.long), poi=cb)
    with torch.no_grad():
        return float(_mc_loglik(p, batch, cb, eps)[0])


def anomaly_score(
    seq: TokenSequence,
    c: ContextVector,
    p: ContextAwareVAE,
    n_samples: int,
    rng: torch.Generator,
) -> ScoreRecord:
    recon = recon_loglik_mc(seq, c, p, n_samples, rng)
    return ScoreRecord.from_loglik(seq.subtraj_id, seq.agent_id, recon)


def elbo_terms(
    batch: Batch, p: ContextAwareVAE, rng: torch.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """One-sample reconstruction log-likelihood and closed-form KL, both (B,)."""
    c = p.context(batch.agent_idx, batch.poi)
    post = p.encode(batch.tokens, batch.lengths, c)
    eps = torch.randn(post.mu.shape, generator=rng, dtype=DTYPE)
    recon = p.decode_loglik(batch.tokens, batch.lengths, c, reparameterize(post, eps), p.hp.length_normalize)
    return recon, kl_to_standard_normal(post)


def elbo_loss(
    batch: Batch,
    p: ContextAwareVAE,
    hp: HyperParams | None,
    rng: torch.Generator,
) -> tuple[float, dict[str, torch.Tensor]]:
    """Negative ELBO averaged over the batch, with gradients for every parameter.

    The returned gradients are the parameters' `.grad` tensors; they stay valid until the next
    backward pass on `p`.

    Raises:
        EmptyInput: if the batch is empty.
    """
    if len(batch) == 0:
        raise EmptyInput("ELBO of an empty batch")
    if hp is not None and any(getattr(hp, k) != getattr(p.hp, k) for k in MODEL_DIMS):
        raise ShapeMismatch("hyperparameter dimensions differ from the ones the model was built with")
    p.zero_grad(set_to_none=False)
    recon, kl = elbo_terms(batch, p, rng)
    loss = (kl - recon).mean()
    loss.backward()
    grads = {name: param.grad for name, param in p.named_parameters() if param.grad is not None}
    return float(loss.detach()), grads


def sequence_generator(seed: int, subtraj_id: int) -> torch.Generator:
    """Scoring noise for one sequence, independent of batching and thread count."""
    derived = np.random.SeedSequence([seed, subtraj_id]).generate_state(1, dtype=np.uint64)[0]
    return torch.Generator().manual_seed(int(derived))


def _score_chunk(
    p: ContextAwareVAE,
    seqs: Sequence[TokenSequence],
    builder: ContextBuilder,
    n_samples: int,
    seed: int,
) -> list[ScoreRecord]:
    batch = builder.batch(seqs)
    eps = torch.stack(
        [
            torch.randn(n_samples, p.hp.d_z, generator=sequence_generator(seed, s.subtraj_id), dtype=DTYPE)
            for s in seqs
        ],
        dim=1,
    )
    with torch.no_grad():
        c = p.context(batch.agent_idx, batch.poi)
        recon = _mc_loglik(p, batch, c, eps)
    return [
        ScoreRecord.from_loglik(s.subtraj_id, s.agent_id, float(r))
        for s, r in zip(seqs, recon.tolist(), strict=True)
    ]


def score_sequences(
    p: ContextAwareVAE,
    seqs: Sequence[TokenSequence],
    builder: ContextBuilder,
    n_samples: int | None = None,
    seed: int | None = None,
    threads: int = 1,
) -> list[ScoreRecord]:
    """Anomaly scores for `seqs`, in input order.

    Each sequence draws its noise from `sequence_generator(seed, subtraj_id)`, so results agree
    with `anomaly_score` on that generator and do not depend on `threads`.
    """
    n_samples = n_samples if n_samples is not None else p.hp.mc_samples
    seed = seed if seed is not None else p.hp.seed
    p.eval()
    chunks = [seqs[i : i + SCORE_CHUNK] for i in range(0, len(seqs), SCORE_CHUNK)]
    results: list[list[ScoreRecord]] = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_score_chunk)(p, chunk, builder, n_samples, seed) for chunk in chunks
    )
    records = [r for chunk in results for r in chunk]
    logger.info("Scored %d sequences (L=%d, %d threads)", len(records), n_samples, threads)
    return records


def write_scores(path: str | Path, records: Sequence[ScoreRecord]) -> None:
    frame = pd.DataFrame([r.model_dump() for r in records], columns=SCORE_COLUMNS)
    write_csv(path, frame)


def read_scores(path: str | Path) -> list[ScoreRecord]:
    frame = read_csv(path, SCORE_COLUMNS, dtype={"agent_id": str})
    return [
        ScoreRecord.from_loglik(int(row.subtraj_id), str(row.agent_id), float(row.recon_loglik))
        for row in frame.itertuples(index=False)
    ]
