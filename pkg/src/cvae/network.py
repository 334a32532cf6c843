"""The context-aware conditional VAE: token/agent embeddings, GRU encoder and decoder."""

import torch
import torch.nn.functional as F  # noqa: N812
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from src.common.errors import ShapeMismatch
from src.common.models import ContextMode, HyperParams
from src.cvae.models import ContextVector, LatentPosterior

DTYPE = torch.float64
PAD = 0
LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0
EMBEDDING_STD = 0.1


class ContextAwareVAE(nn.Module):
    """All learnable tensors of the conditional VAE.

    Token rows: 0 is padding, 1..V are grid tokens 0..V-1, V+1 is BOS. Agent rows: 0 is the
    unknown agent, 1..n_agents are training agents. Context enters both GRUs at every step and the
    decoder's initial state.
    """

    def __init__(self, hp: HyperParams, vocab_size: int, n_agents: int, poi_dim: int, mode: ContextMode):
        super().__init__()
        self.hp = hp
        self.vocab_size = vocab_size
        self.n_agents = n_agents
        self.poi_dim = poi_dim
        self.mode = mode
        self.bos = vocab_size + 1
        d_in = hp.d_tok + self.d_context

        self.tok_embedding = nn.Embedding(vocab_size + 2, hp.d_tok, padding_idx=PAD, dtype=DTYPE)
        self.agent_embedding = nn.Embedding(n_agents + 1, hp.d_agent, dtype=DTYPE)
        self.ctx_proj = nn.Linear(poi_dim, hp.d_ctx, bias=False, dtype=DTYPE)
        self.encoder = nn.GRU(d_in, hp.d_hid, batch_first=True, dtype=DTYPE)
        self.mu_head = nn.Linear(hp.d_hid, hp.d_z, dtype=DTYPE)
        self.logvar_head = nn.Linear(hp.d_hid, hp.d_z, dtype=DTYPE)
        self.init_head = nn.Linear(hp.d_z + self.d_context, hp.d_hid, bias=False, dtype=DTYPE)
        self.decoder = nn.GRU(d_in, hp.d_hid, batch_first=True, dtype=DTYPE)
        self.out_proj = nn.Linear(hp.d_hid, vocab_size, dtype=DTYPE)

    @property
    def d_context(self) -> int:
        return self.hp.d_agent + self.hp.d_ctx

    @torch.no_grad()
    def reset_parameters(self, generator: torch.Generator) -> None:
        """Xavier-uniform matrices, zero biases, N(0, 0.1^2) embedding rows (padding row stays zero)."""
        for name, param in self.named_parameters():
            if "embedding" in name:
                nn.init.normal_(param, 0.0, EMBEDDING_STD, generator=generator)
            elif param.dim() >= 2:
                nn.init.xavier_uniform_(param, generator=generator)
            else:
                nn.init.zeros_(param)
        self.tok_embedding.weight[PAD].zero_()

    def context(self, agent_idx: torch.Tensor, poi: torch.Tensor) -> ContextVector:
        """(B, d_agent + d_ctx) context; slices a mode does not use are zero."""
        if poi.shape[-1] != self.poi_dim:
            raise ShapeMismatch(f"POI context has {poi.shape[-1]} entries, model expects {self.poi_dim}")
        batch = agent_idx.shape[0]
        if self.mode.uses_agent:
            agent = self.agent_embedding(agent_idx)
        else:
            agent = torch.zeros(batch, self.hp.d_agent, dtype=DTYPE)
        if self.mode.uses_poi:
            place = torch.tanh(self.ctx_proj(poi))
        else:
            place = torch.zeros(batch, self.hp.d_ctx, dtype=DTYPE)
        return torch.cat([agent, place], dim=1)

    def _check(self, tokens: torch.Tensor, c: ContextVector) -> None:
        if c.shape[-1] != self.d_context:
            raise ShapeMismatch(f"context has {c.shape[-1]} entries, model expects {self.d_context}")
        if int(tokens.max()) >= self.vocab_size:
            raise ShapeMismatch(f"token {int(tokens.max())} outside vocabulary of size {self.vocab_size}")

    def _inputs(self, ids: torch.Tensor, c: ContextVector) -> torch.Tensor:
        emb = self.tok_embedding(ids)
        return torch.cat([emb, c[:, None, :].expand(-1, ids.shape[1], -1)], dim=2)

    def encode(self, tokens: torch.Tensor, lengths: torch.Tensor, c: ContextVector) -> LatentPosterior:
        """q(z | x, c) from the encoder state after the last real token."""
        self._check(tokens, c)
        x = self._inputs(tokens + 1, c)  # padding (-1) lands on row 0
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
        _, h = self.encoder(packed)
        h_last = h[-1]
        logvar = torch.clamp(self.logvar_head(h_last), LOGVAR_MIN, LOGVAR_MAX)
        return LatentPosterior(mu=self.mu_head(h_last), logvar=logvar)

    def decode_loglik(
        self,
        tokens: torch.Tensor,
        lengths: torch.Tensor,
        c: ContextVector,
        z: torch.Tensor,
        length_normalize: bool,
    ) -> torch.Tensor:
        """(B,) log p(x | z, c) under teacher forcing, optionally divided by the sequence length."""
        self._check(tokens, c)
        if z.shape[-1] != self.hp.d_z:
            raise ShapeMismatch(f"latent has {z.shape[-1]} entries, model expects {self.hp.d_z}")
        h0 = torch.tanh(self.init_head(torch.cat([z, c], dim=1)))[None]
        bos = torch.full((tokens.shape[0], 1), self.bos, dtype=torch.long)
        prev = torch.cat([bos, tokens[:, :-1] + 1], dim=1)
        out, _ = self.decoder(self._inputs(prev, c), h0)
        logp = F.log_softmax(self.out_proj(out), dim=-1)
        picked = logp.gather(-1, tokens.clamp(min=0)[..., None]).squeeze(-1)
        mask = torch.arange(tokens.shape[1])[None, :] < lengths[:, None]
        loglik = (picked * mask).sum(dim=1)
        if length_normalize:
            loglik = loglik / lengths.to(DTYPE)
        return loglik


def kl_to_standard_normal(post: LatentPosterior) -> torch.Tensor:
    """Closed-form KL(q || N(0, I)) per row."""
    return 0.5 * (torch.exp(post.logvar) + post.mu**2 - 1.0 - post.logvar).sum(dim=-1)
