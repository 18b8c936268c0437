"""Tiny recurrent language model backing propose, loglik, and complete.

The model is intentionally small (word-level vocabulary, two GRU layers)
and is created with a seeded random initialization or loaded from a saved
artifact directory. Text is serialized as one line per field: the goal,
the optional condition, the optional initial-plan steps, then the plan
steps so far; each line ends with an end-of-line token and plans end with
a dedicated end-of-plan token. Step log-probabilities are computed from
one causal forward pass, so a proposed candidate's log mass equals the
likelihood delta of appending it.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import torch
from torch import nn

from .artifacts import read_manifest, write_artifact
from .vocab import EOL, EOP, Vocab, tokenize

EMBED_DIM = 32
HIDDEN_DIM = 64
LAYERS = 2
MAX_STEP_TOKENS = 12

torch.set_num_threads(1)

_SEED_MASK = (1 << 63) - 1


def _fold_seed(*parts: int) -> int:
    """Combine seed parts into the signed 64-bit range torch accepts."""
    value = 0
    for part in parts:
        value = (value * 1_000_003 + int(part)) & _SEED_MASK
    return value


class TinyLM(nn.Module):
    def __init__(self, vocab_size: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, EMBED_DIM)
        self.rnn = nn.GRU(EMBED_DIM, HIDDEN_DIM, num_layers=LAYERS, batch_first=True)
        self.head = nn.Linear(HIDDEN_DIM, vocab_size)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        hidden, _ = self.rnn(self.embed(ids))
        return self.head(hidden)


class StudentModel:
    """Inference wrapper; all public methods are pure given their inputs."""

    def __init__(self, model: TinyLM, vocab: Vocab, deterministic: bool = False):
        self.model = model.eval()
        self.vocab = vocab
        self.deterministic = deterministic
        self._banned_always = torch.tensor([vocab.pad, vocab.unk, vocab.bos])

    @classmethod
    def builtin(cls, seed: int = 0, deterministic: bool = False) -> "StudentModel":
        vocab = Vocab()
        generator = torch.Generator().manual_seed(seed)
        model = TinyLM(len(vocab))
        with torch.no_grad():
            for parameter in model.parameters():
                parameter.copy_(torch.empty_like(parameter).normal_(0, 0.35, generator=generator))
        return cls(model, vocab, deterministic)

    @classmethod
    def load(cls, directory: str | Path, deterministic: bool = False) -> "StudentModel":
        manifest = read_manifest(directory)
        if manifest["kind"] != "student":
            raise ValueError(f"artifact at {directory} is not a student model")
        vocab = Vocab.load(Path(directory) / "vocab.json")
        model = TinyLM(len(vocab))
        state = torch.load(Path(directory) / "weights.pt", map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        return cls(model, vocab, deterministic)

    def save(self, directory: str | Path, meta: dict | None = None) -> Path:
        buffer = io.BytesIO()
        torch.save(self.model.state_dict(), buffer)
        files = {
            "weights.pt": buffer.getvalue(),
            "vocab.json": json.dumps(self.vocab.tokens).encode("utf-8"),
        }
        return write_artifact(directory, "student", files, meta or {})

    # --- encoding -----------------------------------------------------

    def context_ids(
        self,
        goal: str,
        condition: str | None = None,
        initial_plan: list[str] | None = None,
        prefix_steps: list[str] | None = None,
    ) -> list[int]:
        ids = [self.vocab.bos] + self.vocab.encode_words(goal) + [self.vocab.eol]
        if condition:
            ids += self.vocab.encode_words(condition) + [self.vocab.eol]
        for step in initial_plan or []:
            ids += self.vocab.encode_words(step) + [self.vocab.eol]
        for step in prefix_steps or []:
            ids += self.vocab.encode_words(step) + [self.vocab.eol]
        return ids

    def step_ids(self, text: str) -> list[int]:
        return self.vocab.encode_words(text) + [self.vocab.eol]

    # --- scoring ------------------------------------------------------

    @torch.no_grad()
    def _token_logprobs(self, ids: list[int]) -> torch.Tensor:
        """Log-probability of ids[i] given ids[:i], for i >= 1."""
        tensor = torch.tensor([ids], dtype=torch.long)
        logits = self.model(tensor)[0]
        logprobs = torch.log_softmax(logits, dim=-1)
        targets = tensor[0, 1:]
        return logprobs[:-1].gather(1, targets.unsqueeze(1)).squeeze(1)

    def score_steps(self, context: list[int], steps: list[str]) -> list[float]:
        """Per-step log-probability sums for steps appended after context."""
        ids = list(context)
        spans = []
        for step in steps:
            step_tokens = self.step_ids(step)
            spans.append((len(ids), len(ids) + len(step_tokens)))
            ids += step_tokens
        if not steps:
            return []
        per_token = self._token_logprobs(ids)
        # per_token[i] scores ids[i + 1]; a span [a, b) over ids maps to
        # per_token indices [a - 1, b - 1).
        return [float(per_token[a - 1 : b - 1].sum()) for a, b in spans]

    def loglik(self, context: list[int], steps: list[str]) -> tuple[float, int]:
        sums = self.score_steps(context, steps)
        tokens = sum(len(self.step_ids(step)) for step in steps)
        return float(sum(sums)), tokens

    @torch.no_grad()
    def end_of_plan_logprob(self, context: list[int]) -> float:
        tensor = torch.tensor([context], dtype=torch.long)
        logits = self.model(tensor)[0, -1]
        return float(torch.log_softmax(logits, dim=-1)[self.vocab.eop])

    # --- generation ---------------------------------------------------

    @torch.no_grad()
    def _generate_one(
        self,
        context: list[int],
        mode: str,
        top_p: float,
        temperature: float,
        seed: int,
        forced_first: int | None = None,
    ) -> tuple[list[int], bool]:
        """One candidate: (generated ids without terminators, is_terminal)."""
        generator = torch.Generator().manual_seed(_fold_seed(seed))
        ids = list(context)
        generated: list[int] = []
        for position in range(MAX_STEP_TOKENS + 1):
            if position == 0 and forced_first is not None:
                token = forced_first
            else:
                tensor = torch.tensor([ids], dtype=torch.long)
                logits = self.model(tensor)[0, -1].clone()
                logits[self._banned_always] = -torch.inf
                if position == 0:
                    logits[self.vocab.eol] = -torch.inf
                else:
                    logits[self.vocab.eop] = -torch.inf
                if mode == "greedy" or self.deterministic:
                    token = int(torch.argmax(logits))
                else:
                    token = self._sample_nucleus(logits, top_p, temperature, generator)
            if position == 0 and token == self.vocab.eop:
                return [], True
            if token == self.vocab.eol:
                return generated, False
            generated.append(token)
            ids.append(token)
        return generated, False

    def _sample_nucleus(
        self, logits: torch.Tensor, top_p: float, temperature: float, generator
    ) -> int:
        probs = torch.softmax(logits / max(temperature, 1e-6), dim=-1)
        sorted_probs, order = torch.sort(probs, descending=True)
        cumulative = torch.cumsum(sorted_probs, dim=-1)
        keep = int(torch.searchsorted(cumulative, torch.tensor(top_p)).item()) + 1
        kept = sorted_probs[:keep] / sorted_probs[:keep].sum()
        choice = int(torch.multinomial(kept, 1, generator=generator).item())
        return int(order[choice])

    def propose(
        self,
        context: list[int],
        prefix_steps: list[str],
        n: int,
        kind: str,
        top_p: float | None,
        temperature: float | None,
        seed: int,
    ) -> list[dict]:
        """Up to n unique candidates in wire format."""
        full_context = list(context)
        for step in prefix_steps:
            full_context += self.step_ids(step)
        candidates: list[dict] = []
        seen: set[str] = set()

        def add(generated: list[int], terminal: bool) -> None:
            if terminal:
                if "" in seen:
                    return
                seen.add("")
                candidates.append(
                    {
                        "text": "",
                        "logprob_sum": min(self.end_of_plan_logprob(full_context), 0.0),
                        "token_count": 1,
                        "terminal": True,
                    }
                )
                return
            text = self.vocab.decode_words(generated)
            if not text or text in seen:
                return
            seen.add(text)
            with_candidate = self.score_steps(context, list(prefix_steps) + [text])
            logprob = with_candidate[-1]
            candidates.append(
                {
                    "text": text,
                    "logprob_sum": min(logprob, 0.0),
                    "token_count": len(self.step_ids(text)),
                    "terminal": False,
                }
            )

        if kind in ("greedy", "beam") or self.deterministic:
            # Diversify on the first token, then continue greedily.
            tensor = torch.tensor([full_context], dtype=torch.long)
            with torch.no_grad():
                logits = self.model(tensor)[0, -1].clone()
            logits[self._banned_always] = -torch.inf
            logits[self.vocab.eol] = -torch.inf
            top = torch.topk(logits, min(n, logits.numel()))
            first_tokens = [
                int(i) for i, v in zip(top.indices, top.values) if torch.isfinite(v)
            ]
            for first in first_tokens:
                generated, terminal = self._generate_one(
                    full_context, "greedy", 1.0, 1.0, seed, forced_first=int(first)
                )
                add(generated, terminal)
        else:
            for i in range(n):
                generated, terminal = self._generate_one(
                    full_context,
                    "nucleus",
                    top_p if top_p is not None else 0.9,
                    temperature if temperature is not None else 1.0,
                    _fold_seed(seed, i),
                )
                add(generated, terminal)
        return candidates[:n]

    @torch.no_grad()
    def complete(self, prompt: str, max_tokens: int, top_p: float, temperature: float, seed: int) -> str:
        context = [self.vocab.bos] + self.vocab.encode_words(prompt) + [self.vocab.eol]
        lines: list[str] = []
        budget = max(1, min(max_tokens, 200))
        for line_index in range(1, 50):
            if budget <= 0:
                break
            mode = "greedy" if self.deterministic else "nucleus"
            generated, terminal = self._generate_one(
                context, mode, top_p, temperature, _fold_seed(seed, 7_919, line_index)
            )
            if terminal or not generated:
                break
            budget -= len(generated) + 1
            lines.append(f"Step {line_index}: {self.vocab.decode_words(generated)}")
            context = context + generated + [self.vocab.eol]
        return "\n".join(lines)
