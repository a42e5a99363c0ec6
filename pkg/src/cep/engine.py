"""Mode dispatch: compile a parsed pattern into runnable automata.

Modes:
  eager    one arrival-order automaton per chain, outputs unioned
  lazy     frequency-ordered chain; multi-chain merge for composites
  lazy-pp  negations checked by a post-processing negative tail
  lazy-fc  negations checked at the earliest dependency state
  multi    force the merged multi-chain form even for a single chain
"""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping, Optional, Sequence

from .eager import build_eager
from .lazy import (ascending_freq_order, build_lazy, build_multi_chain,
                   descending_freq_order)
from .nfa import BuildError, Nfa
from .patterns import ChainPattern, PatternAst, to_dnf
from .runtime import MultiRuntime, Runtime

MODES = ("eager", "lazy", "lazy-pp", "lazy-fc", "multi")


def chain_orders(chain: ChainPattern, rates: Mapping[str, float]) -> list:
    missing = [t for _, t in chain.positives if t not in rates]
    if missing:
        raise BuildError(f"no arrival rate given for types {sorted(missing)}")
    return ascending_freq_order({t: rates[t] for _, t in chain.positives})


def _neg_order(chain: ChainPattern, rates: Optional[Mapping[str, float]]):
    if not chain.negations or rates is None:
        return None
    types = [s.etype for s in chain.negations]
    if any(t not in rates for t in types):
        return None
    return descending_freq_order({t: rates[t] for t in types})


def apply_group_by(chains: Sequence[ChainPattern], role: str,
                   attr: str) -> list:
    out = []
    for chain in chains:
        it = chain.iterated
        if it is None or it.role != role:
            raise BuildError(f"group-by role {role!r} is not an iterated role")
        out.append(replace(chain, iterated=replace(it, group_by=attr)))
    return out


def compile_pattern(
    chains: Sequence[ChainPattern],
    mode: str,
    rates: Optional[Mapping[str, float]] = None,
    orders: Optional[Sequence[Sequence[str]]] = None,
):
    """Build the automata for a mode. ``orders`` (one frequency order per
    chain) overrides rate-derived ordering; eager mode needs neither."""
    if mode not in MODES:
        raise BuildError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "eager":
        return [build_eager(c) for c in chains]

    def order_for(i: int, chain: ChainPattern):
        if orders is not None:
            return list(orders[i])
        if rates is None:
            raise BuildError(f"mode {mode!r} needs --rates or explicit orders")
        return chain_orders(chain, rates)

    variant = "fc" if mode == "lazy-fc" else "pp"
    built = [
        build_lazy(chain, order_for(i, chain), negation=variant,
                   neg_freq=_neg_order(chain, rates))
        for i, chain in enumerate(chains)
    ]
    if mode == "multi" or len(built) > 1:
        return [build_multi_chain(built)]
    return built


def make_runtime(nfas: Sequence[Nfa], paired_buffers: bool = False):
    if len(nfas) == 1:
        return Runtime(nfas[0], paired_buffers=paired_buffers)
    return MultiRuntime(nfas, paired_buffers=paired_buffers)


def build_runtime(ast: PatternAst, mode: str,
                  rates: Optional[Mapping[str, float]] = None,
                  orders: Optional[Sequence[Sequence[str]]] = None,
                  group_by: Optional[tuple] = None,
                  paired_buffers: bool = False):
    chains = to_dnf(ast)
    if group_by is not None:
        chains = apply_group_by(chains, group_by[0], group_by[1])
    nfas = compile_pattern(chains, mode, rates=rates, orders=orders)
    return make_runtime(nfas, paired_buffers=paired_buffers)
