"""Randomized differential testing: oracle vs eager vs every lazy variant.

Each case draws a random pattern (sequence/conjunction/partial nesting,
optional negation, iteration, disjunction, predicates), a short random
stream, and a window, then checks that every applicable evaluation mode
produces exactly the oracle's match multiset. On divergence the stream is
greedily shrunk before reporting.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .engine import apply_group_by, compile_pattern, make_runtime
from .events import Event
from .nfa import BuildError
from .oracle import enumerate_matches_chains
from .patterns import parse_pattern, to_dnf
from .runtime import match_key, run_stream

TYPE_POOL = ["A", "B", "C", "D", "E"]
NOISE_TYPE = "Z"


@dataclass
class Divergence:
    pattern: str
    window: int
    events: list
    mode: str
    orders: Optional[list]
    expected: list
    got: list

    def describe(self) -> str:
        lines = [
            f"mode: {self.mode}",
            f"orders: {self.orders}",
            f"pattern:\n{self.pattern}",
            f"window: {self.window}",
            "events:",
        ]
        for e in self.events:
            lines.append(f"  {e.etype}@{e.ts}#{e.seq} {dict(e.attrs)}")
        lines.append(f"expected ({len(self.expected)}):")
        lines.extend(f"  {k}" for k in self.expected)
        lines.append(f"got ({len(self.got)}):")
        lines.extend(f"  {k}" for k in self.got)
        return "\n".join(lines)


def random_pattern(rng: random.Random) -> str:
    n_pos = rng.randint(1, 4)
    types = TYPE_POOL[:n_pos]
    roles = [t.lower() for t in types]
    items = [f"{t} {r}" for t, r in zip(types, roles)]
    iter_role = None
    if rng.random() < 0.35:
        k = rng.randrange(n_pos)
        iter_role = roles[k]
        if rng.random() < 0.5:
            lo = rng.randint(1, 2)
            hi = rng.randint(lo, 3)
            items[k] = f"{types[k]}{{{lo},{hi}}} {iter_role}[]"
        else:
            items[k] = f"{types[k]}+ {iter_role}[]"
    neg_roles = []
    if rng.random() < 0.45:
        neg_type = TYPE_POOL[n_pos] if n_pos < len(TYPE_POOL) else "Y"
        neg_roles.append(("h", neg_type))
        items.insert(rng.randint(0, len(items)), f"NOT({neg_type} h)")

    # Roles usable in WHERE must appear in every DNF alternative.
    common_roles = list(roles)
    structure = rng.choice(["seq", "and", "mix", "or", "or-mid"])
    if structure == "and":
        body = "AND(" + ", ".join(items) + ")"
    elif structure == "mix" and len(items) >= 3:
        cut = rng.randint(1, len(items) - 2)
        inner = "SEQ(" + ", ".join(items[: cut + 1]) + ")"
        rest = items[cut + 1 :]
        body = "AND(" + ", ".join([inner] + rest) + ")"
    elif structure == "or" and len(items) >= 2 and not neg_roles:
        cut = max(1, len(items) // 2)
        left = "SEQ(" + ", ".join(items[:cut]) + ")" if cut > 1 else items[0]
        right = ("SEQ(" + ", ".join(items[cut:]) + ")"
                 if len(items) - cut > 1 else items[cut])
        body = f"OR({left}, {right})"
        common_roles = []
        iter_role = None  # may sit in one branch only
    elif structure == "or-mid" and len(items) >= 3 and not neg_roles:
        mid = items[1:-1]
        alt = " , ".join(mid)
        body = f"SEQ({items[0]}, OR({alt.replace(' , ', ', ')}), {items[-1]})" \
            if len(mid) > 1 else f"SEQ({items[0]}, {mid[0]}, {items[-1]})"
        first_role = roles[0] if "[" not in items[0] else None
        last_role = roles[-1] if "[" not in items[-1] else None
        common_roles = [r for r in (first_role, last_role) if r]
        if iter_role in set(roles[1:-1]):
            iter_role = None
    else:
        body = "SEQ(" + ", ".join(items) + ")"

    atoms = []
    cmp_ops = ["<", "<=", ">", ">=", "=", "!="]
    plain_roles = [r for r in common_roles if r != iter_role]
    for _ in range(rng.randint(0, 2)):
        if not plain_roles:
            break
        r = rng.choice(plain_roles)
        if len(plain_roles) >= 2 and rng.random() < 0.5:
            r2 = rng.choice([x for x in plain_roles if x != r])
            atoms.append(f"{r}.x {rng.choice(cmp_ops)} {r2}.x")
        else:
            atoms.append(f"{r}.x {rng.choice(cmp_ops)} {rng.randint(0, 3)}")
    if iter_role is not None and iter_role in common_roles and rng.random() < 0.6:
        atoms.append(rng.choice([
            f"avg({iter_role}[i].x) <= {rng.randint(1, 3)}",
            f"{iter_role}[i].x = {iter_role}[i-1].x",
            f"{iter_role}[i].x >= {rng.randint(0, 2)}",
            f"count({iter_role}[i].x) <= 2",
        ]))
    if neg_roles and rng.random() < 0.7 and plain_roles:
        h, _ = neg_roles[0]
        atoms.append(f"{h}.x {rng.choice(cmp_ops)} {rng.choice(plain_roles)}.x")

    where = ""
    if atoms:
        where = "\nWHERE skip_till_any_match { " + " and ".join(atoms) + " }"
    window = rng.choice([3, 5, 8, 12, 20])
    return f"PATTERN {body}{where}\nWITHIN {window} msec"


def random_stream(rng: random.Random, pattern_types, max_events: int) -> list:
    n = rng.randint(0, max_events)
    pool = list(pattern_types) + [NOISE_TYPE]
    events = []
    ts = 0
    for seq in range(n):
        ts += rng.choice([0, 0, 1, 1, 2, 3])
        etype = rng.choice(pool)
        events.append(Event(etype, ts, seq, {"x": float(rng.randint(0, 3))}))
    return events


@dataclass
class CaseResult:
    divergence: Optional[Divergence] = None
    modes_run: int = 0


def run_case(rng: random.Random, max_events: int = 25) -> CaseResult:
    text = random_pattern(rng)
    ast = parse_pattern(text)
    chains = to_dnf(ast)
    iter_roles = {c.iterated.role for c in chains if c.iterated is not None}
    if (len(iter_roles) == 1 and all(c.iterated is not None for c in chains)
            and rng.random() < 0.4):
        chains = apply_group_by(chains, next(iter(iter_roles)), "x")
    types = sorted({t for c in chains for t in c.types.values()})
    events = random_stream(rng, types, max_events)
    expected = [match_key(b) for b in
                enumerate_matches_chains(chains, events, cap=max_events + 1)]

    modes: list = [("eager", None)]
    pos_types = sorted({t for c in chains for _, t in c.positives})
    perm = list(pos_types)
    rng.shuffle(perm)
    orders = [[t for t in perm if t in {ty for _, ty in c.positives}]
              for c in chains]
    modes.append(("lazy-pp", orders))
    try:
        compile_pattern(chains, "lazy-fc", orders=orders)
        modes.append(("lazy-fc", orders))
    except BuildError:
        pass
    modes.append(("multi", orders))

    result = CaseResult()
    for mode, mode_orders in modes:
        runtime = make_runtime(compile_pattern(chains, mode, orders=mode_orders))
        got = sorted(match_key(m.binding) for m in run_stream(runtime, events))
        result.modes_run += 1
        if got != expected:
            shrunk = _shrink(chains, events, mode, mode_orders,
                             cap=max_events + 1)
            result.divergence = Divergence(
                pattern=text, window=chains[0].window, events=shrunk[0],
                mode=mode, orders=mode_orders, expected=shrunk[1], got=shrunk[2])
            return result
    return result


def _run_mode(chains, events, mode: str, orders):
    runtime = make_runtime(compile_pattern(chains, mode, orders=orders))
    return sorted(match_key(m.binding) for m in run_stream(runtime, events))


def _shrink(chains, events, mode: str, orders, cap: int):
    """Greedy event removal keeping the divergence alive."""
    def expected_fn(evs):
        return [match_key(b) for b in
                enumerate_matches_chains(chains, evs, cap=cap)]

    current = list(events)
    expected = expected_fn(current)
    got = _run_mode(chains, current, mode, orders)
    changed = True
    while changed:
        changed = False
        for i in range(len(current)):
            trial = current[:i] + current[i + 1 :]
            exp = expected_fn(trial)
            try:
                g = _run_mode(chains, trial, mode, orders)
            except Exception:
                continue
            if g != exp:
                current, expected, got = trial, exp, g
                changed = True
                break
    return current, expected, got


def run_suite(cases: int, seed: int, max_events: int = 25,
              progress=None) -> Optional[Divergence]:
    rng = random.Random(seed)
    for i in range(cases):
        result = run_case(rng, max_events)
        if result.divergence is not None:
            return result.divergence
        if progress is not None and (i + 1) % 100 == 0:
            progress(i + 1)
    return None
