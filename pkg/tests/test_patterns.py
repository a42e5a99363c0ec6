import random
from itertools import combinations, product

import pytest

from cep.oracle import enumerate_matches_chains
from cep.patterns import (Kleene, Leaf, OpNode, ParseError,
                          PatternError, parse_pattern, render_chain, to_dnf)
from cep.predicates import eval_atoms, split_conjunction
from cep.runtime import match_key

PATTERN_1 = """
# high prices of three stocks in order
PATTERN SEQ(A a, B b, C c)
WHERE skip_till_any_match {
    a.price > 10 AND b.price > 10 AND c.price > 10
}
WITHIN 1 hour
"""


class TestParse:
    def test_pattern_1(self):
        ast = parse_pattern(PATTERN_1)
        assert isinstance(ast.root, OpNode) and ast.root.op == "seq"
        assert [c for c in ast.root.children] == [
            Leaf("A", "a"), Leaf("B", "b"), Leaf("C", "c")]
        assert ast.window == 3_600_000
        assert len(split_conjunction(ast.where)) == 3

    def test_minimal_pattern(self):
        ast = parse_pattern("PATTERN SEQ(A a) WITHIN 1 hour")
        assert ast.root.children == (Leaf("A", "a"),)
        assert ast.where is None

    def test_pattern_5_kleene(self):
        ast = parse_pattern("PATTERN SEQ(A a, B+ b[], C c) WITHIN 1 hour")
        assert ast.root.children[1] == Kleene(Leaf("B", "b"))

    def test_repeat_syntax(self):
        ast = parse_pattern("PATTERN SEQ(A a, B{2,3} b[]) WITHIN 5 min")
        assert ast.root.children[1] == Kleene(Leaf("B", "b"), 2, 3)

    def test_time_units(self):
        for text, ms in [("1 hour", 3_600_000), ("2 min", 120_000),
                         ("3 sec", 3000), ("250 msec", 250)]:
            assert parse_pattern(f"PATTERN A a WITHIN {text}").window == ms

    def test_syntax_error_carries_position(self):
        with pytest.raises(ParseError) as err:
            parse_pattern("PATTERN SEQ(A a,\n B) WITHIN 1 hour")
        assert err.value.line == 2

    def test_duplicate_role_same_conjunct(self):
        with pytest.raises(PatternError, match="twice"):
            to_dnf(parse_pattern("PATTERN SEQ(A a, A a) WITHIN 1 hour"))

    def test_role_with_conflicting_types(self):
        with pytest.raises(PatternError, match="declared with types"):
            parse_pattern("PATTERN SEQ(A a, B a) WITHIN 1 hour")

    def test_duplicate_type_same_conjunct(self):
        with pytest.raises(PatternError, match="distinct"):
            to_dnf(parse_pattern("PATTERN SEQ(A a, A b) WITHIN 1 hour"))

    def test_unknown_role_in_where(self):
        with pytest.raises(PatternError, match="unknown role"):
            parse_pattern(
                "PATTERN SEQ(A a) WHERE skip_till_any_match { z.x > 1 } "
                "WITHIN 1 hour")

    def test_aggregate_needs_iterated_role(self):
        with pytest.raises(PatternError, match="iterated"):
            parse_pattern(
                "PATTERN SEQ(A a, B b) WHERE skip_till_any_match "
                "{ avg(b[i].x) > 1 } WITHIN 1 hour")

    def test_bad_repeat_bounds(self):
        with pytest.raises(ParseError, match="bounds"):
            parse_pattern("PATTERN SEQ(A a, B{3,2} b[]) WITHIN 1 hour")

    def test_not_under_or_rejected(self):
        with pytest.raises(ParseError, match="NOT"):
            parse_pattern("PATTERN OR(NOT(B b), A a) WITHIN 1 hour")

    def test_negated_iteration_rejected(self):
        with pytest.raises(ParseError):
            parse_pattern("PATTERN SEQ(A a, NOT(B+ b[])) WITHIN 1 hour")

    def test_wrong_strategy_rejected(self):
        with pytest.raises(ParseError, match="strategy"):
            parse_pattern(
                "PATTERN SEQ(A a) WHERE strict_contiguity { a.x > 1 } "
                "WITHIN 1 hour")

    def test_all_negative_rejected(self):
        with pytest.raises(PatternError, match="positive"):
            parse_pattern("PATTERN AND(NOT(A a), NOT(B b)) WITHIN 1 hour")

    def test_roundtrip_through_render(self):
        from cep.patterns import render_pattern

        ast = parse_pattern(PATTERN_1)
        again = parse_pattern(render_pattern(ast))
        assert again.root == ast.root
        assert again.window == ast.window


class TestToDnf:
    def test_or_in_sequence_distributes(self):
        ast = parse_pattern(
            "PATTERN SEQ(A a, OR(B b, C c), D d) WITHIN 1 hour")
        chains = to_dnf(ast)
        assert [c.roles for c in chains] == [("a", "b", "d"), ("a", "c", "d")]
        assert chains[0].temporal_order == frozenset(
            {("a", "b"), ("b", "d"), ("a", "d")})
        assert chains[1].temporal_order == frozenset(
            {("a", "c"), ("c", "d"), ("a", "d")})

    def test_partial_sequence_single_chain(self):
        ast = parse_pattern(
            "PATTERN AND(SEQ(A a, B b), SEQ(C c, D d), E e) WITHIN 1 hour")
        (chain,) = to_dnf(ast)
        assert set(chain.roles) == {"a", "b", "c", "d", "e"}
        assert chain.temporal_order == frozenset({("a", "b"), ("c", "d")})

    def test_plain_sequence_total_order(self):
        (chain,) = to_dnf(parse_pattern("PATTERN SEQ(A a, B b, C c) WITHIN 1 hour"))
        assert chain.temporal_order == frozenset(
            {("a", "b"), ("b", "c"), ("a", "c")})
        assert chain.is_total_order()

    def test_negation_neighbours(self):
        ast = parse_pattern(
            "PATTERN SEQ(A a, NOT(B b), C c, D d)\n"
            "WHERE skip_till_any_match { b.x < c.y }\nWITHIN 1 hour")
        (chain,) = to_dnf(ast)
        (neg,) = chain.negations
        assert neg.prec_roles == frozenset({"a"})
        assert neg.succ_roles == frozenset({"c", "d"})
        assert len(neg.cond) == 1
        assert not chain.atoms

    def test_cross_branch_predicate_rejected(self):
        with pytest.raises(PatternError, match="outside this"):
            to_dnf(parse_pattern(
                "PATTERN OR(SEQ(A a, B b), SEQ(C c, D d))\n"
                "WHERE skip_till_any_match { a.x > d.x }\nWITHIN 1 hour"))

    def test_deterministic_chain_order(self):
        ast = parse_pattern(
            "PATTERN OR(SEQ(C c, D d, E e), SEQ(A a, B b, C c)) WITHIN 1 hour")
        chains = to_dnf(ast)
        assert [tuple(sorted(c.types)) for c in chains] == [
            ("a", "b", "c"), ("c", "d", "e")]

    def test_idempotent_through_render(self):
        texts = [
            PATTERN_1,
            "PATTERN AND(SEQ(A a, B b), SEQ(C c, D d), E e) WITHIN 1 hour",
            "PATTERN SEQ(A a, OR(B b, C c), D d) WITHIN 20 min",
            "PATTERN SEQ(NOT(X h), A a, AND(B b, C c)) WITHIN 90 sec",
            "PATTERN SEQ(A a, B{1,2} b[], C c)\n"
            "WHERE skip_till_any_match { avg(b[i].x) <= 2 and a.x < c.x }\n"
            "WITHIN 8 msec",
            "PATTERN AND(A a, NOT(B b), NOT(C c)) WITHIN 1 hour",
        ]
        for text in texts:
            chains = to_dnf(parse_pattern(text))
            for chain in chains:
                again = to_dnf(parse_pattern(render_chain(chain)))
                assert len(again) == 1
                assert again[0].key() == chain.key(), text

    def test_idempotent_on_random_trees(self):
        rng = random.Random(11)
        from cep.difftest import random_pattern

        for _ in range(120):
            chains = to_dnf(parse_pattern(random_pattern(rng)))
            for chain in chains:
                (again,) = to_dnf(parse_pattern(render_chain(chain)))
                assert again.key() == chain.key()

    def test_seq_subtree_order_is_total_within_chain(self):
        ast = parse_pattern(
            "PATTERN AND(SEQ(A a, B b, C c), D d) WITHIN 1 hour")
        (chain,) = to_dnf(ast)
        sub = {(u, v) for (u, v) in chain.temporal_order
               if u in ("a", "b", "c") and v in ("a", "b", "c")}
        assert sub == {("a", "b"), ("b", "c"), ("a", "c")}


def _ast_matches(ast, stream):
    """Independent recursive AST semantics (negation-free patterns only)."""

    def walk(node):
        # Returns a list of alternatives; each alternative is a list of
        # (binding, group) pairs where group carries the item's role set.
        if isinstance(node, Leaf):
            return [[({node.role: e}, (node.role,)) for e in stream
                     if e.etype == node.etype]]

        if isinstance(node, Kleene):
            events = [e for e in stream if e.etype == node.leaf.etype]
            hi = len(events) if node.hi is None else min(node.hi, len(events))
            subsets = [
                {node.leaf.role: combo}
                for size in range(node.lo, hi + 1)
                for combo in combinations(events, size)
            ]
            return [[(b, (node.leaf.role,)) for b in subsets]]

        assert isinstance(node, OpNode)
        if node.op == "or":
            out = []
            for child in node.children:
                out.extend(walk(child))
            return out
        child_alt_lists = [walk(c) for c in node.children]
        out = []
        for combo in product(*child_alt_lists):
            merged = []
            for parts in product(*combo):
                binding = {}
                for b, _ in parts:
                    binding.update(b)
                if node.op == "seq" and not _ordered(parts):
                    continue
                merged.append((binding, tuple(binding)))
            out.append(merged)
        return out

    def _ordered(parts):
        for i in range(len(parts) - 1):
            hi = max(_keys(parts[i][0]))
            lo = min(_keys(parts[i + 1][0]))
            if not hi < lo:
                return False
        return True

    def _keys(binding):
        out = []
        for v in binding.values():
            members = v if isinstance(v, tuple) else (v,)
            out.extend(e.key for e in members)
        return out

    results = []
    atoms = split_conjunction(ast.where)
    for alternative in walk(ast.root):
        for binding, _ in alternative:
            ts = [e.ts for v in binding.values()
                  for e in (v if isinstance(v, tuple) else (v,))]
            if max(ts) - min(ts) > ast.window:
                continue
            if atoms and not eval_atoms(atoms, binding):
                continue
            results.append(match_key(binding))
    return sorted(results)


def test_dnf_union_equals_ast_semantics():
    rng = random.Random(3)
    from cep.difftest import random_pattern, random_stream

    checked = 0
    for _ in range(150):
        text = random_pattern(rng)
        ast = parse_pattern(text)
        chains = to_dnf(ast)
        if any(c.negations for c in chains):
            continue  # the independent evaluator covers negation-free trees
        types = sorted({t for c in chains for t in c.types.values()})
        stream = random_stream(rng, types, 14)
        expected = _ast_matches(ast, stream)
        got = sorted(match_key(b)
                     for b in enumerate_matches_chains(chains, stream, cap=20))
        assert got == expected, text
        checked += 1
    assert checked > 40
