import json

import pytest
from hypothesis import given, settings, strategies as st

from relsense.corpus import (EMPTY_PARSE_MARKER, ParseTree, RelType, Token,
                             attach_pos, covering_subtree, parse_ptb,
                             production_rules, read_parses, read_relations,
                             tree_to_string)


def _line(**overrides):
    obj = {
        "DocID": "wsj_0001", "ID": 7, "Type": "Explicit",
        "Sense": ["Comparison.Contrast"],
        "Arg1": {"RawText": "the cat sat",
                 "TokenList": [[0, 3, 0, 0, 0], [4, 7, 1, 0, 1], [8, 11, 2, 0, 2]]},
        "Arg2": {"RawText": "it left", "TokenList": [[20, 22, 5, 1, 1], [23, 27, 6, 1, 2]]},
        "Connective": {"RawText": "However", "TokenList": [[12, 19, 3, 1, 0]]},
    }
    obj.update(overrides)
    return json.dumps(obj)


class TestReadRelations:
    def test_explicit_field_mapping(self):
        rels = read_relations([_line()])
        assert len(rels) == 1
        rel = rels[0]
        assert rel.doc_id == "wsj_0001"
        assert rel.rel_id == 7
        assert rel.rel_type is RelType.EXPLICIT
        assert rel.is_explicit
        assert rel.senses == ["Comparison.Contrast"]
        assert [t.surface for t in rel.arg1_tokens] == ["the", "cat", "sat"]
        assert [(t.sent_index, t.tok_index) for t in rel.arg2_tokens] == [(1, 1), (1, 2)]
        assert [t.surface for t in rel.connective_tokens] == ["However"]

    def test_entrel_routes_nonexplicit(self):
        rels = read_relations([_line(Type="EntRel", Sense=["EntRel"],
                                     Connective={"RawText": "", "TokenList": []})])
        assert rels[0].rel_type is RelType.ENTREL
        assert not rels[0].is_explicit

    def test_empty_argument_span(self):
        bad = _line(Arg2={"RawText": "", "TokenList": []})
        with pytest.raises(ValueError, match="relation 7.*empty argument span"):
            read_relations([bad])

    def test_malformed_line_names_line_number(self):
        with pytest.raises(ValueError, match="line 2"):
            read_relations([_line(), "{not json"])

    def test_unknown_type(self):
        with pytest.raises(ValueError, match="unknown relation type"):
            read_relations([_line(Type="Weird")])

    def test_explicit_without_connective(self):
        bad = _line(Connective={"RawText": "", "TokenList": []})
        with pytest.raises(ValueError, match="without connective"):
            read_relations([bad])

    def test_extra_fields_ignored(self):
        obj = json.loads(_line())
        obj["SomeFutureField"] = {"x": 1}
        assert len(read_relations([json.dumps(obj)])) == 1

    def test_order_preserving_and_total(self):
        lines = [_line(ID=i, DocID=f"d{i}") for i in range(6)]
        rels = read_relations(lines)
        assert [r.rel_id for r in rels] == list(range(6))

    def test_senses_absent_at_predict_time(self):
        obj = json.loads(_line())
        del obj["Sense"]
        assert read_relations([json.dumps(obj)])[0].senses == []


class TestParsePtb:
    def test_basic(self):
        t = parse_ptb("(NP (DT the) (NN cat))")
        assert t.label == "NP"
        assert len(t.children) == 2
        assert all(c.is_preterminal for c in t.children)
        assert t.leaves() == ["the", "cat"]

    def test_single_preterminal(self):
        t = parse_ptb("(X a)")
        assert t.label == "X" and t.is_preterminal
        assert t.children[0].label == "a"

    def test_unbalanced_raises_with_offset(self):
        s = "(NP (DT the"
        with pytest.raises(ValueError, match=f"offset {len(s)}"):
            parse_ptb(s)

    def test_empty_node_rejected(self):
        with pytest.raises(ValueError, match="empty node"):
            parse_ptb(EMPTY_PARSE_MARKER)

    def test_trailing_content(self):
        with pytest.raises(ValueError, match="trailing content"):
            parse_ptb("(X a) (Y b)")

    def test_wrapped_root_roundtrip(self):
        s = "( (S (NP (DT the) (NN cat)) (VP (VBD sat))) )"
        t = parse_ptb(s)
        assert parse_ptb(tree_to_string(t)) == t
        assert t.leaves() == ["the", "cat", "sat"]


def _trees(max_depth=4):
    labels = st.text(alphabet="ABCDEFab", min_size=1, max_size=3)
    return st.recursive(
        labels.map(ParseTree),
        lambda children: st.builds(
            lambda lab, kids: ParseTree(lab, tuple(kids)),
            labels, st.lists(children, min_size=1, max_size=3)),
        max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(_trees())
def test_roundtrip_print_then_parse(tree):
    assert parse_ptb(tree_to_string(tree)) == tree


class TestProductionRules:
    def test_three_rule_tree(self):
        t = parse_ptb("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        assert production_rules(t) == {"S->NP VP", "NP->DT NN", "VP->VBD"}

    def test_preterminal_has_no_rules(self):
        assert production_rules(parse_ptb("(NN cat)")) == set()

    def test_repeated_rule_collapses(self):
        t = parse_ptb("(S (NP (DT a) (NN b)) (NP (DT c) (NN d)))")
        assert production_rules(t) == {"S->NP NP", "NP->DT NN"}


class TestCoveringSubtree:
    def test_argument_limited_extraction(self):
        t = parse_ptb("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        sub = covering_subtree(t, 0, 2)
        assert sub.label == "NP"
        assert production_rules(sub) == {"NP->DT NN"}

    def test_whole_span_returns_root(self):
        t = parse_ptb("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        assert covering_subtree(t, 0, 3).label == "S"

    def test_single_token_descends_to_preterminal(self):
        t = parse_ptb("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        assert covering_subtree(t, 2, 3).label == "VBD"

    def test_out_of_range_clipped(self):
        # hi clips to the leaf count; the deepest cover of the full span
        # under the unary chain is NP
        t = parse_ptb("(S (NP (DT the) (NN cat)))")
        assert covering_subtree(t, 0, 99).label == "NP"
        t2 = parse_ptb("(S (NP (DT the) (NN cat)) (VP (VBD sat)))")
        assert covering_subtree(t2, -5, 99).label == "S"


class TestReadParses:
    def test_basic_document(self):
        data = {"d1": {"sentences": [{
            "parsetree": "( (S (NP (DT the) (NN cat)) (VP (VBD sat))) )",
            "words": [["the", {"PartOfSpeech": "DT"}],
                      ["cat", {"PartOfSpeech": "NN"}],
                      ["sat", {"PartOfSpeech": "VBD"}]],
        }]}}
        parses = read_parses(data)
        sent = parses["d1"][0]
        assert sent.tree.label == "S"
        assert sent.tree.leaves() == ["the", "cat", "sat"]
        assert sent.tokens == [("the", "DT"), ("cat", "NN"), ("sat", "VBD")]
        assert parses.missing_pos == 0

    def test_empty_parse_marker(self):
        data = {"d1": {"sentences": [{"parsetree": EMPTY_PARSE_MARKER,
                                      "words": [["x", {"PartOfSpeech": "NN"}]]}]}}
        assert read_parses(data)["d1"][0].tree is None

    def test_missing_pos_counted(self):
        data = {"d1": {"sentences": [{"parsetree": "(NN x)",
                                      "words": [["x", {}]]}]}}
        parses = read_parses(data)
        assert parses["d1"][0].tokens == [("x", "")]
        assert parses.missing_pos == 1

    def test_bad_tree_names_coordinates(self):
        data = {"dX": {"sentences": [{"parsetree": "(S (NP", "words": []}]}}
        with pytest.raises(ValueError, match="doc dX sentence 0"):
            read_parses(data)


class TestAttachPos:
    def test_fills_pos_and_counts_misses(self):
        rels = read_relations([_line()])
        data = {"wsj_0001": {"sentences": [
            {"parsetree": "( (S (DT the) (NN cat) (VBD sat)) )",
             "words": [["the", {"PartOfSpeech": "DT"}],
                       ["cat", {"PartOfSpeech": "NN"}],
                       ["sat", {"PartOfSpeech": "VBD"}]]},
            {"parsetree": "( (S (RB However) (PRP it) (VBD left)) )",
             "words": [["However", {"PartOfSpeech": "RB"}],
                       ["it", {"PartOfSpeech": "PRP"}],
                       ["left", {"PartOfSpeech": "VBD"}]]},
        ]}}
        misses = attach_pos(rels, read_parses(data))
        assert misses == 0
        assert [t.pos for t in rels[0].arg1_tokens] == ["DT", "NN", "VBD"]
        assert [t.pos for t in rels[0].arg2_tokens] == ["PRP", "VBD"]

    def test_miss_leaves_pos_empty(self):
        rels = read_relations([_line()])
        misses = attach_pos(rels, read_parses({}))
        assert misses == 6
        assert all(t.pos == "" for t in rels[0].arg1_tokens)
