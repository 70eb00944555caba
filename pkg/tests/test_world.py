import random

import pytest

from kingraph.genealogy import (
    GenderFact,
    GenealogyParams,
    RelationFact,
    generate_genealogy,
    make_nuclear_family,
    parent_spouse_facts,
    soundness_check,
    true_relation_facts,
)
from kingraph.relations import (
    ATOMS,
    Atom,
    EMPTY_SET,
    FULL_SET,
    TableError,
    invert_rset,
    rset,
)
from kingraph.world import (
    Contradiction,
    Gender,
    Mention,
    PropagationOutcome,
    ReplayError,
    WorldModel,
)


def build_world_from_facts(g, facts, table, rng=None):
    """Assert true facts from a genealogy; returns (world, pid->eid map)."""
    w = WorldModel(table, _validate=False)
    entity_map = {pid: w.add_entity(name=f"p{pid}") for pid in g.pids()}
    for fact in facts:
        if isinstance(fact, GenderFact):
            res = w.set_gender(entity_map[fact.pid],
                               Gender.MALE if fact.gender == "male" else Gender.FEMALE)
        else:
            res = w.assert_relation(entity_map[fact.a], fact.atom.bit, entity_map[fact.b])
        assert not isinstance(res, Contradiction), f"true fact refused: {fact}: {res.reason}"
    return w, entity_map


def random_component(table, rng, n_entities):
    """A world with one fully connected component of random edge sets."""
    w = WorldModel(table, _validate=False)
    ids = [w.add_entity() for _ in range(n_entities)]
    for i, eid in enumerate(ids[1:], start=1):
        w.assert_relation(ids[rng.randrange(i)], FULL_SET, eid)
    # random tightening, skipping anything that contradicts
    for _ in range(n_entities * 2):
        a, b = rng.sample(ids, 2)
        w.assert_relation(a, rng.randrange(1, FULL_SET + 1), b)
    return w, ids


class TestBasics:
    def test_new_world_is_empty_and_stable(self, table):
        w = WorldModel(table)
        assert w.entities == {} and w.log == []
        assert w.is_stable()

    def test_invalid_table_rejected(self, table):
        broken = table.with_entry(Atom.PARENT, Atom.SIBLING, EMPTY_SET)
        with pytest.raises(TableError):
            WorldModel(broken)

    def test_add_entity_gender_and_isolation(self, table):
        w = WorldModel(table)
        a = w.add_entity("Anne", Gender.FEMALE)
        b = w.add_entity()
        assert w.entities[a].gender is Gender.FEMALE
        assert w.entities[b].names == set()
        assert not w.same_component(a, b)
        assert w.possible_relations(a, b) is None

    def test_single_narrator_enforced(self, table):
        w = WorldModel(table)
        w.add_entity("me", narrator=True)
        with pytest.raises(ValueError):
            w.add_entity("me too", narrator=True)

    def test_possible_relations_inverse_and_self(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.PARENT, Atom.SPOUSE), b)
        assert w.possible_relations(b, a) == invert_rset(w.possible_relations(a, b))
        assert w.possible_relations(a, a) == rset(Atom.SELF)
        with pytest.raises(KeyError):
            w.possible_relations(a, 404)


class TestAssertRelation:
    def test_parent_assertion_reads_back_inverted(self, table):
        w = WorldModel(table)
        anne, bill = w.add_entity("Anne", Gender.FEMALE), w.add_entity("Bill")
        out = w.assert_relation(anne, rset(Atom.PARENT), bill)
        assert isinstance(out, PropagationOutcome)
        assert w.possible_relations(anne, bill) == rset(Atom.PARENT)
        assert w.possible_relations(bill, anne) == rset(Atom.CHILD)

    def test_chain_inference(self, table):
        w = WorldModel(table)
        a, b, c = w.add_entity("A"), w.add_entity("B"), w.add_entity("C")
        w.assert_relation(a, rset(Atom.PARENT), b)
        w.assert_relation(b, rset(Atom.SIBLING), c)
        assert w.possible_relations(a, c) == rset(Atom.PARENT)
        assert w.is_stable()

    def test_disjoint_singletons_contradict(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.PARENT), b)
        before = w.snapshot()
        res = w.assert_relation(a, rset(Atom.CHILD), b)
        assert isinstance(res, Contradiction)
        assert res.pair == (a, b)
        assert w.snapshot() == before

    def test_self_assert_rejected(self, table):
        w = WorldModel(table)
        a = w.add_entity()
        with pytest.raises(ValueError):
            w.assert_relation(a, rset(Atom.SELF), a)
        with pytest.raises(ValueError):
            w.assert_relation(a, EMPTY_SET, w.add_entity())

    def test_contradiction_support_chain_points_at_log(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.PARENT), b)
        res = w.assert_relation(b, rset(Atom.PARENT), a)
        assert isinstance(res, Contradiction)
        assert any(w.log[i].kind == "assert" for i in res.support)


class TestUpdateCliqueAndPropagate:
    def _figure_clique(self, table):
        w = WorldModel(table)
        a, b, c = w.add_entity(), w.add_entity(), w.add_entity()
        w.assert_relation(a, FULL_SET, b)
        w.assert_relation(b, FULL_SET, c)
        wide = rset(Atom.COUSIN, Atom.SIBLING, Atom.SELF, Atom.OUT_OF_GRAPH)
        w._set_edge_raw(a, b, wide)
        w._set_edge_raw(b, c, rset(Atom.COUSIN))
        w._set_edge_raw(a, c, wide)
        assert w.is_stable()
        return w, a, b, c

    def test_clique_reduction_cascade(self, table):
        w, a, b, c = self._figure_clique(table)
        w._set_edge_raw(a, b, rset(Atom.SELF))
        changed = w.update_clique(a, b, c)
        assert w.edge(a, c) == rset(Atom.COUSIN)
        assert w.edge(b, c) == rset(Atom.COUSIN)
        assert (min(a, c), max(a, c)) in changed
        assert w.is_stable()

    def test_noop_when_already_stable(self, table):
        w, a, b, c = self._figure_clique(table)
        assert w.update_clique(a, b, c) == []

    def test_update_orders_agree_and_are_idempotent(self, table):
        rng = random.Random(11)
        for _ in range(200):
            w1 = _random_stable_clique(table, rng)
            w2 = w1.clone()
            shrink = _random_shrink(w1, (0, 1), rng)
            w1._set_edge_raw(0, 1, shrink)
            w2._set_edge_raw(0, 1, shrink)
            try:
                w1.update_clique(0, 1, 2, first="ik")
                ok1 = True
            except Exception:
                ok1 = False
            try:
                w2.update_clique(0, 1, 2, first="jk")
                ok2 = True
            except Exception:
                ok2 = False
            assert ok1 == ok2
            if ok1:
                assert w1._edges == w2._edges
                assert w1.update_clique(0, 1, 2) == []
                assert w1.is_stable()

    def test_propagate_empty_dirty_is_noop(self, table):
        w, a, b, c = self._figure_clique(table)
        before = dict(w._edges)
        out = w.propagate([])
        assert isinstance(out, PropagationOutcome) and out.changed == ()
        assert w._edges == before

    def test_figure_cascade_via_propagate(self, table):
        w, a, b, c = self._figure_clique(table)
        w._set_edge_raw(a, b, rset(Atom.SELF))
        w.propagate([(a, b)])
        assert w.edge(a, c) == rset(Atom.COUSIN)
        assert w.edge(b, c) == rset(Atom.COUSIN)
        assert sorted(w.entities) == [a, b, c]
        assert w.self_resolved_pairs() == [(a, b)]

    def test_worklist_order_confluence(self, table):
        rng = random.Random(505)
        for _ in range(30):
            w, ids = random_component(table, rng, rng.randint(4, 8))
            a, b = rng.sample(ids, 2)
            shrink = _random_shrink(w, (a, b), rng)
            results = []
            for seed in range(3):
                wc = w.clone()
                wc.worklist_rng = random.Random(seed)
                wc._set_edge_raw(a, b, shrink)
                res = wc.propagate([(a, b)])
                results.append("contradiction" if isinstance(res, Contradiction)
                               else dict(wc._edges))
            assert all(r == results[0] for r in results[1:])


class TestJoinComponents:
    def test_two_singletons_join_with_seed(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.join_components(a, b, rset(Atom.PARENT))
        assert w.same_component(a, b)
        assert w.possible_relations(a, b) == rset(Atom.PARENT)

    def test_full_seed_changes_no_preexisting_edge(self, table):
        rng = random.Random(77)
        for _ in range(20):
            w, first, second = _two_component_world(table, rng)
            before = dict(w._edges)
            res = w.join_components(rng.choice(first), rng.choice(second), FULL_SET)
            assert not isinstance(res, Contradiction)
            for pair, mask in before.items():
                assert w._edges[pair] == mask, f"pre-existing edge {pair} changed"

    def test_join_chain_inference(self, table):
        w = WorldModel(table)
        a, b, c = w.add_entity(), w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.PARENT), b)
        w.assert_relation(b, rset(Atom.SIBLING), c)
        assert w.possible_relations(a, c) == rset(Atom.PARENT)

    def test_join_already_connected_rejected(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, FULL_SET, b)
        with pytest.raises(ValueError):
            w.join_components(a, b, FULL_SET)


class TestGenderRules:
    def test_same_known_genders_drop_spouse(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.SPOUSE, Atom.SELF), b)
        w.set_gender(a, Gender.MALE)
        res = w.set_gender(b, Gender.MALE)
        assert not isinstance(res, Contradiction)
        assert w.possible_relations(a, b) == rset(Atom.SELF)

    def test_different_known_genders_drop_self(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(gender=Gender.MALE), w.add_entity(gender=Gender.FEMALE)
        w.assert_relation(a, rset(Atom.SPOUSE, Atom.SELF), b)
        assert w.possible_relations(a, b) == rset(Atom.SPOUSE)

    def test_spouse_singleton_propagates_gender(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.SPOUSE), b)
        w.set_gender(a, Gender.FEMALE)
        assert w.entities[b].gender is Gender.MALE

    def test_definite_gender_flip_contradicts(self, table):
        w = WorldModel(table)
        a = w.add_entity(gender=Gender.FEMALE)
        before = w.snapshot()
        res = w.set_gender(a, Gender.MALE)
        assert isinstance(res, Contradiction)
        assert w.snapshot() == before

    def test_probable_gender_never_prunes(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.SPOUSE, Atom.SELF), b)
        w.set_probable_gender(a, Gender.PROBABLY_MALE)
        w.set_probable_gender(b, Gender.PROBABLY_MALE)
        assert w.possible_relations(a, b) == rset(Atom.SPOUSE, Atom.SELF)
        res = w.set_gender(a, Gender.FEMALE)  # probables may be corrected
        assert not isinstance(res, Contradiction)


class TestMerge:
    def test_self_edge_merge_unions_names_and_edges(self, table):
        w = WorldModel(table)
        n = w.add_entity(narrator=True)
        d = w.add_entity(gender=Gender.FEMALE)
        s = w.add_entity("Susan", Gender.FEMALE)
        w.assert_relation(d, rset(Atom.CHILD), n)
        w.assert_relation(s, rset(Atom.CHILD), n)
        w.assert_relation(d, rset(Atom.SELF), s)
        pair = w.self_resolved_pairs()
        assert pair == [(d, s)]
        res = w.merge_entities(d, s)
        assert res if not isinstance(res, Contradiction) else False
        assert s not in w.entities
        assert w.entities[d].names == {"Susan"}
        assert w.possible_relations(d, n) == rset(Atom.CHILD)

    def test_merge_without_self_requires_confirmation(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.SELF, Atom.SIBLING), b)
        res = w.merge_entities(a, b)
        assert isinstance(res, Contradiction)
        res = w.merge_entities(a, b, confirmed=True)
        assert not isinstance(res, Contradiction)

    def test_gender_conflict_blocks_merge(self, table):
        w = WorldModel(table)
        a = w.add_entity(gender=Gender.MALE)
        b = w.add_entity(gender=Gender.FEMALE)
        w.assert_relation(a, rset(Atom.SELF, Atom.SIBLING), b)
        before = w.snapshot()
        res = w.merge_entities(a, b, confirmed=True)
        assert isinstance(res, Contradiction)
        assert w.snapshot() == before

    def test_merge_with_no_third_entities(self, table):
        w = WorldModel(table)
        a, b = w.add_entity("A"), w.add_entity("B")
        w.assert_relation(a, rset(Atom.SELF), b)
        res = w.merge_entities(a, b)
        assert not isinstance(res, Contradiction)
        assert sorted(w.entities) == [a]
        assert w.entities[a].names == {"A", "B"}


class TestSplit:
    def _two_bills_world(self, table):
        w = WorldModel(table)
        n = w.add_entity("me", narrator=True)
        m1 = Mention(1, "a brother named Bill")
        bill = w.add_entity("Bill", Gender.MALE, source=m1)
        w.assert_relation(bill, rset(Atom.SIBLING), n, source=m1)
        m2 = Mention(2, "Bill")
        w.add_mention(bill, m2)
        # "Bill is my father" now contradicts and gets refused
        res = w.assert_relation(bill, rset(Atom.PARENT), n, source=m2)
        assert isinstance(res, Contradiction)
        return w, n, bill, m1, m2

    def test_split_reattributes_and_reapplies(self, table):
        w, n, bill, m1, m2 = self._two_bills_world(table)
        kept, created = w.split_entity(bill, [m1], [m2])
        res = w.assert_relation(created, rset(Atom.PARENT), n, source=m2)
        assert not isinstance(res, Contradiction)
        w.add_name(created, "Bill", source=m2)
        assert w.possible_relations(kept, n) == rset(Atom.SIBLING)
        assert w.possible_relations(created, n) == rset(Atom.PARENT)
        assert w.possible_relations(created, kept) == rset(Atom.PARENT)

    def test_split_requires_multiple_mentions(self, table):
        w = WorldModel(table)
        e = w.add_entity("solo", source=Mention(1, "solo"))
        with pytest.raises(ValueError):
            w.split_entity(e, [Mention(1, "solo")], [])

    def test_split_partition_must_cover(self, table):
        w, n, bill, m1, m2 = self._two_bills_world(table)
        with pytest.raises(ValueError):
            w.split_entity(bill, [m1], [Mention(9, "nope")])

    def test_split_then_remerge_round_trips(self, table):
        w = WorldModel(table)
        n = w.add_entity(narrator=True)
        m1, m2 = Mention(1, "my daughter"), Mention(2, "Susan")
        d = w.add_entity(gender=Gender.FEMALE, source=m1)
        w.assert_relation(d, rset(Atom.CHILD), n, source=m1)
        w.add_mention(d, m2)
        w.add_name(d, "Susan", source=m2)
        before = w.snapshot()
        kept, created = w.split_entity(d, [m1], [m2])
        between = w.possible_relations(kept, created)
        assert between is None or between & rset(Atom.SELF)
        res = w.merge_entities(kept, created, confirmed=True)
        assert not isinstance(res, Contradiction)
        after = w.snapshot()
        assert before.edges == after.edges
        assert {e[1] for e in before.entities} == {e[1] for e in after.entities}


class TestReplayAndLog:
    def test_log_replay_reproduces_model(self, table):
        rng = random.Random(13)
        for _ in range(10):
            w, _ = random_component(table, rng, rng.randint(2, 6))
            replayed = WorldModel.replay(table, [e.to_json() for e in w.log])
            assert replayed.snapshot() == w.snapshot()

    def test_replay_includes_merges_and_genders(self, table):
        w = WorldModel(table)
        n = w.add_entity(narrator=True)
        a = w.add_entity("A", Gender.FEMALE)
        b = w.add_entity("B")
        w.assert_relation(a, rset(Atom.PARENT), n)
        w.assert_relation(b, rset(Atom.PARENT), n)
        w.set_gender(b, Gender.FEMALE)
        for pair in w.self_resolved_pairs():
            w.merge_entities(*pair)
        replayed = WorldModel.replay(table, w.log)
        assert replayed.snapshot() == w.snapshot()

    def test_replay_refuses_broken_history(self, table):
        w = WorldModel(table)
        a, b = w.add_entity(), w.add_entity()
        w.assert_relation(a, rset(Atom.PARENT), b)
        bad = [e.to_json() for e in w.log]
        bad.append({"kind": "assert", "a": a, "b": b,
                    "atoms": ["Child"], "source": None})
        with pytest.raises(ReplayError):
            WorldModel.replay(table, bad)


class TestStability:
    def test_mutation_sequences_leave_model_stable(self, table):
        rng = random.Random(2024)
        for _ in range(15):
            w, ids = random_component(table, rng, rng.randint(3, 7))
            assert w.is_stable()

    def test_hand_built_violation_detected(self, table):
        w = WorldModel(table)
        a, b, c = w.add_entity(), w.add_entity(), w.add_entity()
        w.assert_relation(a, FULL_SET, b)
        w.assert_relation(b, FULL_SET, c)
        w._set_edge_raw(a, b, rset(Atom.PARENT))
        w._set_edge_raw(b, c, rset(Atom.PARENT))
        w._set_edge_raw(a, c, rset(Atom.SPOUSE))
        assert not w.is_stable()

    def test_composition_constructed_cliques_are_stable(self, table):
        rng = random.Random(4)
        for _ in range(300):
            w = WorldModel(table, _validate=False)
            a, b, c = w.add_entity(), w.add_entity(), w.add_entity()
            rab = rng.randrange(1, FULL_SET + 1)
            rbc = rng.randrange(1, FULL_SET + 1)
            w.assert_relation(a, FULL_SET, b)
            w.assert_relation(b, FULL_SET, c)
            w._set_edge_raw(a, b, rab)
            w._set_edge_raw(b, c, rbc)
            w._set_edge_raw(a, c, table.compose_sets(rab, rbc))
            assert w.is_stable()


class TestOracleSoundness:
    def test_random_fact_subsets_never_prune_truth(self, table):
        rng = random.Random(31337)
        for _ in range(25):
            g = generate_genealogy(GenealogyParams(
                max_persons=rng.randint(6, 18), max_generations=rng.randint(2, 4),
                num_families=2, intermarriage_rate=0.6, seed=rng.getrandbits(32)))
            facts = true_relation_facts(g) + [
                f for f in parent_spouse_facts(g) if isinstance(f, GenderFact)]
            rng.shuffle(facts)
            subset = facts[: rng.randint(0, min(len(facts), 12))]
            w, emap = build_world_from_facts(g, subset, table)
            report = soundness_check(g, subset, w, emap)
            assert report.ok, report.violations[:3]

    def test_narrowed_table_is_caught_by_detector(self, table):
        # Drop Sibling from M(Cousin, Cousin); the entry is its own inverse
        # mirror, so the narrowing is what propagation actually consults.
        narrowed = table.with_entry(
            Atom.COUSIN, Atom.COUSIN,
            rset(Atom.COUSIN, Atom.SELF, Atom.OUT_OF_GRAPH))
        g = make_nuclear_family()
        boy, girl, cousin = 6, 7, 8  # boy and girl are siblings, 8 their cousin
        facts = [RelationFact(boy, Atom.COUSIN, cousin),
                 RelationFact(cousin, Atom.COUSIN, girl)]
        w = WorldModel(narrowed, _validate=False)
        emap = {pid: w.add_entity(name=f"p{pid}") for pid in (boy, girl, cousin)}
        for fact in facts:
            res = w.assert_relation(emap[fact.a], fact.atom.bit, emap[fact.b])
            assert not isinstance(res, Contradiction)
        report = soundness_check(g, facts, w, emap)
        assert not report.ok
        assert report.violations[0].true_atom is Atom.SIBLING

    def test_isolated_entities_vacuously_sound(self, table):
        g = make_nuclear_family()
        w = WorldModel(table, _validate=False)
        emap = {pid: w.add_entity() for pid in g.pids()}
        assert soundness_check(g, [], w, emap).ok


class TestMonotoneShrink:
    def test_edges_never_regain_atoms(self, table):
        # across arbitrary accepted mutations, a surviving pair's set only
        # shrinks; new pairs appear solely through component joins
        rng = random.Random(606)
        for _ in range(10):
            w = WorldModel(table, _validate=False)
            for _ in range(6):
                w.add_entity(gender=rng.choice(
                    (Gender.UNKNOWN, Gender.MALE, Gender.FEMALE)))
            previous = {}
            for _ in range(25):
                ids = sorted(w.entities)
                if len(ids) < 2:
                    break
                a, b = rng.sample(ids, 2)
                op = rng.random()
                if op < 0.8:
                    w.assert_relation(a, rng.randrange(1, FULL_SET + 1), b)
                elif op < 0.9 and not w.entities[a].gender.definite:
                    w.set_gender(a, rng.choice((Gender.MALE, Gender.FEMALE)))
                else:
                    for pair in w.self_resolved_pairs():
                        w.merge_entities(*pair)
                        break
                current = dict(w._edges)
                for pair, mask in current.items():
                    if pair in previous:
                        assert mask & ~previous[pair] == 0, \
                            f"edge {pair} gained atoms"
                previous = current


class TestRollbackAtomicity:
    def test_randomized_contradictions_roll_back_bit_identical(self, table):
        rng = random.Random(909)
        cases = 0
        while cases < 40:
            w, ids = random_component(table, rng, rng.randint(3, 6))
            a, b = rng.sample(ids, 2)
            current = w.possible_relations(a, b)
            complement = FULL_SET & ~current
            if complement == 0:
                continue
            before = w.snapshot()
            res = w.assert_relation(a, complement, b)
            assert isinstance(res, Contradiction)
            assert w.snapshot() == before
            cases += 1


def _two_component_world(table, rng):
    """One world holding two random, separately grown components.

    Entities stay ungendered so the join exercises the pure no-reduction
    property rather than gender pruning."""
    w = WorldModel(table, _validate=False)
    groups = []
    for _ in range(2):
        ids = [w.add_entity() for _ in range(rng.randint(2, 5))]
        for i, eid in enumerate(ids[1:], start=1):
            w.assert_relation(ids[rng.randrange(i)], FULL_SET, eid)
        for _ in range(len(ids) * 2):
            a, b = rng.sample(ids, 2)
            w.assert_relation(a, rng.randrange(1, FULL_SET + 1), b)
        groups.append(ids)
    return w, groups[0], groups[1]


def _random_stable_clique(table, rng) -> WorldModel:
    w = WorldModel(table, _validate=False)
    a, b, c = w.add_entity(), w.add_entity(), w.add_entity()
    rab = rng.randrange(1, FULL_SET + 1)
    rbc = rng.randrange(1, FULL_SET + 1)
    w.assert_relation(a, FULL_SET, b)
    w.assert_relation(b, FULL_SET, c)
    w._set_edge_raw(a, b, rab)
    w._set_edge_raw(b, c, rbc)
    w._set_edge_raw(a, c, table.compose_sets(rab, rbc))
    # random extra shrink + repair to vary the shape beyond pure compositions
    if rng.random() < 0.5:
        shrink = _random_shrink(w, (a, c), rng)
        w._set_edge_raw(a, c, shrink)
        try:
            w.update_clique(a, c, b)
        except Exception:
            w._set_edge_raw(a, b, rab)
            w._set_edge_raw(b, c, rbc)
            w._set_edge_raw(a, c, table.compose_sets(rab, rbc))
    assert w.is_stable()
    return w


def _random_shrink(w, pair, rng) -> int:
    current = w.possible_relations(*pair)
    bits = [a.bit for a in ATOMS if current & a.bit]
    keep = rng.randint(1, len(bits))
    return sum(rng.sample(bits, keep))
