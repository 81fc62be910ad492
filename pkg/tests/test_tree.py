import networkx as nx
import numpy as np
import pytest

from stabletree.datasets import Dataset
from stabletree.errors import ArityError, InputValidationError, ModelParseError, StabletreeError
from stabletree.grower import GrowConfig, fit
from stabletree.tree import TreeModel, build_tree, deserialize, serialize


def test_single_leaf_predicts_its_weight(meta, leaf_node):
    tree = build_tree([leaf_node(1, 3.5)], ["a", "b"], meta)
    assert tree.predict([0.0, 0.0]) == 3.5
    assert tree.predict([-1e300, 1e300]) == 3.5
    assert tree.map_to_leaf([5.0, 5.0]) == 1
    assert tree.n_leaves == 1
    assert tree.depth() == 0


def test_boundary_routes_left(stump):
    assert stump.predict([1.0]) == 2.0
    assert stump.predict([np.nextafter(1.0, 2.0)]) == 7.0
    assert stump.predict([0.999]) == 2.0


def test_sign_routing(meta, leaf_node, split_node):
    tree = build_tree([split_node(0, 0.0), leaf_node(1, -1.0), leaf_node(2, 1.0)], ["x"], meta)
    assert tree.map_to_leaf([-1.0]) == 1
    assert tree.map_to_leaf([1.0]) == 2


def test_depth_two_fit_matches_hand_trace():
    x = np.arange(1.0, 9.0)
    y = np.array([0, 0, 2, 2, 5, 5, 9, 9], dtype=float)
    data = Dataset(x.reshape(-1, 1), y, ["x"])
    tree = fit(data, GrowConfig(adaptive_stopping=False, max_depth=2, min_samples_leaf=1))
    assert [tree.nodes[n].get("value") for n in sorted(tree.nodes) if tree.nodes[n]["type"] == "split"] == [4.5, 2.5, 6.5]
    routing = {1.0: (1, 0.0), 2.5: (1, 0.0), 3.0: (2, 2.0), 4.5: (2, 2.0), 5.0: (3, 5.0), 6.5: (3, 5.0), 7.0: (4, 9.0), 100.0: (4, 9.0)}
    for value, (leaf_id, weight) in routing.items():
        assert tree.map_to_leaf([value]) == leaf_id
        assert tree.predict([value]) == weight
    matrix = np.array(list(routing)).reshape(-1, 1)
    assert list(tree.map_to_leaf(matrix)) == [v[0] for v in routing.values()]


def test_routing_is_total(tree_factory):
    rng = np.random.default_rng(0)
    for _ in range(20):
        tree = tree_factory(rng)
        x = rng.normal(size=(100, 3)) * 2
        leaf_ids = tree.map_to_leaf(x)
        counts = np.bincount(leaf_ids, minlength=tree.n_leaves + 1)
        assert counts[0] == 0
        assert counts.sum() == 100
        weights = {leaf["leaf_id"]: leaf["weight"] for leaf in tree.leaves()}
        assert np.array_equal(tree.predict(x), [weights[i] for i in leaf_ids])


def test_predict_rejects_bad_input(stump):
    with pytest.raises(ArityError):
        stump.predict([1.0, 2.0])
    with pytest.raises(InputValidationError):
        stump.predict([np.nan])
    with pytest.raises(InputValidationError):
        stump.predict([np.inf])


def test_tree_is_frozen(stump, leaf_node):
    assert nx.is_frozen(stump)
    with pytest.raises(nx.NetworkXError):
        stump.add_node(5, **leaf_node(3, 0.0))


def test_validate_attrs():
    tree = TreeModel()
    with pytest.raises(StabletreeError):
        tree.add_node(0, type="leaf", leaf_id=1, weight=0.0)
    with pytest.raises(StabletreeError):
        tree.add_node(0, type="split", feature=0, value=1.0, extra=True)


def test_build_rejects_incomplete_preorder(meta, split_node, leaf_node):
    with pytest.raises(StabletreeError):
        build_tree([split_node(0, 1.0), leaf_node(1, 0.0)], ["x"], meta)
    with pytest.raises(StabletreeError):
        build_tree([split_node(0, 1.0), leaf_node(1, 0.0), leaf_node(3, 0.0)], ["x"], meta)


def test_build_rejects_non_finite_values(meta, split_node, leaf_node):
    with pytest.raises(StabletreeError, match="non-finite weight"):
        build_tree([leaf_node(1, float("inf"))], ["x"], meta)
    with pytest.raises(StabletreeError, match="non-finite value"):
        build_tree([split_node(0, float("nan")), leaf_node(1, 0.0), leaf_node(2, 0.0)], ["x"], meta)


def test_fixture_round_trip_is_byte_identical(stump_bytes):
    tree = deserialize(stump_bytes)
    assert tree.predict([1.0]) == 2.0
    assert tree.predict([1.5]) == 7.0
    assert tree.leaves()[1]["prediction_variance"] == 0.5
    assert serialize(tree) == stump_bytes


def test_round_trip_preserves_predictions(tree_factory):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1000, 3)) * 3
    for _ in range(10):
        tree = tree_factory(rng, max_depth=6)
        copy = deserialize(serialize(tree))
        assert copy.number_of_nodes() == tree.number_of_nodes()
        assert np.array_equal(copy.predict(x), tree.predict(x))
        assert copy.meta == tree.meta
        assert copy.feature_names == tree.feature_names


def test_round_trip_31_leaves(meta, split_node, leaf_node):
    rng = np.random.default_rng(2)
    nodes = []
    for i in range(30):
        nodes += [split_node(0, float(i)), leaf_node(i + 1, float(rng.normal()))]
    nodes.append(leaf_node(31, 0.1))
    tree = build_tree(nodes, ["x"], meta)
    copy = deserialize(serialize(tree))
    assert copy.n_leaves == 31
    assert copy.number_of_nodes() == 61
    assert copy.predict([100.0]) == 0.1


def test_save_and_load(tmp_path, stump):
    path = tmp_path / "model.json"
    stump.save(path)
    assert TreeModel.load(path).predict([3.0]) == 7.0


def test_missing_child_is_a_parse_error(stump_bytes):
    text = stump_bytes.decode()
    tampered = text[: text.rindex(",\n")] + "\n ]}\n"
    with pytest.raises(ModelParseError) as e:
        deserialize(tampered.encode())
    assert e.value.offset == len(tampered.encode())


def test_extra_node_is_a_parse_error(stump_bytes):
    text = stump_bytes.decode()
    extra = '  {"leaf": {"id": 3, "weight": 1, "n": 1, "var_y": 0, "var_w": 0}}'
    tampered = text.replace("\n ]}", ",\n" + extra + "\n ]}")
    with pytest.raises(ModelParseError) as e:
        deserialize(tampered.encode())
    assert e.value.offset == tampered.encode().index(b'{"leaf": {"id": 3')


def test_malformed_streams(stump_bytes):
    with pytest.raises(ModelParseError) as e:
        deserialize(stump_bytes[:40])
    assert 0 <= e.value.offset <= 40
    with pytest.raises(ModelParseError) as e:
        deserialize(b'{"meta": 1}\xff')
    assert e.value.offset == 11
    with pytest.raises(ModelParseError):
        deserialize(b"[]")
    with pytest.raises(ModelParseError):
        deserialize(stump_bytes.replace(b'"weight": 7', b'"weight": "heavy"'))
    tampered = stump_bytes.replace(b'"weight": 7', b'"weight": NaN')
    with pytest.raises(ModelParseError) as e:
        deserialize(tampered)
    assert e.value.offset == tampered.index(b'{"leaf": {"id": 2')
    tampered = stump_bytes.replace(b'"value": 1', b'"value": -Infinity')
    with pytest.raises(ModelParseError) as e:
        deserialize(tampered)
    assert e.value.offset == tampered.index(b'{"split"')
