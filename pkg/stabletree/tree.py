import json
import math
import re
from functools import cached_property
from pathlib import Path
from typing import Any, Literal, TypedDict, cast

import networkx as nx
import numpy as np

from stabletree.errors import DataError, ModelParseError, StabletreeError
from stabletree.utils import as_matrix, format_float


class SplitNode(TypedDict):
    type: Literal["split"]
    feature: int  # x[feature] <= value routes left
    value: float


class LeafNode(TypedDict):
    type: Literal["leaf"]
    leaf_id: int  # 1..D in pre-order
    weight: float
    n_train: int
    response_variance: float
    prediction_variance: float


class EdgeMetadata(TypedDict):
    side: Literal["left", "right"]


class FitMeta(TypedDict):
    loss: str
    alpha: float
    beta: float
    epsilon: float
    c: float
    seed: int


class TreeMetadata(TypedDict):
    feature_names: list[str]
    meta: FitMeta


def validate_attrs(attrs: dict[str, Any], type: Literal["node", "edge"]):
    if type == "node":
        metadata = LeafNode if attrs.get("type") == "leaf" else SplitNode
    else:
        metadata = EdgeMetadata
    expected = set(metadata.__annotations__)
    if set(attrs) != expected:
        missing = sorted(expected - set(attrs))
        extra = sorted(set(attrs) - expected)
        raise StabletreeError(
            f"Invalid attributes for {type}: missing {missing}, unexpected {extra}"
        )


class TreeModel(nx.DiGraph):
    """Binary regression tree; node 0 is the root, nodes are numbered pre-order.

    Built by the grower or by `deserialize`, then frozen. Predictions route
    x through split nodes (x_j <= s goes left) to a leaf and return its weight.
    """

    graph: TreeMetadata

    @property
    def root(self) -> int:
        return 0

    @property
    def feature_names(self) -> list[str]:
        return self.graph["feature_names"]

    @property
    def n_features(self) -> int:
        return len(self.graph["feature_names"])

    @property
    def meta(self) -> FitMeta:
        return self.graph["meta"]

    def add_node(self, node_for_adding: int, **attrs):
        validate_attrs(attrs, "node")
        return super().add_node(node_for_adding, **attrs)

    def add_edge(self, u_of_edge: int, v_of_edge: int, **attrs):
        validate_attrs(attrs, "edge")
        return super().add_edge(u_of_edge, v_of_edge, **attrs)

    def children(self, node: int) -> tuple[int, int]:
        sides = {data["side"]: child for _, child, data in self.out_edges(node, data=True)}
        return sides["left"], sides["right"]

    def leaves(self) -> list[LeafNode]:
        leaves = [
            cast(LeafNode, data)
            for _, data in self.nodes(data=True)
            if data["type"] == "leaf"
        ]
        return sorted(leaves, key=lambda leaf: leaf["leaf_id"])

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def depth(self) -> int:
        return max(nx.shortest_path_length(self, self.root).values())

    def validate(self):
        """Check the structural invariants; raises StabletreeError."""
        if self.root not in self:
            raise StabletreeError("Tree has no root node")
        if not nx.is_arborescence(self):
            raise StabletreeError("Tree is not an arborescence rooted at 0")
        for node, data in self.nodes(data=True):
            if data["type"] == "split":
                sides = sorted(d["side"] for _, _, d in self.out_edges(node, data=True))
                if sides != ["left", "right"]:
                    raise StabletreeError(f"Split node {node} needs two children")
                if not 0 <= data["feature"] < self.n_features:
                    raise StabletreeError(f"Split node {node} has invalid feature")
                if not math.isfinite(data["value"]):
                    raise StabletreeError(f"Split node {node} has a non-finite value")
            else:
                if self.out_degree(node) != 0:
                    raise StabletreeError(f"Leaf {node} has children")
                if data["n_train"] < 1:
                    raise StabletreeError(f"Leaf {node} has no training rows")
                if not math.isfinite(data["weight"]):
                    raise StabletreeError(f"Leaf {node} has a non-finite weight")
                for key in ("response_variance", "prediction_variance"):
                    if not (math.isfinite(data[key]) and data[key] >= 0):
                        raise StabletreeError(f"Leaf {node} has invalid {key}")
        leaf_ids = [leaf["leaf_id"] for leaf in self.leaves()]
        if leaf_ids != list(range(1, len(leaf_ids) + 1)):
            raise StabletreeError("Leaf ids must be contiguous from 1")

    @cached_property
    def _arrays(self) -> dict[str, np.ndarray]:
        size = self.number_of_nodes()
        arrays = {
            "feature": np.full(size, -1, dtype=np.int64),
            "value": np.zeros(size),
            "left": np.full(size, -1, dtype=np.int64),
            "right": np.full(size, -1, dtype=np.int64),
            "leaf_id": np.zeros(size, dtype=np.int64),
            "weight": np.zeros(size),
        }
        for node, data in self.nodes(data=True):
            if data["type"] == "split":
                arrays["feature"][node] = data["feature"]
                arrays["value"][node] = data["value"]
            else:
                arrays["leaf_id"][node] = data["leaf_id"]
                arrays["weight"][node] = data["weight"]
        for parent, child, side in self.edges(data="side"):
            arrays[side][parent] = child
        return arrays

    def route(self, x) -> np.ndarray:
        """Node index of the leaf each row of x reaches."""
        matrix = as_matrix(x, self.n_features)
        arrays = self._arrays
        nodes = np.zeros(len(matrix), dtype=np.int64)
        active = arrays["feature"][nodes] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            current = nodes[rows]
            go_left = matrix[rows, arrays["feature"][current]] <= arrays["value"][current]
            nodes[rows] = np.where(
                go_left, arrays["left"][current], arrays["right"][current]
            )
            active = arrays["feature"][nodes] >= 0
        return nodes

    def map_to_leaf(self, x) -> int | np.ndarray:
        """q(x): leaf id for a feature vector, or an array of ids for a matrix."""
        leaf_ids = self._arrays["leaf_id"][self.route(x)]
        return int(leaf_ids[0]) if np.ndim(x) == 1 else leaf_ids

    def predict(self, x) -> float | np.ndarray:
        """f(x) = weight of leaf q(x)."""
        weights = self._arrays["weight"][self.route(x)]
        return float(weights[0]) if np.ndim(x) == 1 else weights

    def leaf_statistics(self, x) -> tuple[np.ndarray, np.ndarray]:
        """(n_train, prediction_variance) of the leaf each row of x reaches."""
        leaves = self.leaves()
        n_train = np.array([leaf["n_train"] for leaf in leaves], dtype=np.float64)
        variance = np.array([leaf["prediction_variance"] for leaf in leaves])
        index = self._arrays["leaf_id"][self.route(x)] - 1
        return n_train[index], variance[index]

    def save(self, path: Path | str):
        Path(path).write_bytes(serialize(self))

    @classmethod
    def load(cls, path: Path | str) -> "TreeModel":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"No such model file: {path}")
        return deserialize(path.read_bytes())


def build_tree(
    nodes: list[SplitNode | LeafNode], feature_names: list[str], meta: FitMeta
) -> TreeModel:
    """Assemble a frozen TreeModel from a pre-order node list."""
    tree = TreeModel()
    tree.graph["feature_names"] = list(feature_names)
    tree.graph["meta"] = meta
    stack: list[tuple[int, Literal["left", "right"]]] = []
    for node, data in enumerate(nodes):
        tree.add_node(node, **data)
        if stack:
            parent, side = stack.pop()
            tree.add_edge(parent, node, side=side)
        if data["type"] == "split":
            stack.append((node, "right"))
            stack.append((node, "left"))
    if stack:
        raise StabletreeError("Pre-order node list ends before all children exist")
    tree.validate()
    return cast(TreeModel, nx.freeze(tree))


def preorder(tree: TreeModel) -> list[SplitNode | LeafNode]:
    nodes = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        data = tree.nodes[node]
        nodes.append(data)
        if data["type"] == "split":
            left, right = tree.children(node)
            stack.extend([right, left])
    return nodes


def serialize(tree: TreeModel) -> bytes:
    """UTF-8 JSON text, one node per line, floats with 17 significant digits."""
    meta = tree.meta
    meta_text = (
        f'{{"loss": {json.dumps(meta["loss"])}, '
        f'"alpha": {format_float(meta["alpha"])}, '
        f'"beta": {format_float(meta["beta"])}, '
        f'"epsilon": {format_float(meta["epsilon"])}, '
        f'"c": {format_float(meta["c"])}, '
        f'"seed": {int(meta["seed"])}, '
        f'"feature_names": {json.dumps(tree.feature_names)}}}'
    )
    lines = []
    for data in preorder(tree):
        if data["type"] == "split":
            lines.append(
                f'{{"split": {{"feature": {int(data["feature"])}, '
                f'"value": {format_float(data["value"])}}}}}'
            )
        else:
            lines.append(
                f'{{"leaf": {{"id": {int(data["leaf_id"])}, '
                f'"weight": {format_float(data["weight"])}, '
                f'"n": {int(data["n_train"])}, '
                f'"var_y": {format_float(data["response_variance"])}, '
                f'"var_w": {format_float(data["prediction_variance"])}}}}}'
            )
    text = '{"meta": ' + meta_text + ',\n "nodes": [\n  ' + ",\n  ".join(lines)
    return (text + "\n ]}\n").encode("utf-8")


_NODE_START = re.compile(r'\{\s*"(?:split|leaf)"\s*:')


def deserialize(data: bytes) -> TreeModel:
    """Inverse of `serialize`; raises ModelParseError with a byte offset."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ModelParseError("Model file is not UTF-8", e.start)
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError(e.msg, len(text[: e.pos].encode("utf-8")))

    def byte_offset(char_pos: int) -> int:
        return len(text[:char_pos].encode("utf-8"))

    starts = [byte_offset(m.start()) for m in _NODE_START.finditer(text)]
    if not isinstance(document, dict) or not isinstance(document.get("meta"), dict):
        raise ModelParseError("Missing 'meta' object", 0)
    if not isinstance(document.get("nodes"), list) or not document["nodes"]:
        raise ModelParseError("Missing or empty 'nodes' list", 0)

    raw_meta = document["meta"]
    try:
        meta = FitMeta(
            loss=str(raw_meta["loss"]),
            alpha=float(raw_meta["alpha"]),
            beta=float(raw_meta["beta"]),
            epsilon=float(raw_meta["epsilon"]),
            c=float(raw_meta["c"]),
            seed=int(raw_meta["seed"]),
        )
        feature_names = [str(name) for name in raw_meta["feature_names"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ModelParseError(f"Invalid meta field {e}", 0)

    nodes: list[SplitNode | LeafNode] = []
    pending = 1  # children still expected, in pre-order
    for i, raw in enumerate(document["nodes"]):
        offset = starts[i] if i < len(starts) else 0
        if pending == 0:
            raise ModelParseError("Unexpected node after a complete tree", offset)
        try:
            if "split" in raw:
                split = raw["split"]
                nodes.append(
                    SplitNode(
                        type="split",
                        feature=int(split["feature"]),
                        value=float(split["value"]),
                    )
                )
                pending += 1
            else:
                leaf = raw["leaf"]
                nodes.append(
                    LeafNode(
                        type="leaf",
                        leaf_id=int(leaf["id"]),
                        weight=float(leaf["weight"]),
                        n_train=int(leaf["n"]),
                        response_variance=float(leaf["var_y"]),
                        prediction_variance=float(leaf["var_w"]),
                    )
                )
                pending -= 1
        except (KeyError, TypeError, ValueError) as e:
            raise ModelParseError(f"Invalid node field {e}", offset)
        fields = dict(nodes[-1])
        for key in ("value", "weight", "response_variance", "prediction_variance"):
            if key in fields and not math.isfinite(fields[key]):
                raise ModelParseError(f"Non-finite node {key}", offset)
    if pending:
        raise ModelParseError("Node list ends before all children exist", len(data))
    try:
        return build_tree(nodes, feature_names, meta)
    except StabletreeError as e:
        raise ModelParseError(str(e), 0)
