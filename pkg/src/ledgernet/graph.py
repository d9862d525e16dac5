"""Domain model: addresses, transactions, and the account-interaction graph.

The graph is undirected and simple.  Every transaction between two distinct
accounts contributes to exactly one edge; repeat transactions on the same
pair increase that edge's transfer total and transaction count instead of
adding parallel edges.  Directed activity (how many transactions a node sent
or received) is kept in per-node counters, separate from the undirected
structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import AddressError


class Chain(str, Enum):
    BITCOIN = "bitcoin"
    ETHEREUM = "ethereum"


_HEX_DIGITS = frozenset("0123456789abcdef")


@dataclass(frozen=True)
class AddressKey:
    """A canonical account identifier on one chain."""

    chain: Chain
    key: str


def canonicalize_address(raw: str, chain: Chain | str) -> AddressKey:
    """Normalize a raw address string so one account maps to one node.

    Ethereum addresses become lowercase ``0x``-prefixed 40-digit hex (the
    prefix may be missing on input).  Bitcoin addresses are kept verbatim
    apart from trimming surrounding whitespace.
    """
    try:
        chain = Chain(chain)
    except ValueError as exc:
        raise AddressError(f"unknown chain: {chain!r}") from exc
    if not isinstance(raw, str) or not raw.strip():
        raise AddressError(f"empty {chain.value} address")
    if chain is Chain.ETHEREUM:
        text = raw.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if len(text) != 40 or not set(text) <= _HEX_DIGITS:
            raise AddressError(f"malformed ethereum address: {raw!r}")
        return AddressKey(chain, "0x" + text)
    text = raw.strip()
    if any(c.isspace() for c in text):
        raise AddressError(f"malformed bitcoin address: {raw!r}")
    return AddressKey(chain, text)


@dataclass(frozen=True)
class Transaction:
    """One directed value transfer recorded on the ledger.

    ``sender`` is None for block rewards and similar transactions that have
    no sending account.  Amounts are integers in the chain's base unit
    (wei / satoshi).
    """

    sender: AddressKey | None
    recipient: AddressKey
    amount: int
    block_height: int
    timestamp: int

    def __post_init__(self):
        if self.amount < 0:
            raise ValueError(f"negative amount: {self.amount}")
        if self.block_height < 0:
            raise ValueError(f"negative block height: {self.block_height}")


@dataclass
class EdgeData:
    """Aggregate of all transactions between one unordered pair of nodes."""

    amount: int = 0
    tx_count: int = 0


class InteractionGraph:
    """Undirected simple graph over addresses, with directed activity counters.

    Nodes carry dense 1-based integer IDs assigned in first-seen order (the
    Pajek convention).  Internally the index 0 slot of every per-node list is
    an unused placeholder so public IDs index directly.
    """

    def __init__(self, chain: Chain | str | None = None):
        self.chain = Chain(chain) if chain is not None else None
        self._ids: dict[str, int] = {}
        self.keys: list[str | None] = [None]
        self.adj: list[set[int]] = [set()]
        self.in_tx: list[int] = [0]
        self.out_tx: list[int] = [0]
        self.edges: dict[tuple[int, int], EdgeData] = {}

    @property
    def node_count(self) -> int:
        return len(self.keys) - 1

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def node_ids(self) -> range:
        return range(1, self.node_count + 1)

    def intern_node(self, key: str) -> int:
        """Return the node ID for ``key``, registering it if unseen."""
        node = self._ids.get(key)
        if node is None:
            node = len(self.keys)
            self._ids[key] = node
            self.keys.append(key)
            self.adj.append(set())
            self.in_tx.append(0)
            self.out_tx.append(0)
        return node

    def node_id(self, key: str) -> int:
        return self._ids[key]

    def __contains__(self, key: str) -> bool:
        return key in self._ids

    def key_of(self, node: int) -> str:
        if not 1 <= node <= self.node_count:
            raise LookupError(f"node {node} not in graph")
        return self.keys[node]

    def degree(self, node: int) -> int:
        if not 1 <= node <= self.node_count:
            raise LookupError(f"node {node} not in graph")
        return len(self.adj[node])

    def neighbors(self, node: int) -> set[int]:
        if not 1 <= node <= self.node_count:
            raise LookupError(f"node {node} not in graph")
        return self.adj[node]

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def record_edge(self, a: int, b: int, amount: int = 0, tx_count: int = 0) -> None:
        """Add the unordered edge {a, b} or fold more volume into it."""
        if a == b:
            raise ValueError(f"self-loop on node {a}")
        pair = (a, b) if a < b else (b, a)
        data = self.edges.get(pair)
        if data is None:
            data = self.edges[pair] = EdgeData()
            self.adj[a].add(b)
            self.adj[b].add(a)
        data.amount += amount
        data.tx_count += tx_count

    def add_transaction(self, tx: Transaction) -> None:
        """Apply one transaction: register endpoints, update counters and edge.

        The sender is interned first, matching the sender-recipient reading
        order of the raw triples.  Self-transfers and senderless transactions
        register nodes and bump counters but contribute no edge, keeping the
        graph simple.
        """
        if tx.sender is None:
            recipient = self.intern_node(tx.recipient.key)
            self.in_tx[recipient] += 1
            return
        sender = self.intern_node(tx.sender.key)
        recipient = self.intern_node(tx.recipient.key)
        self.out_tx[sender] += 1
        self.in_tx[recipient] += 1
        if sender == recipient:
            return
        self.record_edge(sender, recipient, tx.amount, 1)

    def node_keys(self) -> list[str]:
        """Canonical keys in ID order."""
        return self.keys[1:]

    def edge_triples(self) -> list[tuple[int, int, int]]:
        """Edges as (low_id, high_id, aggregated_amount), sorted by ID pair."""
        return [(a, b, self.edges[(a, b)].amount) for a, b in sorted(self.edges)]


def build_graph(transactions: Iterable[Transaction],
                chain: Chain | str | None = None) -> InteractionGraph:
    """Fold a transaction stream into a fresh interaction graph."""
    graph = InteractionGraph(chain)
    for tx in transactions:
        graph.add_transaction(tx)
    return graph
