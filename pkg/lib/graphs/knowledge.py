"""
Triple knowledge base, gazetteer entity recognition and the expansion of the
vocabulary graph with entity nodes reached within a few KB hops.

KB file (tab separated, ``#`` comments and blank lines ignored)::

    E   C0001   kartagener's syndrome
    T   C0001   is_a    C0002
"""
import enum
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np
from loguru import logger

from ..datasets.vocab import tokenize
from ..utils.errors import ConfigError, ConsistencyError, KnowledgeBaseError

EOP = 'EOP'
ANCHOR = 'anchor'


class RelationType(str, enum.Enum):
    diseases_syndromes = 'diseases_syndromes'
    dosage = 'dosage'
    side_effects = 'side_effects'
    drug_interaction = 'drug_interaction'
    is_a = 'is_a'
    treats = 'treats'
    caused_by = 'caused_by'


def parse_relations(names):
    """Relation names -> set of RelationType; empty or None means every type."""
    if not names:
        return frozenset(RelationType)
    try:
        return frozenset(RelationType(n) for n in names)
    except ValueError as e:
        raise ConfigError(str(e))


class KnowledgeBase(object):
    def __init__(self, entities, triples):
        self.entities = OrderedDict((eid, list(forms)) for eid, forms in entities.items())
        self.triples = tuple(sorted(set(triples), key=lambda t: (t[0], t[1].value, t[2])))
        for head, _, tail in self.triples:
            assert head in self.entities and tail in self.entities, f'dangling triple {head} -> {tail}'

    def __repr__(self):
        return f'KnowledgeBase(entities={len(self.entities)}, triples={len(self.triples)})'

    @cached_property
    def entity_ids(self):
        return sorted(self.entities)

    @cached_property
    def _ordinals(self):
        return {eid: k for k, eid in enumerate(self.entity_ids)}

    def ordinal(self, entity_id):
        return self._ordinals[entity_id]

    def canonical(self, entity_id):
        return self.entities[entity_id][0]

    def neighbors(self, entity_id, relations=None):
        """Entities sharing a triple with ``entity_id`` in either direction, sorted by id."""
        relations = parse_relations(relations) if not isinstance(relations, frozenset) else relations
        return sorted({t if h == entity_id else h
                       for h, r, t in self._incident.get(entity_id, ()) if r in relations} - {entity_id})

    @cached_property
    def _incident(self):
        incident = {}
        for triple in self.triples:
            incident.setdefault(triple[0], []).append(triple)
            incident.setdefault(triple[2], []).append(triple)
        return incident

    @cached_property
    def gazetteer(self):
        """Word trie over tokenized surface forms; leaves keep the entity ids under EOP."""
        trie = dict()
        for eid, forms in self.entities.items():
            for form in forms:
                node = trie
                for token in tokenize(form):
                    node = node.setdefault(token, dict())
                node.setdefault(EOP, set()).add(eid)
        return trie


def load_kb(path):
    entities = OrderedDict()
    triples = []
    refs = []
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip('\r\n')
            if not line.strip() or line.startswith('#'):
                continue
            cells = line.split('\t')
            kind = cells[0]
            if kind == 'E':
                if len(cells) != 3:
                    raise KnowledgeBaseError(f'entity line needs 3 fields, got {len(cells)}', path=path, line=lineno)
                eid, surface = cells[1].strip(), cells[2].strip()
                if not eid or not tokenize(surface):
                    raise KnowledgeBaseError('empty entity id or surface form', path=path, line=lineno)
                forms = entities.setdefault(eid, [])
                if surface not in forms:
                    forms.append(surface)
            elif kind == 'T':
                if len(cells) != 4:
                    raise KnowledgeBaseError(f'triple line needs 4 fields, got {len(cells)}', path=path, line=lineno)
                head, relation, tail = cells[1].strip(), cells[2].strip(), cells[3].strip()
                try:
                    relation = RelationType(relation)
                except ValueError:
                    raise KnowledgeBaseError(f'unknown relation {relation!r}', path=path, line=lineno)
                triples.append((head, relation, tail))
                refs.append(lineno)
            else:
                raise KnowledgeBaseError(f'unknown record kind {kind!r}', path=path, line=lineno)
    for (head, _, tail), lineno in zip(triples, refs):
        for eid in (head, tail):
            if eid not in entities:
                raise KnowledgeBaseError(f'triple references undefined entity {eid!r}', path=path, line=lineno)
    kb = KnowledgeBase(entities, triples)
    logger.info(f'knowledge base {path}: {len(kb.entities)} entities, {len(kb.triples)} triples')
    return kb


@dataclass(frozen=True)
class EntityMention:
    entity_id: str
    surface: str
    start: int
    end: int
    source: str
    tokens: Tuple[str, ...] = ()


def _match(trie, tokens, start):
    """Longest surface form starting at ``start``: (end, entity id) or None."""
    node, best = trie, None
    for k in range(start, len(tokens)):
        node = node.get(tokens[k])
        if node is None:
            break
        if EOP in node:
            # ambiguous surface forms resolve to the smallest entity id
            best = (k + 1, min(node[EOP]))
    return best


def recognize_entities(pair, kb):
    """Leftmost-longest gazetteer matches, premise mentions first."""
    mentions = []
    trie = kb.gazetteer
    for source, tokens in (('premise', pair.premise_tokens), ('hypothesis', pair.hypothesis_tokens)):
        i = 0
        while i < len(tokens):
            found = _match(trie, tokens, i)
            if found is None:
                i += 1
                continue
            end, eid = found
            span = tuple(tokens[i:end])
            mentions.append(EntityMention(entity_id=eid, surface=' '.join(span), start=i, end=end,
                                          source=source, tokens=span))
            i = end
    return mentions


@dataclass(frozen=True)
class ExpandedGraph:
    base: object
    added_nodes: tuple = ()
    added_edges: tuple = ()
    entity_nodes: dict = field(default_factory=dict)
    distances: dict = field(default_factory=dict)

    @property
    def vocab_size(self):
        return self.base.node_count

    @property
    def node_count(self):
        return self.base.node_count + len(self.added_nodes)

    def node_of(self, entity_id):
        return self.entity_nodes.get(entity_id)

    def edge_arrays(self):
        """(i, j, w) arrays whose entries sum to adjacency().

        Added edges between the same nodes keep the larger weight; one that
        lands on a base edge contributes only its excess over the base weight.
        """
        bi, bj, bw = self.base.edge_arrays()
        merged = OrderedDict()
        for i, j, w, _ in self.added_edges:
            key = (min(i, j), max(i, j))
            prev = merged.get(key)
            if prev is None:
                prev = self.base.weight(*key) or 0.0
            merged[key] = max(prev, w)
        extra = [(i, j, w - (self.base.weight(i, j) or 0.0)) for (i, j), w in merged.items()]
        extra = [e for e in extra if e[2] != 0.0]
        if not extra:
            return bi, bj, bw
        ei, ej, ew = (np.asarray(col) for col in zip(*extra))
        return (np.concatenate([bi, ei.astype(np.int64)]), np.concatenate([bj, ej.astype(np.int64)]),
                np.concatenate([bw, ew.astype(np.float64)]))

    def adjacency(self):
        n = self.node_count
        adj = np.zeros((n, n))
        adj[:self.vocab_size, :self.vocab_size] = self.base.adjacency()
        for i, j, w, _ in self.added_edges:
            # an added edge over an existing one keeps the larger weight
            adj[i, j] = adj[j, i] = max(adj[i, j], w)
        return adj


def _entity_node(kb, vocab, entity_id):
    """Word index when the canonical surface is one in-vocabulary word, else None."""
    tokens = tokenize(kb.canonical(entity_id))
    if len(tokens) == 1 and tokens[0] in vocab:
        index = vocab.index(tokens[0])
        if not vocab.is_reserved(index):
            return index
    return None


def reachable(kb, seeds, hops, relations=None):
    """Breadth-first distances from ``seeds`` over undirected triples, in discovery order."""
    relations = parse_relations(relations)
    dist = OrderedDict()
    queue = deque()
    for eid in seeds:
        if eid not in dist:
            dist[eid] = 0
            queue.append(eid)
    while queue:
        eid = queue.popleft()
        if dist[eid] >= hops:
            continue
        for nb in kb.neighbors(eid, relations):
            if nb not in dist:
                dist[nb] = dist[eid] + 1
                queue.append(nb)
    return dist


def expand_graph(graph, kb, mentions, vocab, hops=2, relations=None):
    """Add the mentioned entities and their ``hops``-neighbourhood to ``graph``.

    An entity whose canonical surface is a single in-vocabulary word reuses
    that word node; any other reached entity gets a new node after the
    vocabulary nodes. Triples with both ends reached and at least one end
    closer than ``hops`` become edges of weight 1.0 tagged by relation, and
    every mention is anchored to the word nodes of its span.
    """
    if hops < 0:
        raise ConfigError(f'hops must be >= 0, got {hops}')
    if not mentions:
        return ExpandedGraph(base=graph)
    relations = parse_relations(relations)
    dist = reachable(kb, [m.entity_id for m in mentions], hops, relations)

    entity_nodes, added = OrderedDict(), []
    for eid in dist:
        index = _entity_node(kb, vocab, eid)
        if index is None:
            index = graph.node_count + len(added)
            added.append(eid)
        entity_nodes[eid] = index

    edges, seen = [], set()

    def add_edge(u, v, tag):
        if u == v:
            return
        key = (min(u, v), max(u, v), tag)
        if key not in seen:
            seen.add(key)
            edges.append((key[0], key[1], 1.0, tag))

    for head, relation, tail in kb.triples:
        if relation not in relations or head not in dist or tail not in dist:
            continue
        if min(dist[head], dist[tail]) < hops:
            add_edge(entity_nodes[head], entity_nodes[tail], relation.value)
    for mention in mentions:
        node = entity_nodes[mention.entity_id]
        for token in mention.tokens:
            if token in vocab and not vocab.is_reserved(vocab.index(token)):
                add_edge(node, vocab.index(token), ANCHOR)

    return ExpandedGraph(base=graph, added_nodes=tuple(added), added_edges=tuple(edges),
                         entity_nodes=dict(entity_nodes), distances=dict(dist))


def entity_input_matrix(mentions, g):
    """One-hot rows (m x N) at the node of each mention's entity."""
    matrix = np.zeros((len(mentions), g.node_count))
    for k, mention in enumerate(mentions):
        node = g.node_of(mention.entity_id)
        if node is None:
            raise ConsistencyError(f'mention {mention.surface!r} ({mention.entity_id}) has no node in the graph')
        matrix[k, node] = 1.0
    return matrix


def word_input_matrix(mentions, vocab, node_count):
    """Rows for the unexpanded graph: one per in-vocabulary token of each mention span."""
    rows = []
    for mention in mentions:
        for token in mention.tokens:
            if token in vocab and not vocab.is_reserved(vocab.index(token)):
                row = np.zeros(node_count)
                row[vocab.index(token)] = 1.0
                rows.append(row)
    return np.stack(rows) if rows else np.zeros((0, node_count))
