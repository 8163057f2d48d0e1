from dataclasses import dataclass

from ..graphs import knowledge
from ..utils import autodiff as ad
from ..utils.autodiff import DropoutContext, Module, counter_rng
from ..utils.errors import ConfigError
from .aggregator import Aggregator, Classifier, aggregator_config, decide, probabilities
from .doc_encoder import DocumentEncoder, encoder_config
from .gxk_encoder import GxKEncoder, compact, param_rows, propagate


@dataclass
class GraphInputs:
    """Mentions of one pair and the compact M A_hat the GCN reads."""
    mentions: list
    propagated: object
    added_nodes: int = 0

    @property
    def node_count(self):
        return self.propagated.node_count


class SemKGN(Module):
    """Document encoder + knowledge-expanded GCN fused by the attention aggregator.

    cfg.ablation.no_graph_encoder drops the graph branch entirely (the KB is
    never consulted); cfg.ablation.no_kg_expansion runs the GCN over the
    plain NPMI graph, reading it at the word nodes of each mention span.
    """

    def __init__(self, cfg, vocab, graph=None, kb=None, precomputed=None):
        super().__init__()
        self.cfg = cfg
        self.vocab = vocab
        self.graph = graph
        self.kb = kb
        self.precomputed = precomputed
        self.use_graph = not cfg.ablation.no_graph_encoder
        self.use_kg = self.use_graph and not cfg.ablation.no_kg_expansion
        if self.use_graph and graph is None:
            raise ConfigError('the graph encoder needs a vocabulary graph')
        if self.use_kg and kb is None:
            raise ConfigError('knowledge expansion needs a knowledge base')
        self.relations = knowledge.parse_relations(list(cfg.graph.relations))

        rng = counter_rng(cfg.seed, 'init')
        enc = encoder_config(cfg)
        if precomputed is None:
            self.doc = DocumentEncoder(vocab.size, enc, rng, scope='doc')
        if self.use_graph:
            n_entities = len(kb.entities) if self.use_kg else 0
            self.gcn = GxKEncoder(vocab.size, n_entities, cfg.model.gcn.hidden_dim, cfg.model.gcn.out_dim, rng)
        self.agg = Aggregator(cfg.model.gcn.out_dim, aggregator_config(cfg), rng, scope='agg')
        self.clf = Classifier(enc.model_dim, rng, std=cfg.model.init_std)
        self._graph_cache = {}

    # ------------------------------------------------------------------ graph side
    def graph_inputs(self, pair):
        """Mentions and the compact M A_hat of one pair (cached).

        Only the m x N product is kept, never the N x N adjacency.
        """
        if pair in self._graph_cache:
            return self._graph_cache[pair]
        kb = self.kb
        mentions = knowledge.recognize_entities(pair, kb) if kb is not None else []
        if self.use_kg:
            g = knowledge.expand_graph(self.graph, kb, mentions, self.vocab, hops=self.cfg.graph.hops,
                                       relations=self.relations)
            M, rows = knowledge.entity_input_matrix(mentions, g), param_rows(g, kb)
        else:
            g = self.graph
            M, rows = knowledge.word_input_matrix(mentions, self.vocab, g.node_count), param_rows(g)
        inputs = GraphInputs(mentions=mentions, propagated=compact(propagate(M, g, self.cfg.graph.adj_mode), rows),
                             added_nodes=len(getattr(g, 'added_nodes', ())))
        self._graph_cache[pair] = inputs
        return inputs

    def prepare(self, pairs):
        if self.use_graph:
            for pair in pairs:
                self.graph_inputs(pair)

    # ------------------------------------------------------------------ forward
    def encode(self, sample, ctx=None):
        if self.precomputed is not None:
            return self.precomputed(sample['pair'].id)
        return self.doc(sample['encoded'], ctx)

    def forward(self, sample, ctx=None):
        """Logits [1 x 2] of one sample (dict with 'pair' and 'encoded')."""
        doc = self.encode(sample, ctx)
        graph_feats = None
        if self.use_graph:
            inputs = self.graph_inputs(sample['pair'])
            graph_feats = self.gcn(inputs.propagated)
        F = self.agg(doc, graph_feats, ctx)
        return self.clf(F)

    def loss(self, samples, step=0):
        """Mean cross-entropy over a batch; dropout keyed by (seed, step, sample index)."""
        logits, labels = [], []
        for k, sample in enumerate(samples):
            ctx = DropoutContext(self.cfg.seed, step, sample.get('index', k))
            logits.append(self.forward(sample, ctx))
            labels.append(sample['pair'].label_id)
        return ad.cross_entropy(ad.concat(logits, axis=0), labels)

    def predict_proba(self, sample):
        """p(entail) with dropout off; the training flag is restored afterwards."""
        was_training = self.training
        self.eval()
        try:
            with ad.no_grad():
                logits = self.forward(sample)
        finally:
            self.train(was_training)
        return float(probabilities(logits.data)[0])

    def predict(self, sample, threshold=0.5):
        p_entail = self.predict_proba(sample)
        return decide(p_entail, threshold), p_entail
