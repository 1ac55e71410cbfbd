#pragma once

#include <cstddef>
#include <vector>

#include "kerl/graph.hpp"
#include "kerl/rng.hpp"
#include "kerl/tensor.hpp"

// Gated graph neural network over the knowledge graph. Node states are
// initialized from per-category classifier scores, propagated for a fixed
// number of GRU-style steps using both edge directions, then mapped through
// a per-node output layer and concatenated into the knowledge
// representation. Forward and reverse passes are hand-written; everything
// runs in doubles.

namespace kerl::ggnn {

struct GgnnConfig {
    std::size_t n = 10;        // hidden-state dimension
    std::size_t out_dim = 5;   // per-node output dimension
    std::size_t t_steps = 5;   // propagation iterations
};

struct GgnnParams {
    Mat w_z, w_r, w;  // n x 2n, aggregate-to-gate
    Mat u_z, u_r, u;  // n x n, state-to-gate
    Vec b;            // 2n, aggregation bias
    Mat o_w;          // out_dim x 2n, output layer on [h_T | x]
    Vec o_b;          // out_dim

    static GgnnParams zeros(const GgnnConfig& cfg);
    static GgnnParams init(const GgnnConfig& cfg, Rng& rng);

    template <class F>
    void visit(F&& f) {
        f("w_z", w_z); f("w_r", w_r); f("w", w);
        f("u_z", u_z); f("u_r", u_r); f("u", u);
        f("b", b);
        f("o_w", o_w); f("o_b", o_b);
    }
    template <class F>
    void visit(F&& f) const {
        f("w_z", w_z); f("w_r", w_r); f("w", w);
        f("u_z", u_z); f("u_r", u_r); f("u", u);
        f("b", b);
        f("o_w", o_w); f("o_b", o_b);
    }
};

struct NodeStates {
    Mat h;  // |V| x n
    Mat x;  // |V| x n
};

struct KnowledgeRepr {
    Vec f_g;  // |V| * out_dim
};

// Per-step caches needed by the reverse pass.
struct StepCache {
    Mat h_prev;  // |V| x n
    Mat a;       // |V| x 2n, aggregate + bias
    Mat z, r, hcand;
};

struct Tape {
    Vec scores;
    NodeStates states;  // final
    std::vector<StepCache> steps;
    Vec f_g;
};

// State initialization: category node i gets [s_i, 0...], attribute
// nodes get zeros, h = x. Scores must lie in [0,1].
NodeStates init_states(const Vec& scores, const graph::KnowledgeGraph& g, const GgnnConfig& cfg);

// One propagation step; cache, when given, receives the intermediates.
NodeStates propagate_step(const NodeStates& states, const Mat& a_full, const GgnnParams& p,
                          StepCache* cache = nullptr);

// T steps + output network; tape, when given, is filled for backward().
std::pair<NodeStates, KnowledgeRepr> run(const graph::KnowledgeGraph& g, const Vec& scores,
                                         const GgnnParams& p, const GgnnConfig& cfg,
                                         Tape* tape = nullptr);

// Core rollout on a prebuilt adjacency

std::pair<NodeStates, KnowledgeRepr> forward(const Mat& a_full, std::size_t num_categories,
                                             const Vec& scores, const GgnnParams& p,
                                             const GgnnConfig& cfg, Tape* tape = nullptr);

// Reverse pass through the T-step recurrence and output network. Parameter
// gradients accumulate into grads; returns d(loss)/d(scores).
Vec backward(const Tape& tape, const Mat& a_full, std::size_t num_categories,
             const GgnnParams& p, const GgnnConfig& cfg, const Vec& upstream_fg,
             GgnnParams& grads);

}  // namespace kerl::ggnn
