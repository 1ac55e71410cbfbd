#include "kerl/ggnn.hpp"

#include <cmath>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"

namespace kerl::ggnn {

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// AGG row v = [sum_u a_full[u,v] * h_u  |  sum_u a_full[u,V+v] * h_u]
void aggregate(const Mat& h, const Mat& a_full, Mat& agg) {
    const auto& ks = kernels::ops();
    const std::size_t V = h.rows;
    const std::size_t n = h.cols;
    agg.zero();
    for (std::size_t u = 0; u < V; ++u) {
        const double* hrow = h.row(u);
        const double* arow = a_full.row(u);
        for (std::size_t v = 0; v < V; ++v) {
            double cf = arow[v];
            if (cf != 0.0) ks.axpy(cf, hrow, agg.row(v), n);
            double cr = arow[V + v];
            if (cr != 0.0) ks.axpy(cr, hrow, agg.row(v) + n, n);
        }
    }
}

// transpose of aggregate(): scatter gradient on AGG back onto the states
void aggregate_backward(const Mat& dagg, const Mat& a_full, Mat& dh) {
    const auto& ks = kernels::ops();
    const std::size_t V = dh.rows;
    const std::size_t n = dh.cols;
    for (std::size_t u = 0; u < V; ++u) {
        double* drow = dh.row(u);
        const double* arow = a_full.row(u);
        for (std::size_t v = 0; v < V; ++v) {
            double cf = arow[v];
            if (cf != 0.0) ks.axpy(cf, dagg.row(v), drow, n);
            double cr = arow[V + v];
            if (cr != 0.0) ks.axpy(cr, dagg.row(v) + n, drow, n);
        }
    }
}

}  // namespace

GgnnParams GgnnParams::zeros(const GgnnConfig& cfg) {
    GgnnParams p;
    const std::size_t n = cfg.n;
    p.w_z = Mat(n, 2 * n);
    p.w_r = Mat(n, 2 * n);
    p.w = Mat(n, 2 * n);
    p.u_z = Mat(n, n);
    p.u_r = Mat(n, n);
    p.u = Mat(n, n);
    p.b = Vec(2 * n, 0.0);
    p.o_w = Mat(cfg.out_dim, 2 * n);
    p.o_b = Vec(cfg.out_dim, 0.0);
    return p;
}

GgnnParams GgnnParams::init(const GgnnConfig& cfg, Rng& rng) {
    GgnnParams p = zeros(cfg);
    double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.n));
    for (Mat* m : {&p.w_z, &p.w_r, &p.w, &p.u_z, &p.u_r, &p.u})
        for (double& v : m->a) v = rng.uniform(-bound, bound);
    // output layer starts at zero: the knowledge vector enters downstream
    // consumers silently and grows only as the loss asks for it, instead of
    // swamping them with propagation noise from the random recurrence
    return p;
}

NodeStates init_states(const Vec& scores, const graph::KnowledgeGraph& g, const GgnnConfig& cfg) {
    const std::size_t C = g.num_categories();
    require(scores.size() == C, "init_states: score vector length != category count");
    for (std::size_t i = 0; i < C; ++i)
        if (!(scores[i] >= 0.0 && scores[i] <= 1.0))
            throw NumericError(msg("init_states: score ", i, " = ", scores[i],
                                   " outside [0,1]"));
    NodeStates st;
    st.x = Mat(g.num_nodes(), cfg.n);
    for (std::size_t i = 0; i < C; ++i) st.x.at(i, 0) = scores[i];
    st.h = st.x;
    return st;
}

NodeStates propagate_step(const NodeStates& states, const Mat& a_full, const GgnnParams& p,
                          StepCache* cache) {
    const auto& ks = kernels::ops();
    const std::size_t V = states.h.rows;
    const std::size_t n = states.h.cols;
    require(a_full.rows == V && a_full.cols == 2 * V,
            "propagate_step: adjacency shape mismatch");
    require(p.w_z.rows == n && p.w_z.cols == 2 * n, "propagate_step: parameter shape mismatch");

    Mat agg(V, 2 * n);
    aggregate(states.h, a_full, agg);
    for (std::size_t v = 0; v < V; ++v) ks.axpy(1.0, p.b.data(), agg.row(v), 2 * n);

    Mat z(V, n), r(V, n), hcand(V, n);
    NodeStates out;
    out.x = states.x;
    out.h = Mat(V, n);

    Vec pre(n), rh(n);
    for (std::size_t v = 0; v < V; ++v) {
        const double* a_v = agg.row(v);
        const double* h_v = states.h.row(v);

        ks.matvec(p.w_z.a.data(), a_v, pre.data(), n, 2 * n, false);
        ks.matvec(p.u_z.a.data(), h_v, pre.data(), n, n, true);
        for (std::size_t i = 0; i < n; ++i) z.row(v)[i] = sigmoid(pre[i]);

        ks.matvec(p.w_r.a.data(), a_v, pre.data(), n, 2 * n, false);
        ks.matvec(p.u_r.a.data(), h_v, pre.data(), n, n, true);
        for (std::size_t i = 0; i < n; ++i) r.row(v)[i] = sigmoid(pre[i]);

        for (std::size_t i = 0; i < n; ++i) rh[i] = r.row(v)[i] * h_v[i];
        ks.matvec(p.w.a.data(), a_v, pre.data(), n, 2 * n, false);
        ks.matvec(p.u.a.data(), rh.data(), pre.data(), n, n, true);
        for (std::size_t i = 0; i < n; ++i) hcand.row(v)[i] = std::tanh(pre[i]);

        double* h_new = out.h.row(v);
        for (std::size_t i = 0; i < n; ++i) {
            double zi = z.row(v)[i];
            h_new[i] = (1.0 - zi) * h_v[i] + zi * hcand.row(v)[i];
            if (!std::isfinite(h_new[i]))
                throw NumericError(msg("propagate_step: non-finite state at node ", v));
        }
    }

    if (cache) {
        cache->h_prev = states.h;
        cache->a = std::move(agg);
        cache->z = std::move(z);
        cache->r = std::move(r);
        cache->hcand = std::move(hcand);
    }
    return out;
}

std::pair<NodeStates, KnowledgeRepr> forward(const Mat& a_full, std::size_t num_categories,
                                             const Vec& scores, const GgnnParams& p,
                                             const GgnnConfig& cfg, Tape* tape) {
    const auto& ks = kernels::ops();
    const std::size_t V = a_full.rows;
    require(scores.size() == num_categories && num_categories <= V,
            "ggnn::forward: score/category count mismatch");
    for (double s : scores)
        if (!(s >= 0.0 && s <= 1.0)) throw NumericError("ggnn::forward: score outside [0,1]");

    NodeStates st;
    st.x = Mat(V, cfg.n);
    for (std::size_t i = 0; i < num_categories; ++i) st.x.at(i, 0) = scores[i];
    st.h = st.x;

    if (tape) {
        tape->scores = scores;
        tape->steps.clear();
        tape->steps.resize(cfg.t_steps);
    }
    for (std::size_t t = 0; t < cfg.t_steps; ++t)
        st = propagate_step(st, a_full, p, tape ? &tape->steps[t] : nullptr);

    KnowledgeRepr repr;
    repr.f_g.assign(V * cfg.out_dim, 0.0);
    Vec hx(2 * cfg.n);
    for (std::size_t v = 0; v < V; ++v) {
        std::copy(st.h.row(v), st.h.row(v) + cfg.n, hx.data());
        std::copy(st.x.row(v), st.x.row(v) + cfg.n, hx.data() + cfg.n);
        double* o_v = repr.f_g.data() + v * cfg.out_dim;
        ks.matvec(p.o_w.a.data(), hx.data(), o_v, cfg.out_dim, 2 * cfg.n, false);
        ks.axpy(1.0, p.o_b.data(), o_v, cfg.out_dim);
    }

    if (tape) {
        tape->states = st;
        tape->f_g = repr.f_g;
    }
    return {std::move(st), std::move(repr)};
}

std::pair<NodeStates, KnowledgeRepr> run(const graph::KnowledgeGraph& g, const Vec& scores,
                                         const GgnnParams& p, const GgnnConfig& cfg, Tape* tape) {
    graph::AdjacencyPair adj = graph::adjacency(g);
    return forward(adj.a_full, g.num_categories(), scores, p, cfg, tape);
}

Vec backward(const Tape& tape, const Mat& a_full, std::size_t num_categories,
             const GgnnParams& p, const GgnnConfig& cfg, const Vec& upstream_fg,
             GgnnParams& grads) {
    const auto& ks = kernels::ops();
    const std::size_t V = a_full.rows;
    const std::size_t n = cfg.n;
    const std::size_t od = cfg.out_dim;
    require(upstream_fg.size() == V * od, "ggnn::backward: upstream gradient length mismatch");
    require(tape.steps.size() == cfg.t_steps, "ggnn::backward: tape/config step mismatch");

    Mat dh(V, n);  // gradient wrt h^t, walked backwards
    Mat dx(V, n);

    // output network: o_v = o_w [h|x] + o_b
    Vec hx(2 * n), dhx(2 * n);
    for (std::size_t v = 0; v < V; ++v) {
        const double* do_v = upstream_fg.data() + v * od;
        std::copy(tape.states.h.row(v), tape.states.h.row(v) + n, hx.data());
        std::copy(tape.states.x.row(v), tape.states.x.row(v) + n, hx.data() + n);
        ks.ger(do_v, hx.data(), grads.o_w.a.data(), od, 2 * n);
        ks.axpy(1.0, do_v, grads.o_b.data(), od);
        ks.matvec_t(p.o_w.a.data(), do_v, dhx.data(), od, 2 * n, false);
        ks.axpy(1.0, dhx.data(), dh.row(v), n);
        ks.axpy(1.0, dhx.data() + n, dx.row(v), n);
    }

    Vec dz(n), dhc(n), dpre(n), drh(n), da(2 * n), rh(n), tmp(n);
    Mat dagg(V, 2 * n);
    for (std::size_t t = cfg.t_steps; t-- > 0;) {
        const StepCache& sc = tape.steps[t];
        Mat dh_prev(V, n);
        dagg.zero();
        for (std::size_t v = 0; v < V; ++v) {
            const double* g_v = dh.row(v);
            const double* h_v = sc.h_prev.row(v);
            const double* z_v = sc.z.row(v);
            const double* r_v = sc.r.row(v);
            const double* hc_v = sc.hcand.row(v);
            const double* a_v = sc.a.row(v);
            double* dhp = dh_prev.row(v);

            // h^t = (1-z) h^{t-1} + z hcand
            for (std::size_t i = 0; i < n; ++i) {
                dz[i] = g_v[i] * (hc_v[i] - h_v[i]);
                dhc[i] = g_v[i] * z_v[i];
                dhp[i] = g_v[i] * (1.0 - z_v[i]);
            }
            std::fill(da.begin(), da.end(), 0.0);

            // hcand = tanh(W a + U (r . h))
            for (std::size_t i = 0; i < n; ++i) {
                dpre[i] = dhc[i] * (1.0 - hc_v[i] * hc_v[i]);
                rh[i] = r_v[i] * h_v[i];
            }
            ks.ger(dpre.data(), a_v, grads.w.a.data(), n, 2 * n);
            ks.ger(dpre.data(), rh.data(), grads.u.a.data(), n, n);
            ks.matvec_t(p.u.a.data(), dpre.data(), drh.data(), n, n, false);
            ks.matvec_t(p.w.a.data(), dpre.data(), da.data(), n, 2 * n, true);
            for (std::size_t i = 0; i < n; ++i) dhp[i] += drh[i] * r_v[i];

            // r = sigmoid(W_r a + U_r h)
            for (std::size_t i = 0; i < n; ++i)
                dpre[i] = drh[i] * h_v[i] * r_v[i] * (1.0 - r_v[i]);
            ks.ger(dpre.data(), a_v, grads.w_r.a.data(), n, 2 * n);
            ks.ger(dpre.data(), h_v, grads.u_r.a.data(), n, n);
            ks.matvec_t(p.w_r.a.data(), dpre.data(), da.data(), n, 2 * n, true);
            ks.matvec_t(p.u_r.a.data(), dpre.data(), tmp.data(), n, n, false);
            ks.axpy(1.0, tmp.data(), dhp, n);

            // z = sigmoid(W_z a + U_z h)
            for (std::size_t i = 0; i < n; ++i) dpre[i] = dz[i] * z_v[i] * (1.0 - z_v[i]);
            ks.ger(dpre.data(), a_v, grads.w_z.a.data(), n, 2 * n);
            ks.ger(dpre.data(), h_v, grads.u_z.a.data(), n, n);
            ks.matvec_t(p.w_z.a.data(), dpre.data(), da.data(), n, 2 * n, true);
            ks.matvec_t(p.u_z.a.data(), dpre.data(), tmp.data(), n, n, false);
            ks.axpy(1.0, tmp.data(), dhp, n);

            ks.axpy(1.0, da.data(), grads.b.data(), 2 * n);
            std::copy(da.begin(), da.end(), dagg.row(v));
        }
        aggregate_backward(dagg, a_full, dh_prev);
        dh = std::move(dh_prev);
    }

    // h^0 = x
    for (std::size_t v = 0; v < V; ++v) ks.axpy(1.0, dh.row(v), dx.row(v), n);

    Vec dscores(num_categories);
    for (std::size_t i = 0; i < num_categories; ++i) dscores[i] = dx.at(i, 0);
    return dscores;
}

}  // namespace kerl::ggnn
