#include "kerl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <numeric>
#include <utility>

#include <json.hpp>

#include "kerl/kernels.hpp"

namespace kerl::trainer {

using nlohmann::json;

// ---- config -----------------------------------------------------------------

std::string TrainConfig::to_json() const {
    json j;
    j["epochs"] = epochs;
    j["batch"] = batch;
    j["seed"] = seed;
    j["eval_every"] = eval_every;
    j["region_epochs"] = region_epochs;
    j["clip_norm"] = clip_norm;
    j["gate_l1"] = gate_l1;
    j["sgd"] = {{"lr", sgd.lr},
                {"momentum", sgd.momentum},
                {"weight_decay", sgd.weight_decay},
                {"gate_lr_scale", sgd.gate_lr_scale}};
    j["adam"] = {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
    j["model"] = json::parse(model.to_json());
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        TrainConfig c;
        c.epochs = j.value("epochs", c.epochs);
        c.batch = j.value("batch", c.batch);
        c.seed = j.value("seed", c.seed);
        c.eval_every = j.value("eval_every", c.eval_every);
        c.region_epochs = j.value("region_epochs", c.region_epochs);
        c.clip_norm = j.value("clip_norm", c.clip_norm);
        c.gate_l1 = j.value("gate_l1", c.gate_l1);
        if (j.contains("sgd")) {
            const auto& s = j["sgd"];
            c.sgd.lr = s.value("lr", c.sgd.lr);
            c.sgd.momentum = s.value("momentum", c.sgd.momentum);
            c.sgd.gate_lr_scale = s.value("gate_lr_scale", c.sgd.gate_lr_scale);
            c.sgd.weight_decay = s.value("weight_decay", c.sgd.weight_decay);
        }
        if (j.contains("adam")) {
            const auto& a = j["adam"];
            c.adam.lr = a.value("lr", c.adam.lr);
            c.adam.beta1 = a.value("beta1", c.adam.beta1);
            c.adam.beta2 = a.value("beta2", c.adam.beta2);
            c.adam.eps = a.value("eps", c.adam.eps);
        }
        if (j.contains("model")) c.model = model::ModelConfig::from_json(j["model"].dump());
        return c;
    } catch (const json::exception& e) {
        throw ParseError("train config", 0, e.what());
    }
}

// ---- split optimizer ----------------------------------------------------------

namespace {

std::pair<double*, std::size_t> span_of(Mat& m) { return {m.a.data(), m.a.size()}; }
std::pair<double*, std::size_t> span_of(Vec& v) { return {v.data(), v.size()}; }
std::pair<const double*, std::size_t> span_of(const Mat& m) { return {m.a.data(), m.a.size()}; }
std::pair<const double*, std::size_t> span_of(const Vec& v) { return {v.data(), v.size()}; }

bool adam_routed(const std::string& name) { return name.rfind("ggnn.", 0) == 0; }

bool gate_param(const std::string& name) { return name.rfind("fusion.g", 0) == 0; }

std::size_t argmax(const Vec& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

void SplitOptimizer::step(model::KerlModel& params, const model::KerlModel& grads) {
    struct PSpan {
        std::string name;
        double* p;
        std::size_t n;
    };
    struct GSpan {
        std::string name;
        const double* p;
        std::size_t n;
    };
    std::vector<PSpan> ps;
    std::vector<GSpan> gs;
    params.visit_params([&](const std::string& n, auto& t) {
        auto [d, len] = span_of(t);
        ps.push_back({n, d, len});
    });
    grads.visit_params([&](const std::string& n, const auto& t) {
        auto [d, len] = span_of(t);
        gs.push_back({n, d, len});
    });
    require(ps.size() == gs.size(), "optimizer: parameter/gradient structure mismatch");

    bool saw_adam = false;
    for (const auto& s : ps)
        if (s.n > 0 && adam_routed(s.name)) saw_adam = true;
    if (saw_adam) ++adam_t_;

    for (std::size_t i = 0; i < ps.size(); ++i) {
        require(ps[i].name == gs[i].name && ps[i].n == gs[i].n,
                "optimizer: parameter/gradient structure mismatch");
        const std::size_t n = ps[i].n;
        if (n == 0) continue;
        double* th = ps[i].p;
        const double* g = gs[i].p;
        if (adam_routed(ps[i].name)) {
            auto& [mbuf, vbuf] = adam_mv_[ps[i].name];
            if (mbuf.size() != n) {
                mbuf.assign(n, 0.0);
                vbuf.assign(n, 0.0);
            }
            const double b1c = 1.0 - std::pow(adam_.beta1, static_cast<double>(adam_t_));
            const double b2c = 1.0 - std::pow(adam_.beta2, static_cast<double>(adam_t_));
            for (std::size_t k = 0; k < n; ++k) {
                mbuf[k] = adam_.beta1 * mbuf[k] + (1.0 - adam_.beta1) * g[k];
                vbuf[k] = adam_.beta2 * vbuf[k] + (1.0 - adam_.beta2) * g[k] * g[k];
                const double mh = mbuf[k] / b1c;
                const double vh = vbuf[k] / b2c;
                th[k] -= adam_.lr * mh / (std::sqrt(vh) + adam_.eps);
            }
        } else {
            auto& vbuf = sgd_v_[ps[i].name];
            if (vbuf.size() != n) vbuf.assign(n, 0.0);
            const double lr = sgd_.lr * (gate_param(ps[i].name) ? sgd_.gate_lr_scale : 1.0);
            for (std::size_t k = 0; k < n; ++k) {
                const double gk = g[k] + sgd_.weight_decay * th[k];
                vbuf[k] = sgd_.momentum * vbuf[k] + gk;
                th[k] -= lr * vbuf[k];
            }
        }
    }
}

// ---- loss and helpers ----------------------------------------------------------

double cross_entropy(const Vec& logits, int label) {
    require(label >= 0 && static_cast<std::size_t>(label) < logits.size(),
            "cross_entropy: label out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return mx + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

namespace {

void clip_gradients(model::KerlModel& grads, double max_norm) {
    const auto& ks = kernels::ops();
    double sq = 0.0;
    grads.visit_params([&](const std::string&, const auto& t) {
        auto [d, n] = span_of(t);
        sq += ks.dot(d, d, n);
    });
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    grads.visit_params([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        ks.scal(scale, d, n);
    });
}

FeatureMap sample_input(const data::Sample& s) {
    if (s.has_features) return s.features;
    require(s.has_image, "sample carries neither pixels nor features");
    return image::to_feature(s.image);
}

// crops are rescored at half the main input side
int region_resize(const model::ModelConfig& cfg) { return std::max(8, cfg.image / 2); }

// mean over gate channels for gated variants, channel sums otherwise
Mat saliency_map(const model::KerlModel& m, const model::SampleTape& tape) {
    if (m.cfg.has_gates()) {
        const FeatureMap& g = tape.gate.gates;
        Mat s(static_cast<std::size_t>(g.h), static_cast<std::size_t>(g.w));
        const auto& ks = kernels::ops();
        for (int i = 0; i < g.h; ++i)
            for (int j = 0; j < g.w; ++j)
                s.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
                    ks.sum(g.loc(i, j), static_cast<std::size_t>(g.ch)) / g.ch;
        return s;
    }
    return regions::location_scores(tape.fmap);
}

bool center_in_boxes(double cy, double cx, const std::vector<regions::PixelBox>& boxes) {
    for (const auto& b : boxes)
        if (cx >= b.x0 && cx < b.x1 && cy >= b.y0 && cy < b.y1) return true;
    return false;
}

// saliency mass inside the mask boxes plus the cell-count chance level
std::pair<double, double> mask_mass(const Mat& sal01, int stride,
                                    const std::vector<regions::PixelBox>& boxes) {
    double total = 0.0, inside = 0.0;
    std::size_t cells_in = 0;
    for (std::size_t i = 0; i < sal01.rows; ++i)
        for (std::size_t j = 0; j < sal01.cols; ++j) {
            const double v = sal01.at(i, j);
            total += v;
            const double cy = (static_cast<double>(i) + 0.5) * stride;
            const double cx = (static_cast<double>(j) + 0.5) * stride;
            if (center_in_boxes(cy, cx, boxes)) {
                inside += v;
                ++cells_in;
            }
        }
    const double cells = static_cast<double>(sal01.rows * sal01.cols);
    const double chance = cells > 0 ? static_cast<double>(cells_in) / cells : 0.0;
    // a constant (all-zero after normalization) map carries no preference
    const double mass = total > 0.0 ? inside / total : chance;
    return {mass, chance};
}

// concatenated sum-pooled sketch features of the top regions, zero-padded
Vec region_features(const model::KerlModel& m, cbp::Sketcher& sk, const data::Sample& s,
                    const FeatureMap& fmap) {
    const int stride = m.cfg.backbone.total_stride();
    const Mat loc = regions::min_max_normalized(regions::location_scores(fmap));
    const auto regs =
        regions::propose_regions(loc, m.cfg.region_size, m.cfg.region_iou, m.cfg.region_count);
    Vec cat(m.region.in_dim(), 0.0);
    for (std::size_t k = 0; k < regs.size(); ++k) {
        const auto spec = regions::crop_and_map(regs[k], s.image.h, s.image.w, stride,
                                                m.cfg.region_crop, region_resize(m.cfg));
        const Vec f = model::crop_feature(m, sk, s.image, spec);
        std::copy(f.begin(), f.end(), cat.begin() + static_cast<std::ptrdiff_t>(k * f.size()));
    }
    return cat;
}

}  // namespace

// ---- scoring --------------------------------------------------------------------

std::vector<Vec> compute_scores(const model::KerlModel& baseline,
                                const std::vector<data::Sample>& samples) {
    require(!baseline.cfg.needs_knowledge(), "compute_scores: scorer must be knowledge-free");
    cbp::Sketcher sk(baseline.sketch);
    std::vector<Vec> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const FeatureMap in = sample_input(s);
        const Vec logits = model::forward(baseline, sk, in, s.has_features, nullptr);
        out.push_back(model::softmax(logits));
    }
    return out;
}

std::vector<Vec> crossfit_scores(const data::Dataset& ds, const TrainConfig& cfg) {
    require(cfg.model.variant == fusion::Variant::baseline,
            "crossfit_scores: score source must be the baseline variant");
    const std::size_t n = ds.train.size();
    require(n >= 2, "crossfit_scores: training split too small to fold");

    std::vector<int> fold(n);
    std::vector<int> seen(ds.num_classes(), 0);
    for (std::size_t i = 0; i < n; ++i)
        fold[i] = seen[static_cast<std::size_t>(ds.train[i].label)]++ & 1;

    std::vector<Vec> out(n);
    for (int f = 0; f < 2; ++f) {
        data::Dataset half;
        half.class_names = ds.class_names;
        half.attribute_names = ds.attribute_names;
        std::vector<std::size_t> others;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold[i] == f)
                half.train.push_back(ds.train[i]);
            else
                others.push_back(i);
        }
        require(!half.train.empty() && !others.empty(), "crossfit_scores: degenerate fold");
        TrainConfig sub = cfg;
        sub.eval_every = 0;
        sub.region_epochs = 0;
        const TrainResult r = train(half, nullptr, sub);
        std::vector<data::Sample> held;
        held.reserve(others.size());
        for (std::size_t i : others) held.push_back(ds.train[i]);
        std::vector<Vec> sc = compute_scores(r.model, held);
        for (std::size_t k = 0; k < others.size(); ++k) out[others[k]] = std::move(sc[k]);
    }
    return out;
}

// ---- training ----------------------------------------------------------------------

TrainResult train(const data::Dataset& ds, const graph::KnowledgeGraph* kg,
                  const TrainConfig& cfg, const model::KerlModel* scorer,
                  const std::vector<Vec>* cached_scores) {
    const auto& tr = ds.train;
    require(!tr.empty(), "train: empty training split");
    require(cfg.epochs > 0 && cfg.batch > 0, "train: epochs and batch must be positive");

    model::ModelConfig mc = cfg.model;
    if (mc.num_classes == 0) mc.num_classes = ds.num_classes();
    require(mc.num_classes == ds.num_classes(), "train: num_classes does not match the dataset");

    Rng rng(cfg.seed);
    model::KerlModel m = model::KerlModel::init(mc, kg, rng);
    if (mc.needs_knowledge()) {
        require(scorer != nullptr, "train: knowledge variant needs a pretrained scorer");
        require(scorer->cfg.num_classes == mc.num_classes,
                "train: scorer class count does not match");
        m.scorer = std::make_unique<model::KerlModel>(scorer->clone());
    }

    std::vector<Vec> scores;
    if (mc.needs_knowledge()) {
        if (cached_scores) {
            require(cached_scores->size() == tr.size(),
                    "train: cached score count does not match the training split");
            scores = *cached_scores;
        } else {
            scores = compute_scores(*m.scorer, tr);
        }
    }

    cbp::Sketcher sk(m.sketch);
    SplitOptimizer opt(cfg.sgd, cfg.adam);
    std::vector<std::size_t> order(tr.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng erng = rng.fork(static_cast<std::uint64_t>(epoch) + 1);
        erng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t bend = std::min(order.size(), start + cfg.batch);
            const double bsize = static_cast<double>(bend - start);
            model::KerlModel grads = model::KerlModel::zeros_like(m);
            for (std::size_t k = start; k < bend; ++k) {
                const std::size_t idx = order[k];
                const data::Sample& s = tr[idx];
                const FeatureMap in = sample_input(s);
                const Vec* sp = scores.empty() ? nullptr : &scores[idx];
                model::SampleTape tape;
                const Vec logits = model::forward(m, sk, in, s.has_features, sp, &tape);
                const double loss = cross_entropy(logits, s.label);
                if (!std::isfinite(loss))
                    throw NumericError(msg("training diverged: non-finite loss at epoch ",
                                           epoch + 1, ", sample ", idx));
                loss_sum += loss;
                if (cfg.gate_l1 > 0.0 && !tape.gate.gates.v.empty()) {
                    double gsum = 0.0;
                    for (double g : tape.gate.gates.v) gsum += g;
                    loss_sum += cfg.gate_l1 * gsum /
                                static_cast<double>(tape.gate.gates.v.size());
                }
                Vec dl = model::softmax(logits);
                if (argmax(dl) == static_cast<std::size_t>(s.label)) ++correct;
                dl[static_cast<std::size_t>(s.label)] -= 1.0;
                kernels::ops().scal(1.0 / bsize, dl.data(), dl.size());
                model::backward(m, sk, tape, dl, grads, cfg.gate_l1 / bsize);
            }
            if (cfg.clip_norm > 0.0) clip_gradients(grads, cfg.clip_norm);
            opt.step(m, grads);
        }

        EpochStats st;
        st.epoch = epoch + 1;
        st.loss = loss_sum / static_cast<double>(tr.size());
        st.train_acc = static_cast<double>(correct) / static_cast<double>(tr.size());
        if (!std::isfinite(st.loss))
            throw NumericError(msg("training diverged: non-finite epoch loss at epoch ",
                                   epoch + 1));
        if (cfg.eval_every > 0 && !ds.test.empty() &&
            ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs))
            st.test_acc = evaluate(m, ds.test).accuracy;
        res.history.push_back(st);
    }

    if (cfg.region_epochs > 0)
        train_region_head(m, tr, cfg.region_epochs, cfg.sgd, cfg.seed ^ 0x7e91ull);

    res.rng_state = rng.state();
    res.model = std::move(m);
    return res;
}

// ---- evaluation -----------------------------------------------------------------

EvalResult evaluate(const model::KerlModel& m, const std::vector<data::Sample>& samples,
                    const EvalOptions& opt) {
    require(!samples.empty(), "evaluate: no samples");
    cbp::Sketcher sk(m.sketch);

    std::vector<Vec> scores;
    if (m.cfg.needs_knowledge()) {
        require(m.scorer != nullptr, "evaluate: model carries no scorer");
        scores = compute_scores(*m.scorer, samples);
    }

    const std::size_t num_classes = m.cfg.num_classes;
    std::vector<std::size_t> per_class_n(num_classes, 0), per_class_ok(num_classes, 0);
    const int stride = m.cfg.backbone.total_stride();

    EvalResult res;
    res.per_class_accuracy.assign(num_classes, 0.0);
    std::size_t correct = 0;
    double mass_sum = 0.0, chance_sum = 0.0;
    int mass_n = 0;

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const data::Sample& s = samples[i];
        const FeatureMap in = sample_input(s);
        const Vec* sp = scores.empty() ? nullptr : &scores[i];
        model::SampleTape tape;
        const Vec logits = model::forward(m, sk, in, s.has_features, sp, &tape);
        Vec prob = model::softmax(logits);

        if (opt.with_regions && s.has_image) {
            const Vec cat = region_features(m, sk, s, tape.fmap);
            Vec rlogits(m.region.out_dim(), 0.0);
            m.region.apply(cat.data(), rlogits.data());
            prob = regions::fuse_scores(prob, model::softmax(rlogits));
        }

        const std::size_t pred = argmax(prob);
        const std::size_t label = static_cast<std::size_t>(s.label);
        require(label < num_classes, "evaluate: label out of range");
        ++per_class_n[label];
        if (pred == label) {
            ++correct;
            ++per_class_ok[label];
        }

        if (!s.masks.empty()) {
            const Mat sal = regions::min_max_normalized(saliency_map(m, tape));
            const auto [mass, chance] = mask_mass(sal, stride, s.masks);
            mass_sum += mass;
            chance_sum += chance;
            ++mass_n;
        }
    }

    res.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    for (std::size_t c = 0; c < num_classes; ++c)
        res.per_class_accuracy[c] =
            per_class_n[c] ? static_cast<double>(per_class_ok[c]) / per_class_n[c] : 0.0;
    if (mass_n > 0) {
        res.mass = mass_sum / mass_n;
        res.chance = chance_sum / mass_n;
        res.mass_samples = mass_n;
    }
    return res;
}

void train_region_head(model::KerlModel& m, const std::vector<data::Sample>& samples, int epochs,
                       const SgdConfig& sgd, std::uint64_t seed) {
    require(epochs > 0, "region head: epochs must be positive");
    require(!samples.empty(), "region head: no samples");
    cbp::Sketcher sk(m.sketch);

    std::vector<Vec> scores;
    if (m.cfg.needs_knowledge()) {
        require(m.scorer != nullptr, "region head: model carries no scorer");
        scores = compute_scores(*m.scorer, samples);
    }

    // frozen trunk: cache the concatenated region features once
    std::vector<Vec> feats;
    std::vector<int> labels;
    feats.reserve(samples.size());
    labels.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const data::Sample& s = samples[i];
        require(s.has_image, "region head: samples must carry pixels");
        const FeatureMap in = sample_input(s);
        const Vec* sp = scores.empty() ? nullptr : &scores[i];
        model::SampleTape tape;
        model::forward(m, sk, in, s.has_features, sp, &tape);
        feats.push_back(region_features(m, sk, s, tape.fmap));
        labels.push_back(s.label);
    }

    const auto& ks = kernels::ops();
    const std::size_t nc = m.region.out_dim(), nf = m.region.in_dim();
    Mat vw(nc, nf);
    Vec vb(nc, 0.0);
    Rng rng(seed);
    std::vector<std::size_t> order(feats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = 16;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng erng = rng.fork(static_cast<std::uint64_t>(epoch) + 1);
        erng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t bend = std::min(order.size(), start + batch);
            const double bsize = static_cast<double>(bend - start);
            Mat gw(nc, nf);
            Vec gb(nc, 0.0);
            for (std::size_t k = start; k < bend; ++k) {
                const std::size_t idx = order[k];
                Vec logits(nc, 0.0);
                m.region.apply(feats[idx].data(), logits.data());
                Vec dl = model::softmax(logits);
                if (!all_finite(dl))
                    throw NumericError("region head: non-finite scores during fitting");
                dl[static_cast<std::size_t>(labels[idx])] -= 1.0;
                ks.scal(1.0 / bsize, dl.data(), dl.size());
                ks.ger(dl.data(), feats[idx].data(), gw.a.data(), nc, nf);
                ks.axpy(1.0, dl.data(), gb.data(), nc);
            }
            for (std::size_t k = 0; k < vw.a.size(); ++k) {
                const double g = gw.a[k] + sgd.weight_decay * m.region.w.a[k];
                vw.a[k] = sgd.momentum * vw.a[k] + g;
                m.region.w.a[k] -= sgd.lr * vw.a[k];
            }
            for (std::size_t k = 0; k < vb.size(); ++k) {
                vb[k] = sgd.momentum * vb[k] + gb[k];
                m.region.b[k] -= sgd.lr * vb[k];
            }
        }
    }
}

// ---- gradient checking ----------------------------------------------------------

namespace {

struct FdSpan {
    double* p = nullptr;
    std::size_t n = 0;
};

// central finite differences over every coordinate of every span
double fd_max_rel_err(std::vector<FdSpan> spans, const std::vector<Vec>& analytic,
                      const std::function<double()>& loss) {
    double worst = 0.0;
    for (std::size_t si = 0; si < spans.size(); ++si) {
        for (std::size_t i = 0; i < spans[si].n; ++i) {
            double* x = spans[si].p + i;
            const double orig = *x;
            const double h = 1e-5 * std::max(1.0, std::abs(orig));
            *x = orig + h;
            const double fp = loss();
            *x = orig - h;
            const double fm = loss();
            *x = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[si][i];
            const double denom = std::max({std::abs(an), std::abs(fd), 1e-3});
            worst = std::max(worst, std::abs(an - fd) / denom);
        }
    }
    return worst;
}

Vec random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Vec v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

double gradcheck_ggnn(Rng& rng) {
    graph::NodeRegistry reg;
    reg.categories = {"c0", "c1", "c2"};
    reg.attributes = {"a0", "a1", "a2", "a3"};
    graph::KnowledgeGraph g;
    g.registry = reg;
    g.confidence.s = Mat(3, 4);
    for (double& v : g.confidence.s.a) v = rng.uniform();
    const Mat a_full = graph::adjacency(g).a_full;

    ggnn::GgnnConfig cfg;
    cfg.n = 4;
    cfg.out_dim = 2;
    cfg.t_steps = 3;
    ggnn::GgnnParams p = ggnn::GgnnParams::init(cfg, rng);
    // the output layer starts at zero in real training; the check needs it
    // live so the recurrence parameters see a nonzero upstream gradient
    for (double& v : p.o_w.a) v = rng.uniform(-0.5, 0.5);
    Vec scores = random_vec(3, rng, 0.2, 0.8);
    const Vec u = random_vec(g.num_nodes() * cfg.out_dim, rng);

    auto loss = [&]() {
        auto out = ggnn::forward(a_full, 3, scores, p, cfg);
        return kernels::ops().dot(u.data(), out.second.f_g.data(), u.size());
    };

    ggnn::Tape tape;
    ggnn::forward(a_full, 3, scores, p, cfg, &tape);
    ggnn::GgnnParams grads = ggnn::GgnnParams::zeros(cfg);
    const Vec dscores = ggnn::backward(tape, a_full, 3, p, cfg, u, grads);

    std::vector<FdSpan> spans;
    std::vector<Vec> analytic;
    p.visit([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        spans.push_back({d, n});
    });
    grads.visit([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        analytic.emplace_back(d, d + n);
    });
    spans.push_back({scores.data(), scores.size()});
    analytic.push_back(dscores);
    return fd_max_rel_err(std::move(spans), analytic, loss);
}

double gradcheck_cbp(Rng& rng) {
    const std::size_t d = 6, c = 16;
    cbp::Sketcher sk(cbp::make_sketch_params(d, c, 99));
    FeatureMap fmap(2, 2, static_cast<int>(d));
    for (double& v : fmap.v) v = rng.uniform(-1.0, 1.0);
    FeatureMap u(2, 2, static_cast<int>(c));
    for (double& v : u.v) v = rng.uniform(-1.0, 1.0);

    auto loss = [&]() {
        FeatureMap out = sk.pool(fmap);
        return kernels::ops().dot(u.v.data(), out.v.data(), u.v.size());
    };

    const FeatureMap dfmap = sk.pool_backward(fmap, u);
    std::vector<FdSpan> spans{{fmap.v.data(), fmap.v.size()}};
    std::vector<Vec> analytic{dfmap.v};
    return fd_max_rel_err(std::move(spans), analytic, loss);
}

double gradcheck_fusion_head(fusion::Variant v, bool scalar_gate, Rng& rng) {
    fusion::FusionConfig cfg;
    cfg.c = 5;
    cfg.knowledge_dim =
        (v == fusion::Variant::kerl || v == fusion::Variant::concat) ? 6 : 0;
    cfg.m = 4;
    cfg.num_classes = 3;
    cfg.scalar_gate = scalar_gate;
    fusion::FusionParams p = fusion::FusionParams::init(v, cfg, rng);
    // the classifier starts at zero in real training; the check needs it live
    // so the gate and feature paths see a nonzero upstream gradient
    for (double& x : p.cls.w.a) x = rng.uniform(-1.0, 1.0);
    for (double& x : p.cls.b) x = rng.uniform(-0.5, 0.5);

    FeatureMap f_i(2, 2, static_cast<int>(cfg.c));
    for (double& x : f_i.v) x = rng.uniform(-1.0, 1.0);
    Vec f_g = random_vec(cfg.knowledge_dim, rng);
    const Vec u = random_vec(cfg.num_classes, rng);
    const auto& ks = kernels::ops();

    auto head = [&]() -> Vec {
        switch (v) {
            case fusion::Variant::baseline:
                return fusion::baseline_head(f_i, p);
            case fusion::Variant::concat:
                return fusion::concat_head(f_i, f_g, p);
            case fusion::Variant::self_guided:
                return fusion::classify(fusion::self_guided_pool(f_i, p, cfg).f, p);
            case fusion::Variant::kerl:
                return fusion::classify(fusion::gated_pool(f_i, f_g, p, cfg).f, p);
        }
        return {};
    };
    auto loss = [&]() {
        const Vec s = head();
        return ks.dot(u.data(), s.data(), s.size());
    };

    fusion::FusionParams grads = fusion::FusionParams::shaped(v, cfg);
    FeatureMap df_i(2, 2, static_cast<int>(cfg.c));
    Vec df_g(cfg.knowledge_dim, 0.0);
    switch (v) {
        case fusion::Variant::baseline:
            fusion::baseline_head_backward(f_i, u, p, grads, df_i);
            break;
        case fusion::Variant::concat:
            fusion::concat_head_backward(f_i, f_g, u, p, grads, df_i, df_g);
            break;
        case fusion::Variant::self_guided: {
            fusion::GateCache cache;
            const Vec f = fusion::self_guided_pool(f_i, p, cfg, &cache).f;
            Vec df;
            fusion::classify_backward(f, u, p, grads, df);
            fusion::self_guided_pool_backward(f_i, p, cfg, cache, df, grads, df_i);
            break;
        }
        case fusion::Variant::kerl: {
            fusion::GateCache cache;
            const Vec f = fusion::gated_pool(f_i, f_g, p, cfg, &cache).f;
            Vec df;
            fusion::classify_backward(f, u, p, grads, df);
            fusion::gated_pool_backward(f_i, f_g, p, cfg, cache, df, grads, df_i, df_g);
            break;
        }
    }

    std::vector<FdSpan> spans;
    std::vector<Vec> analytic;
    p.visit([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        spans.push_back({d, n});
    });
    grads.visit([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        analytic.emplace_back(d, d + n);
    });
    spans.push_back({f_i.v.data(), f_i.v.size()});
    analytic.push_back(df_i.v);
    if (cfg.knowledge_dim) {
        spans.push_back({f_g.data(), f_g.size()});
        analytic.push_back(df_g);
    }
    return fd_max_rel_err(std::move(spans), analytic, loss);
}

double gradcheck_backbone(Rng& rng) {
    backbone::BackboneConfig cfg;
    cfg.layers = {{2, 3, 3, 2, 1}, {3, 4, 3, 2, 1}};
    backbone::BackboneParams p = backbone::BackboneParams::init(cfg, rng);
    FeatureMap x(8, 8, 2);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    FeatureMap u;
    {
        const FeatureMap probe = backbone::forward(x, p, cfg);
        u = FeatureMap(probe.h, probe.w, probe.ch);
        for (double& v : u.v) v = rng.uniform(-1.0, 1.0);
    }

    auto loss = [&]() {
        const FeatureMap out = backbone::forward(x, p, cfg);
        return kernels::ops().dot(u.v.data(), out.v.data(), u.v.size());
    };

    backbone::BackboneTape tape;
    backbone::forward(x, p, cfg, &tape);
    backbone::BackboneParams grads = backbone::BackboneParams::zeros(cfg);
    FeatureMap dx;
    backbone::backward(tape, p, cfg, u, grads, &dx);

    std::vector<FdSpan> spans;
    std::vector<Vec> analytic;
    p.visit([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        spans.push_back({d, n});
    });
    grads.visit([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        analytic.emplace_back(d, d + n);
    });
    spans.push_back({x.v.data(), x.v.size()});
    analytic.push_back(dx.v);
    return fd_max_rel_err(std::move(spans), analytic, loss);
}

double gradcheck_model(bool normalize, Rng& rng) {
    graph::NodeRegistry reg;
    reg.categories = {"c0", "c1"};
    reg.attributes = {"a0", "a1", "a2"};
    graph::KnowledgeGraph g;
    g.registry = reg;
    g.confidence.s = Mat(2, 3);
    for (double& v : g.confidence.s.a) v = rng.uniform();

    model::ModelConfig mc;
    mc.variant = fusion::Variant::kerl;
    mc.image = 8;
    mc.backbone.layers = {{3, 4, 3, 2, 1}, {4, 6, 3, 2, 1}};
    mc.ggnn.n = 3;
    mc.ggnn.out_dim = 2;
    mc.ggnn.t_steps = 2;
    mc.cbp_c = 8;
    mc.cbp_normalize = normalize;
    mc.gate_hidden = 4;
    mc.num_classes = 2;
    model::KerlModel m = model::KerlModel::init(mc, &g, rng);
    for (double& v : m.fu.cls.w.a) v = rng.uniform(-1.0, 1.0);
    for (double& v : m.fu.cls.b) v = rng.uniform(-0.5, 0.5);
    for (double& v : m.gg.o_w.a) v = rng.uniform(-0.5, 0.5);
    cbp::Sketcher sk(m.sketch);

    FeatureMap img(8, 8, 3);
    for (double& v : img.v) v = rng.uniform(0.0, 1.0);
    const Vec scores = random_vec(2, rng, 0.2, 0.8);
    const Vec u = random_vec(mc.num_classes, rng);

    auto loss = [&]() {
        const Vec logits = model::forward(m, sk, img, false, &scores);
        return kernels::ops().dot(u.data(), logits.data(), u.size());
    };

    model::SampleTape tape;
    model::forward(m, sk, img, false, &scores, &tape);
    model::KerlModel grads = model::KerlModel::zeros_like(m);
    model::backward(m, sk, tape, u, grads);

    std::vector<FdSpan> spans;
    std::vector<Vec> analytic;
    m.visit_params([&](const std::string&, auto& t) {
        auto [d, n] = span_of(t);
        spans.push_back({d, n});
    });
    grads.visit_params([&](const std::string&, const auto& t) {
        auto [d, n] = span_of(t);
        analytic.emplace_back(d, d + n);
    });
    return fd_max_rel_err(std::move(spans), analytic, loss);
}

}  // namespace

std::vector<GradReport> gradcheck_all(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradReport> out;
    out.push_back({"ggnn", gradcheck_ggnn(rng)});
    out.push_back({"cbp", gradcheck_cbp(rng)});
    out.push_back(
        {"fusion/baseline", gradcheck_fusion_head(fusion::Variant::baseline, false, rng)});
    out.push_back(
        {"fusion/self_guided", gradcheck_fusion_head(fusion::Variant::self_guided, false, rng)});
    out.push_back({"fusion/concat", gradcheck_fusion_head(fusion::Variant::concat, false, rng)});
    out.push_back({"fusion/kerl", gradcheck_fusion_head(fusion::Variant::kerl, false, rng)});
    out.push_back(
        {"fusion/kerl_scalar_gate", gradcheck_fusion_head(fusion::Variant::kerl, true, rng)});
    out.push_back({"backbone", gradcheck_backbone(rng)});
    out.push_back({"model", gradcheck_model(false, rng)});
    out.push_back({"model_normalized", gradcheck_model(true, rng)});
    return out;
}

// ---- score cache and metrics files ------------------------------------------------

namespace {

void wr_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t rd_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError(path + ": truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t rd_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ParseError(path + ": truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_scores(const std::string& path, const std::vector<Vec>& scores) {
    require(!scores.empty(), "save_scores: empty score list");
    const std::size_t c = scores.front().size();
    for (const auto& s : scores)
        require(s.size() == c, "save_scores: ragged score rows");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write("KSC1", 4);
    wr_u32(os, static_cast<std::uint32_t>(c));
    wr_u64(os, scores.size());
    for (const auto& s : scores)
        for (double v : s) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            wr_u64(os, bits);
        }
    if (!os) throw IoError("short write to " + path);
}

std::vector<Vec> load_scores(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "KSC1", 4) != 0)
        throw ParseError(path + ": not a score cache file");
    const std::uint32_t c = rd_u32(is, path);
    const std::uint64_t n = rd_u64(is, path);
    if (c == 0 || n == 0 || n >= (1ull << 32))
        throw ParseError(path + ": implausible score cache header");
    std::vector<Vec> out(n, Vec(c));
    for (auto& row : out)
        for (double& v : row) {
            const std::uint64_t bits = rd_u64(is, path);
            std::memcpy(&v, &bits, 8);
        }
    return out;
}

void write_metrics(const std::string& path, const TrainConfig& cfg,
                   const std::vector<EpochStats>& history) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    os << std::setprecision(17);
    os << "# kerl-metrics 1\n";
    os << "# variant=" << fusion::variant_name(cfg.model.variant) << " seed=" << cfg.seed
       << " epochs=" << cfg.epochs << " batch=" << cfg.batch
       << " clip_norm=" << cfg.clip_norm << " gate_l1=" << cfg.gate_l1 << "\n";
    os << "# sgd_lr=" << cfg.sgd.lr << " sgd_momentum=" << cfg.sgd.momentum
       << " sgd_weight_decay=" << cfg.sgd.weight_decay
       << " sgd_gate_lr_scale=" << cfg.sgd.gate_lr_scale << "\n";
    os << "# adam_lr=" << cfg.adam.lr << " adam_beta1=" << cfg.adam.beta1
       << " adam_beta2=" << cfg.adam.beta2 << " adam_eps=" << cfg.adam.eps << "\n";
    os << "# image=" << cfg.model.image << " cbp_c=" << cfg.model.cbp_c
       << " gate_hidden=" << cfg.model.gate_width()
       << " scalar_gate=" << (cfg.model.scalar_gate ? 1 : 0)
       << " cbp_normalize=" << (cfg.model.cbp_normalize ? 1 : 0) << " ggnn_n=" << cfg.model.ggnn.n
       << " ggnn_out_dim=" << cfg.model.ggnn.out_dim
       << " ggnn_t_steps=" << cfg.model.ggnn.t_steps << "\n";
    os << "epoch,loss,train_acc,test_acc\n";
    for (const auto& st : history) {
        os << st.epoch << "," << st.loss << "," << st.train_acc << ",";
        if (st.test_acc >= 0.0) os << st.test_acc;
        os << "\n";
    }
    if (!os) throw IoError("short write to " + path);
}

}  // namespace kerl::trainer
