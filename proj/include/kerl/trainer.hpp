#pragma once

#include <map>
#include <string>
#include <vector>

#include "kerl/data.hpp"
#include "kerl/graph.hpp"
#include "kerl/model.hpp"

// Training and evaluation: baseline pretraining, joint training with the
// split optimizer (SGD with momentum everywhere except the graph network,
// which gets Adam), deterministic per-seed data order, and the evaluation
// metrics (top-1, per-class accuracy, saliency mass on ground-truth masks).

namespace kerl::trainer {

struct SgdConfig {
    double lr = 1e-2;
    double momentum = 0.9;
    double weight_decay = 0.0;
    // lr multiplier for the gate network ("fusion.g*"), the usual bigger step
    // for freshly initialized heads on top of a slow-moving trunk
    double gate_lr_scale = 1.0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    int epochs = 30;
    int batch = 16;
    SgdConfig sgd;
    AdamConfig adam;
    std::uint64_t seed = 1;
    int eval_every = 0;      // test-set evaluation cadence, 0 = never
    int region_epochs = 0;   // post-pass fitting the region head, 0 = skip
    double clip_norm = 5.0;  // global gradient-norm clip, 0 = off
    double gate_l1 = 0.0;    // gate-activity penalty weight, 0 = off
    model::ModelConfig model;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// Routes "ggnn.*" parameters to Adam, everything else to SGD with momentum.
// SGD: v <- momentum*v + (g + wd*theta); theta <- theta - lr*v.
// Adam: standard bias-corrected update; the step counter advances once per
// step() call that sees at least one Adam-routed parameter.
class SplitOptimizer {
public:
    SplitOptimizer(SgdConfig sgd, AdamConfig adam) : sgd_(sgd), adam_(adam) {}

    void step(model::KerlModel& params, const model::KerlModel& grads);

    long adam_steps() const { return adam_t_; }
    const std::map<std::string, Vec>& momentum_buffers() const { return sgd_v_; }
    const std::map<std::string, std::pair<Vec, Vec>>& adam_state() const { return adam_mv_; }

private:
    SgdConfig sgd_;
    AdamConfig adam_;
    std::map<std::string, Vec> sgd_v_;
    std::map<std::string, std::pair<Vec, Vec>> adam_mv_;  // first/second moments
    long adam_t_ = 0;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    double test_acc = -1.0;  // -1 when not evaluated that epoch
};

struct TrainResult {
    model::KerlModel model;
    std::vector<EpochStats> history;
    std::string rng_state;  // trainer RNG snapshot after the final epoch
};

struct EvalOptions {
    bool with_regions = false;
};

struct EvalResult {
    double accuracy = 0.0;
    Vec per_class_accuracy;
    // saliency mass inside ground-truth attribute masks, averaged over the
    // samples that carry masks; saliency is the mean gate map for gated
    // variants and the normalized location-score map otherwise
    double mass = 0.0;
    double chance = 0.0;  // mask area fraction at feature-cell resolution
    int mass_samples = 0;
};

// -log softmax(logits)[label], computed stably
double cross_entropy(const Vec& logits, int label);

// Softmax outputs of a frozen baseline, one vector per sample, input order.
std::vector<Vec> compute_scores(const model::KerlModel& baseline,
                                const std::vector<data::Sample>& samples);

// Training-split scores without self-scoring: the split is cut into two
// class-stratified folds and each fold is scored by a baseline trained on
// the other one. A desk-scale baseline nearly memorizes its own training
// split, so self-scored train scores would hand the knowledge variants a
// label channel that does not exist at test time.
std::vector<Vec> crossfit_scores(const data::Dataset& ds, const TrainConfig& cfg);

// kg required for knowledge variants; scorer (a trained baseline) is cloned
// into the model for score computation. cached_scores, when given, replaces
// the scorer forward passes for the training split (order-aligned).
TrainResult train(const data::Dataset& ds, const graph::KnowledgeGraph* kg,
                  const TrainConfig& cfg, const model::KerlModel* scorer = nullptr,
                  const std::vector<Vec>* cached_scores = nullptr);

EvalResult evaluate(const model::KerlModel& m, const std::vector<data::Sample>& samples,
                    const EvalOptions& opt = {});

// Fits only the region-head affine on frozen trunk features.
void train_region_head(model::KerlModel& m, const std::vector<data::Sample>& samples,
                       int epochs, const SgdConfig& sgd, std::uint64_t seed);

struct GradReport {
    std::string group;
    double max_rel_err = 0.0;
};

// Finite-difference checks for ggnn, cbp, fusion (all heads), backbone at
// tiny dimensions.
std::vector<GradReport> gradcheck_all(std::uint64_t seed);

// Score cache: magic "KSC1", u32 class count, u64 row count, then rows of
// binary64 values. Bit-exact round trip.
void save_scores(const std::string& path, const std::vector<Vec>& scores);
std::vector<Vec> load_scores(const std::string& path);

// CSV with '#' header lines echoing the numeric config.
void write_metrics(const std::string& path, const TrainConfig& cfg,
                   const std::vector<EpochStats>& history);

}  // namespace kerl::trainer
