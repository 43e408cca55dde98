#pragma once

#include "foca/config.hpp"
#include "foca/datagen.hpp"
#include "foca/error.hpp"
#include "foca/model.hpp"
#include "foca/objectives.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace foca::trainer {

// Thrown when a step produces a non-finite loss; carries the breakdown.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, const objectives::LossBreakdown& breakdown)
        : Error(msg), breakdown_(breakdown) {}
    const objectives::LossBreakdown& breakdown() const { return breakdown_; }

private:
    objectives::LossBreakdown breakdown_;
};

enum class OptimizerKind : std::uint8_t { sgd = 0, adam = 1 };

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    objectives::LossWeights weights;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t checkpoint_every = 0; // steps; 0 keeps only the final one
    double grad_clip = 0.0;           // global norm; 0 disables
    bool augmented_views = false;

    void validate() const;
    static TrainConfig from_config(const config::Config& cfg);
};

// First-moment/second-moment state per parameter, in registry order.
struct Optimizer {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m, v;

    static Optimizer init(const TrainConfig& cfg,
                          const std::vector<std::pair<std::string, Tensor>>& params);
    void step(const std::vector<std::pair<std::string, Tensor>>& params, double grad_clip);
};

struct Checkpoint {
    config::Config cfg;
    std::uint64_t model_hash = 0;
    std::uint64_t step = 0;
    std::uint64_t epoch = 0;
    std::uint64_t pos = 0; // next batch index within the epoch
    model::ModelParams params;
    Optimizer opt;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Forward + backward + optimizer step over one batch. Returns the
// pre-step loss breakdown. Samples must share one image shape.
objectives::LossBreakdown train_step(const std::vector<const datagen::Sample*>& batch,
                                     model::ModelParams& params, Optimizer& opt,
                                     const TrainConfig& cfg, std::uint64_t global_step);

struct TrainResult {
    Checkpoint final_checkpoint;
    std::vector<objectives::LossBreakdown> log; // one row per step
    std::string checkpoint_path;
    std::string log_path;
};

// Full deterministic loop over the manifest's train split. out_dir gets
// checkpoint.bin, train_log.csv, and the effective-config echo.
TrainResult train(const datagen::DatasetManifest& manifest, const config::Config& cfg,
                  const std::string& out_dir);

// Continues a loaded checkpoint to the configured epoch count; the stitched
// run is step-for-step identical to the uninterrupted one.
TrainResult resume(const datagen::DatasetManifest& manifest, const Checkpoint& start,
                   const std::string& out_dir);

void append_log_csv(const std::string& path, const std::vector<objectives::LossBreakdown>& rows,
                    std::uint64_t first_step, bool write_header);

} // namespace foca::trainer
