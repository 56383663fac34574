#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "omnivid/config_kv.hpp"
#include "omnivid/dit_core.hpp"

namespace omnivid {

// Two-stage schedule. Stage 1 trains the adaptor only on {T2V, I2V}; stage 2
// trains adaptor + DiT on all five tasks. The encoder is never trainable.
struct StagePlan {
    int stage = 1;
    std::map<TaskKind, double> mixture;
    long steps = 100;
    std::string optimizer = "sgd";  // "sgd" (plus optional momentum) or "adam"
    double lr = 1e-2;
    double momentum = 0.0;  // 0 = plain gradient descent
    double cfg_dropout = 0.0;
    int grad_accum = 1;
    uint64_t seed = 0;

    std::vector<std::string> trainable_prefixes() const;
    void validate() const;
    static StagePlan from_config(const KvConfig& cfg);
    static StagePlan default_plan(int stage);
};

struct TrainState {
    ParamMap params;
    ParamMap moments;
    long step = 0;
    int stage = 0;
    uint64_t seed = 0;
    uint64_t config_digest = 0;
    Rng rng;
    std::vector<double> loss_history;  // last kLossHistory entries
    static constexpr size_t kLossHistory = 64;

    void push_loss(double l) {
        loss_history.push_back(l);
        if (loss_history.size() > kLossHistory)
            loss_history.erase(loss_history.begin());
    }
};

struct Dataset {
    std::array<std::vector<PreparedSample>, kNumTasks> shards;

    const std::vector<PreparedSample>& shard(TaskKind t) const {
        return shards[static_cast<size_t>(t)];
    }
    size_t total() const {
        size_t n = 0;
        for (const auto& s : shards) n += s.size();
        return n;
    }
    static Dataset from_samples(const std::vector<TaskSample>& samples, const ParamMap& params);
};

TaskKind draw_task(const StagePlan& plan, Rng& rng);
// Rejects tasks with positive weight but an empty shard.
void validate_plan_against(const StagePlan& plan, const Dataset& data);

// One optimization step over `accum` drawn micro-batches; applies the update
// only to the plan's trainable set. Returns the mean loss.
double train_step(TrainState& state, const StagePlan& plan, const ModelConfig& cfg,
                  const Dataset& data);

// Full stage loop; appends telemetry rows (step,stage,task,loss,wall_time_s)
// to telemetry_csv when non-empty.
void run_stage(TrainState& state, const StagePlan& plan, const ModelConfig& cfg,
               const Dataset& data, const std::string& telemetry_csv = "");

TrainState fresh_state(const ModelConfig& cfg, uint64_t seed);

void save_checkpoint(const std::string& dir, const TrainState& state);
TrainState load_checkpoint(const std::string& dir, uint64_t expected_config_digest);
// Metadata only (for `inspect`).
std::string checkpoint_metadata(const std::string& dir);

}  // namespace omnivid
