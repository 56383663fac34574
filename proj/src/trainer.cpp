#include "omnivid/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "omnivid/tomn.hpp"

namespace omnivid {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::vector<std::string> StagePlan::trainable_prefixes() const {
    if (stage == 1) return {"adaptor."};
    return {"adaptor.", "dit."};
}

void StagePlan::validate() const {
    if (stage != 1 && stage != 2) throw std::invalid_argument("plan: stage must be 1 or 2");
    if (mixture.empty()) throw std::invalid_argument("plan: empty task mixture");
    double sum = 0;
    for (const auto& [task, w] : mixture) {
        if (w <= 0) throw std::invalid_argument(std::string("plan: non-positive weight for ") +
                                                task_name(task));
        if (stage == 1 && task != TaskKind::T2V && task != TaskKind::I2V)
            throw std::invalid_argument(std::string("plan: stage 1 supports only t2v/i2v, got ") +
                                        task_name(task));
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("plan: mixture weights must sum to 1, got " +
                                    std::to_string(sum));
    if (steps < 0 || grad_accum < 1) throw std::invalid_argument("plan: bad steps/grad_accum");
    if (optimizer != "sgd" && optimizer != "adam")
        throw std::invalid_argument("plan: unknown optimizer '" + optimizer + "'");
}

StagePlan StagePlan::default_plan(int stage) {
    StagePlan p;
    p.stage = stage;
    if (stage == 1) {
        p.mixture = {{TaskKind::T2V, 0.5}, {TaskKind::I2V, 0.5}};
    } else {
        for (int i = 0; i < kNumTasks; ++i) p.mixture[static_cast<TaskKind>(i)] = 0.2;
    }
    return p;
}

StagePlan StagePlan::from_config(const KvConfig& cfg) {
    StagePlan p = default_plan(static_cast<int>(cfg.get_int("stage", 1)));
    p.steps = cfg.get_int("steps", 100);
    p.optimizer = cfg.get("optimizer", "sgd");
    p.lr = cfg.get_double("lr", 1e-2);
    p.momentum = cfg.get_double("momentum", 0.0);
    p.cfg_dropout = cfg.get_double("cfg_dropout", 0.0);
    p.grad_accum = static_cast<int>(cfg.get_int("grad_accum", 1));
    p.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));

    bool any_mix = false;
    std::map<TaskKind, double> mix;
    for (int i = 0; i < kNumTasks; ++i) {
        TaskKind t = static_cast<TaskKind>(i);
        std::string key = std::string("mix.") + task_name(t);
        if (cfg.has(key)) {
            mix[t] = cfg.get_double(key, 0.0);
            any_mix = true;
        }
    }
    if (any_mix) p.mixture = mix;
    p.validate();
    return p;
}

Dataset Dataset::from_samples(const std::vector<TaskSample>& samples, const ParamMap& params) {
    Dataset d;
    for (const auto& s : samples)
        d.shards[static_cast<size_t>(s.task)].push_back(prepare_sample(s, params));
    return d;
}

TaskKind draw_task(const StagePlan& plan, Rng& rng) {
    double u = rng.uniform();
    double acc = 0;
    TaskKind last = plan.mixture.begin()->first;
    for (const auto& [task, w] : plan.mixture) {
        acc += w;
        last = task;
        if (u < acc) return task;
    }
    return last;  // u landed in rounding slack
}

void validate_plan_against(const StagePlan& plan, const Dataset& data) {
    plan.validate();
    for (const auto& [task, w] : plan.mixture)
        if (w > 0 && data.shard(task).empty())
            throw std::invalid_argument(std::string("plan: task ") + task_name(task) +
                                        " has weight " + std::to_string(w) +
                                        " but an empty dataset shard");
}

namespace {

bool is_trainable(const std::string& name, const std::vector<std::string>& prefixes) {
    for (const auto& p : prefixes)
        if (name.rfind(p, 0) == 0) return true;
    return false;
}

}  // namespace

double train_step(TrainState& state, const StagePlan& plan, const ModelConfig& cfg,
                  const Dataset& data) {
    ParamMap grads;
    double loss_sum = 0;
    TaskKind last_task = TaskKind::T2V;
    for (int b = 0; b < plan.grad_accum; ++b) {
        TaskKind task = draw_task(plan, state.rng);
        last_task = task;
        const auto& shard = data.shard(task);
        if (shard.empty())
            throw std::runtime_error(std::string("train_step: empty shard for ") + task_name(task));
        const PreparedSample& sample = shard[state.rng.below(shard.size())];
        float loss = fm_loss<float>(cfg, state.params, sample, state.rng, &grads, plan.cfg_dropout);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_step: non-finite loss at step " +
                                     std::to_string(state.step) + " task " + task_name(task) +
                                     " seed " + std::to_string(state.seed));
        loss_sum += loss;
    }

    auto prefixes = plan.trainable_prefixes();
    float inv = 1.0f / plan.grad_accum;
    long t_step = state.step + 1;
    for (auto& [name, g] : grads) {
        if (!is_trainable(name, prefixes)) continue;
        auto& p = state.params.at(name);
        if (plan.optimizer == "adam") {
            constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
            auto slot = [&](const std::string& key) -> Tensor<float>& {
                auto it = state.moments.find(key);
                if (it == state.moments.end())
                    it = state.moments.emplace(key, Tensor<float>(g.dims)).first;
                return it->second;
            };
            auto& m1 = slot("m1." + name);
            auto& m2 = slot("m2." + name);
            float c1 = 1.0f - std::pow(b1, float(t_step));
            float c2 = 1.0f - std::pow(b2, float(t_step));
            float lr = static_cast<float>(plan.lr);
            for (size_t i = 0; i < g.numel(); ++i) {
                float gi = g[i] * inv;
                m1[i] = b1 * m1[i] + (1.0f - b1) * gi;
                m2[i] = b2 * m2[i] + (1.0f - b2) * gi * gi;
                p[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
            }
        } else if (plan.momentum > 0.0) {
            auto it = state.moments.find(name);
            if (it == state.moments.end()) it = state.moments.emplace(name, Tensor<float>(g.dims)).first;
            auto& m = it->second;
            for (size_t i = 0; i < g.numel(); ++i) {
                m[i] = static_cast<float>(plan.momentum) * m[i] + g[i] * inv;
                p[i] -= static_cast<float>(plan.lr) * m[i];
            }
        } else {
            for (size_t i = 0; i < g.numel(); ++i)
                p[i] -= static_cast<float>(plan.lr) * g[i] * inv;
        }
    }

    ++state.step;
    double loss = loss_sum / plan.grad_accum;
    state.push_loss(loss);
    (void)last_task;
    return loss;
}

void run_stage(TrainState& state, const StagePlan& plan, const ModelConfig& cfg,
               const Dataset& data, const std::string& telemetry_csv) {
    validate_plan_against(plan, data);
    state.stage = plan.stage;

    std::ofstream telemetry;
    if (!telemetry_csv.empty()) {
        bool fresh = !fs::exists(telemetry_csv);
        telemetry.open(telemetry_csv, std::ios::app);
        if (fresh) telemetry << "step,stage,task,loss,wall_time_s\n";
    }

    auto t_start = std::chrono::steady_clock::now();
    for (long i = 0; i < plan.steps; ++i) {
        // peek which task the step will draw, for telemetry
        Rng peek = state.rng;
        TaskKind task = draw_task(plan, peek);
        double loss = train_step(state, plan, cfg, data);
        if (telemetry.is_open()) {
            double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                              .count();
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%ld,%d,%s,%.9g,%.3f\n", state.step, plan.stage,
                          task_name(task), loss, wall);
            telemetry << buf;
        }
    }
}

TrainState fresh_state(const ModelConfig& cfg, uint64_t seed) {
    TrainState st;
    st.params = init_all_params(cfg, seed);
    st.seed = seed;
    st.config_digest = cfg.digest();
    st.rng.reseed(seed ^ 0x5eedf00dULL);
    return st;
}

void save_checkpoint(const std::string& dir, const TrainState& state) {
    fs::create_directories(fs::path(dir) / "params");
    fs::create_directories(fs::path(dir) / "moments");

    ojson meta;
    meta["stage"] = state.stage;
    meta["step"] = state.step;
    meta["seed"] = state.seed;
    meta["config_digest"] = hex64(state.config_digest);
    auto rs = state.rng.state();
    meta["rng"] = {hex64(rs[0]), hex64(rs[1]), hex64(rs[2]), hex64(rs[3])};
    meta["loss_history"] = state.loss_history;
    meta["moment_names"] = ojson::array();
    for (const auto& [name, m] : state.moments) meta["moment_names"].push_back(name);

    std::ofstream mf(fs::path(dir) / "meta.json", std::ios::binary);
    mf << meta.dump(2) << "\n";

    for (const auto& [name, t] : state.params)
        tomn_write((fs::path(dir) / "params" / (name + ".tomn")).string(), t);
    for (const auto& [name, t] : state.moments)
        tomn_write((fs::path(dir) / "moments" / (name + ".tomn")).string(), t);
}

TrainState load_checkpoint(const std::string& dir, uint64_t expected_config_digest) {
    std::ifstream mf(fs::path(dir) / "meta.json");
    if (!mf) throw std::runtime_error("checkpoint: cannot open " + dir + "/meta.json");
    ojson meta = ojson::parse(mf);

    uint64_t digest = std::stoull(meta.at("config_digest").get<std::string>(), nullptr, 16);
    if (digest != expected_config_digest)
        throw std::runtime_error("checkpoint: config digest mismatch, checkpoint has " +
                                 hex64(digest) + " but current config is " +
                                 hex64(expected_config_digest));

    TrainState st;
    st.stage = meta.at("stage").get<int>();
    st.step = meta.at("step").get<long>();
    st.seed = meta.at("seed").get<uint64_t>();
    st.config_digest = digest;
    std::array<uint64_t, 4> rs;
    for (int i = 0; i < 4; ++i)
        rs[i] = std::stoull(meta.at("rng")[i].get<std::string>(), nullptr, 16);
    st.rng.set_state(rs);
    st.loss_history = meta.value("loss_history", std::vector<double>{});

    for (const auto& entry : fs::directory_iterator(fs::path(dir) / "params")) {
        std::string fname = entry.path().filename().string();
        st.params[fname.substr(0, fname.size() - 5)] = tomn_read(entry.path().string());
    }
    for (const auto& name : meta.value("moment_names", std::vector<std::string>{}))
        st.moments[name] = tomn_read((fs::path(dir) / "moments" / (name + ".tomn")).string());
    return st;
}

std::string checkpoint_metadata(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "meta.json");
    if (!mf) throw std::runtime_error("checkpoint: cannot open " + dir + "/meta.json");
    std::string s((std::istreambuf_iterator<char>(mf)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace omnivid
