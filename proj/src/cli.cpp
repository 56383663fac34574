#include "omnivid/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "omnivid/datagen.hpp"
#include "omnivid/metrics.hpp"
#include "omnivid/tomn.hpp"
#include "omnivid/trainer.hpp"

namespace omnivid {

namespace fs = std::filesystem;

ModelConfig model_config_from(const KvConfig& cfg) {
    ModelConfig mc;
    mc.d_model = static_cast<int>(cfg.get_int("d_model", mc.d_model));
    mc.layers = static_cast<int>(cfg.get_int("layers", mc.layers));
    mc.heads = static_cast<int>(cfg.get_int("heads", mc.heads));
    mc.head_dim = static_cast<int>(cfg.get_int("head_dim", mc.head_dim));
    mc.d_ff = static_cast<int>(cfg.get_int("d_ff", mc.d_ff));
    mc.t_embed = static_cast<int>(cfg.get_int("t_embed", mc.t_embed));
    mc.rope.head_dim = mc.head_dim;
    // axis split must cover head_dim/2 pairs; defaults fit head_dim 32
    mc.rope.n_t = static_cast<int>(cfg.get_int("rope.n_t", 4));
    mc.rope.n_h = static_cast<int>(cfg.get_int("rope.n_h", 6));
    mc.rope.n_w = static_cast<int>(cfg.get_int("rope.n_w", 6));
    mc.rope.base = cfg.get_double("rope.base", 10000.0);
    mc.f_l = static_cast<uint32_t>(cfg.get_int("f_l", mc.f_l));
    mc.h_l = static_cast<uint32_t>(cfg.get_int("h_l", mc.h_l));
    mc.w_l = static_cast<uint32_t>(cfg.get_int("w_l", mc.w_l));
    mc.init_seed = static_cast<uint64_t>(cfg.get_int("init_seed", 1234));
    mc.check();
    return mc;
}

namespace {

KvConfig load_config(const std::string& path) {
    return path.empty() ? KvConfig() : KvConfig::from_file(path);
}

Dataset load_dataset(const std::string& manifest_path, const ParamMap& params) {
    std::string base_dir = fs::path(manifest_path).parent_path().string();
    std::vector<TaskSample> samples;
    for (const auto& rec : read_manifest(manifest_path))
        samples.push_back(load_sample(rec, base_dir));
    return Dataset::from_samples(samples, params);
}

// Generate for one manifest record with the checkpointed model.
Video generate_for_record(const ModelConfig& mc, const ParamMap& params,
                          const ManifestRecord& rec, const std::string& base_dir, int sample_steps,
                          uint64_t seed, double guidance) {
    TaskSample sample = load_sample(rec, base_dir);
    PreparedSample prep = prepare_sample(sample, params);
    LatentGrid gen = sample_latent(mc, params, prep, sample_steps, seed, guidance);
    return decode(gen);
}

int run_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out_dir, const std::string& resume_from, int stage_flag,
              long steps_flag, long seed_flag) {
    KvConfig cfg = load_config(config_path);
    if (stage_flag > 0) cfg.set("stage", std::to_string(stage_flag));
    if (steps_flag >= 0) cfg.set("steps", std::to_string(steps_flag));
    if (seed_flag >= 0) cfg.set("seed", std::to_string(seed_flag));
    ModelConfig mc = model_config_from(cfg);
    StagePlan plan = StagePlan::from_config(cfg);

    TrainState state = resume_from.empty() ? fresh_state(mc, plan.seed)
                                           : load_checkpoint(resume_from, mc.digest());
    Dataset data = load_dataset(manifest_path, state.params);

    fs::create_directories(out_dir);
    run_stage(state, plan, mc, data, (fs::path(out_dir) / "telemetry.csv").string());
    save_checkpoint(out_dir, state);

    double last = state.loss_history.empty() ? 0.0 : state.loss_history.back();
    std::cout << "trained stage=" << plan.stage << " steps=" << plan.steps
              << " final_loss=" << last << " checkpoint=" << out_dir << "\n";
    return 0;
}

int run_generate(const std::string& config_path, const std::string& checkpoint_dir,
                 const std::string& manifest_path, long index, const std::string& out_path,
                 int sample_steps, long seed, double guidance, bool want_edit, bool ppm) {
    KvConfig cfg = load_config(config_path);
    ModelConfig mc = model_config_from(cfg);
    TrainState state = load_checkpoint(checkpoint_dir, mc.digest());

    auto records = read_manifest(manifest_path);
    if (index < 0 || size_t(index) >= records.size())
        throw std::runtime_error("--index " + std::to_string(index) + " out of range, manifest has " +
                                 std::to_string(records.size()) + " records");
    const ManifestRecord& rec = records[index];
    TaskKind task = infer_task(rec.instruction);
    if (want_edit && task != TaskKind::InContextEdit)
        throw std::runtime_error(std::string("edit: record ") + std::to_string(index) +
                                 " infers task " + task_name(task) + ", not in_context_edit");

    std::string base_dir = fs::path(manifest_path).parent_path().string();
    Video out = generate_for_record(mc, state.params, rec, base_dir, sample_steps,
                                    static_cast<uint64_t>(seed), guidance);
    tomn_write(out_path, out.to_tensor());
    if (ppm) export_ppm(out, fs::path(out_path).replace_extension("").string());
    std::cout << "task=" << task_name(task) << " wrote " << out_path << " ("
              << out.frames << "x" << out.height << "x" << out.width << ")\n";
    return 0;
}

int run_eval(const std::string& config_path, const std::string& checkpoint_dir,
             const std::string& manifest_path, const std::string& out_dir, int sample_steps,
             long seed, double guidance) {
    KvConfig cfg = load_config(config_path);
    ModelConfig mc = model_config_from(cfg);
    TrainState state = load_checkpoint(checkpoint_dir, mc.digest());
    std::string base_dir = fs::path(manifest_path).parent_path().string();

    std::vector<EvalRow> rows;
    auto records = read_manifest(manifest_path);
    long index = 0;
    for (const auto& rec : records) {
        TaskSample sample = load_sample(rec, base_dir);
        Video gen = generate_for_record(mc, state.params, rec, base_dir, sample_steps,
                                        static_cast<uint64_t>(seed) + index, guidance);
        Video target = decode(sample.target);

        EvalRow row;
        row.index = index;
        row.task = sample.task;
        row.mse = video_mse(gen, target);
        row.psnr = psnr_db(row.mse);

        if (sample.task == TaskKind::FLF2V) {
            Video first, last;
            for (const auto& r : rec.instruction.refs) {
                Video img = Video::from_tensor(tomn_read(base_dir + "/" + r.path));
                if (r.kind == RefKind::FirstFrame) first = img;
                if (r.kind == RefKind::LastFrame) last = img;
            }
            auto [bf, bl] = boundary_frame_error(gen, first, last);
            row.has_boundary = true;
            row.boundary_first = bf;
            row.boundary_last = bl;
        }
        if (sample.task == TaskKind::InContextEdit && sample.edit_mask) {
            // global edits (all-ones mask) preserve nothing; the metric does not apply
            bool has_complement = false;
            for (uint8_t m : sample.edit_mask->data) has_complement |= m == 0;
            if (has_complement)
                for (const auto& r : rec.instruction.refs)
                    if (r.kind == RefKind::VideoRef) {
                        Video src = Video::from_tensor(tomn_read(base_dir + "/" + r.path));
                        row.has_preservation = true;
                        row.preservation = preservation_error(src, gen, *sample.edit_mask);
                    }
        }
        if (sample.task == TaskKind::InContextGen && !rec.reference_path.empty() &&
            sample.edit_mask) {
            Video ref = Video::from_tensor(tomn_read(base_dir + "/" + rec.reference_path));
            row.has_identity = true;
            row.identity = identity_score(ref, gen, *sample.edit_mask);
        }
        rows.push_back(row);
        ++index;
    }

    std::string meta = "checkpoint: " + checkpoint_dir + "\nseed: " + std::to_string(seed) +
                       "\nsample_steps: " + std::to_string(sample_steps) +
                       "\nguidance: " + std::to_string(guidance);
    emit_report(rows, out_dir, meta);
    std::cout << "evaluated " << rows.size() << " samples, report in " << out_dir << "\n";
    return 0;
}

int run_inspect(const std::string& checkpoint_dir, const std::string& manifest_path) {
    if (checkpoint_dir.empty() && manifest_path.empty())
        throw std::runtime_error("inspect: pass --checkpoint and/or --manifest");
    if (!checkpoint_dir.empty()) std::cout << checkpoint_metadata(checkpoint_dir);
    if (!manifest_path.empty()) {
        auto records = read_manifest(manifest_path);
        long counts[kNumTasks] = {};
        for (const auto& rec : records) ++counts[static_cast<int>(infer_task(rec.instruction))];
        std::cout << "records: " << records.size() << "\n";
        for (int i = 0; i < kNumTasks; ++i)
            std::cout << "  " << task_name(static_cast<TaskKind>(i)) << ": " << counts[i] << "\n";
    }
    return 0;
}

}  // namespace

int cli_main(std::vector<std::string> args) {
    if (const char* tv = std::getenv("OMNIVID_THREADS")) {
        char* end = nullptr;
        long n = std::strtol(tv, &end, 10);
        if (end == tv || *end != '\0' || n < 1) {
            std::cerr << "usage error: OMNIVID_THREADS must be a positive integer, got \"" << tv
                      << "\"\n";
            return 2;
        }
        // single-threaded engine: any cap >= 1 is already satisfied
    }

    CLI::App app{"unified video generation and editing, desk scale"};
    app.require_subcommand(1);

    std::string config_path, out_path, checkpoint_dir, manifest_path, resume_from;
    long seed = -1, steps_flag = -1, index = 0;
    int stage = 0, sample_steps = 16;
    double guidance = 1.0;
    bool ppm = false;
    std::function<int()> action;

    auto* dg = app.add_subcommand("datagen", "build a procedural dataset");
    dg->add_option("--config", config_path, "flat key=value dataset config");
    dg->add_option("--seed", seed, "overrides the config seed");
    dg->add_option("--out", out_path, "output directory")->required();
    dg->callback([&] {
        action = [&]() {
            DatagenConfig dc = DatagenConfig::from_config(load_config(config_path));
            if (seed >= 0) dc.seed = static_cast<uint64_t>(seed);
            BuildStats stats = build_dataset(dc, out_path);
            std::cout << "emitted=" << stats.emitted << " rejected=" << stats.rejected << " in "
                      << out_path << "\n";
            return 0;
        };
    });

    auto* tr = app.add_subcommand("train", "run one training stage");
    tr->add_option("--config", config_path, "model + stage-plan config");
    tr->add_option("--manifest", manifest_path, "dataset manifest.jsonl")->required();
    tr->add_option("--out", out_path, "checkpoint output directory")->required();
    tr->add_option("--checkpoint", resume_from, "resume from this checkpoint");
    tr->add_option("--stage", stage, "training stage")->check(CLI::IsMember({1, 2}));
    tr->add_option("--steps", steps_flag, "step count override");
    tr->add_option("--seed", seed, "seed override");
    tr->callback([&] {
        action = [&]() {
            return run_train(config_path, manifest_path, out_path, resume_from, stage, steps_flag,
                             seed);
        };
    });

    auto add_infer_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "model config");
        cmd->add_option("--checkpoint", checkpoint_dir, "trained model checkpoint")->required();
        cmd->add_option("--manifest", manifest_path, "manifest.jsonl with conditioning records")
            ->required();
        cmd->add_option("--index", index, "record index in the manifest");
        cmd->add_option("--seed", seed, "sampling seed");
        cmd->add_option("--sample-steps", sample_steps, "Euler integration steps");
        cmd->add_option("--guidance", guidance, "classifier-free guidance scale");
    };

    auto* gen = app.add_subcommand("generate", "sample a video for a manifest record");
    add_infer_flags(gen);
    gen->add_option("--out", out_path, "output tensor path")->required();
    gen->add_flag("--ppm", ppm, "also export PPM frames");
    gen->callback([&] {
        action = [&]() {
            return run_generate(config_path, checkpoint_dir, manifest_path, index, out_path,
                                sample_steps, seed < 0 ? 0 : seed, guidance, false, ppm);
        };
    });

    auto* ed = app.add_subcommand("edit", "sample an edited video for an editing record");
    add_infer_flags(ed);
    ed->add_option("--out", out_path, "output tensor path")->required();
    ed->add_flag("--ppm", ppm, "also export PPM frames");
    ed->callback([&] {
        action = [&]() {
            return run_generate(config_path, checkpoint_dir, manifest_path, index, out_path,
                                sample_steps, seed < 0 ? 0 : seed, guidance, true, ppm);
        };
    });

    auto* ev = app.add_subcommand("eval", "generate for every record and emit metric reports");
    add_infer_flags(ev);
    ev->add_option("--out", out_path, "report output directory")->required();
    ev->callback([&] {
        action = [&]() {
            return run_eval(config_path, checkpoint_dir, manifest_path, out_path, sample_steps,
                            seed < 0 ? 0 : seed, guidance);
        };
    });

    auto* in = app.add_subcommand("inspect", "print checkpoint or manifest metadata");
    in->add_option("--checkpoint", checkpoint_dir, "checkpoint directory");
    in->add_option("--manifest", manifest_path, "manifest.jsonl");
    in->callback([&] { action = [&]() { return run_inspect(checkpoint_dir, manifest_path); }; });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        return action ? action() : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace omnivid
