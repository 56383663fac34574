// Acceptance gates. Each criterion is selectable by number (argv[1]) and
// prints exactly one PASS/FAIL line; with no argument every criterion runs.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "omnivid/cli.hpp"
#include "omnivid/datagen.hpp"
#include "omnivid/digest.hpp"
#include "omnivid/metrics.hpp"
#include "omnivid/tomn.hpp"
#include "omnivid/trainer.hpp"

using namespace omnivid;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

Video random_video(Rng& rng, uint32_t f, uint32_t h, uint32_t w) {
    Video v(f, h, w);
    for (auto& x : v.data) x = static_cast<float>(rng.uniform());
    return v;
}

TaskSample make_sample(TaskKind task, const ModelConfig& cfg, Rng& rng) {
    uint32_t hp = cfg.h_l * kPatchSize, wp = cfg.w_l * kPatchSize;
    TaskSample s;
    s.task = task;
    s.instruction.text = "fixture sample";
    switch (task) {
        case TaskKind::T2V: break;
        case TaskKind::I2V:
            s.instruction.refs.push_back({RefKind::FirstFrame, "f.tomn"});
            s.conditions.push_back(encode(random_video(rng, 1, hp, wp), GridRole::FirstFrame));
            break;
        case TaskKind::FLF2V:
            s.instruction.refs.push_back({RefKind::FirstFrame, "f.tomn"});
            s.instruction.refs.push_back({RefKind::LastFrame, "l.tomn"});
            s.conditions.push_back(encode(random_video(rng, 1, hp, wp), GridRole::FirstFrame));
            s.conditions.push_back(encode(random_video(rng, 1, hp, wp), GridRole::LastFrame));
            break;
        case TaskKind::InContextGen:
            s.instruction.refs.push_back({RefKind::Image, "r.tomn"});
            s.instruction.refs.push_back({RefKind::VideoRef, "v.tomn"});
            s.conditions.push_back(encode(random_video(rng, 1, hp, wp), GridRole::ReferenceImage));
            s.conditions.push_back(
                encode(random_video(rng, cfg.f_l, hp, wp), GridRole::ConditionVideo));
            break;
        case TaskKind::InContextEdit:
            s.instruction.refs.push_back({RefKind::VideoRef, "v.tomn"});
            s.conditions.push_back(
                encode(random_video(rng, cfg.f_l, hp, wp), GridRole::ConditionVideo));
            break;
    }
    s.target = encode(random_video(rng, cfg.f_l, hp, wp), GridRole::Target);
    return s;
}

Dataset tiny_dataset(const ModelConfig& cfg, const ParamMap& params, uint64_t seed) {
    Rng rng(seed);
    std::vector<TaskSample> samples;
    for (int t = 0; t < kNumTasks; ++t)
        for (int i = 0; i < 2; ++i)
            samples.push_back(make_sample(static_cast<TaskKind>(t), cfg, rng));
    return Dataset::from_samples(samples, params);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

SceneSpec scene_with_objects(uint64_t seed, uint32_t canvas = 32, uint32_t frames = 6) {
    Rng rng(seed);
    for (int attempt = 0; attempt < 50; ++attempt) {
        SceneSpec spec = random_scene(rng, canvas, frames);
        if (!spec.objects.empty()) return spec;
    }
    throw std::runtime_error("could not draw a scene with objects");
}

// ---------------------------------------------------------------------------
// 1. positional rotation: shift invariance, norm preservation, disjointness
// ---------------------------------------------------------------------------

Outcome criterion_rope() {
    RopeConfig cfg;  // head_dim 32, split (4,6,6)
    cfg.check();
    Rng rng(101);

    double worst_shift = 0, worst_norm = 0;
    for (int trial = 0; trial < 200; ++trial) {
        Position3 p1{int64_t(rng.below(33)) - 16, int64_t(rng.below(33)) - 16,
                     int64_t(rng.below(33)) - 16};
        Position3 p2{int64_t(rng.below(33)) - 16, int64_t(rng.below(33)) - 16,
                     int64_t(rng.below(33)) - 16};
        Offset3 d{int64_t(rng.below(21)) - 10, int64_t(rng.below(21)) - 10,
                  int64_t(rng.below(21)) - 10};

        std::vector<float> q(cfg.head_dim), k(cfg.head_dim);
        for (auto& v : q) v = float(rng.normal());
        for (auto& v : k) v = float(rng.normal());

        auto rotated_dot = [&](Position3 a, Position3 b) {
            std::vector<float> qa = q, kb = k;
            std::vector<double> an = angles(a, cfg), bn = angles(b, cfg);
            std::vector<float> af(an.begin(), an.end()), bf(bn.begin(), bn.end());
            apply_rope<float>(qa, af);
            apply_rope<float>(kb, bf);
            double dot = 0;
            for (int i = 0; i < cfg.head_dim; ++i) dot += double(qa[i]) * kb[i];
            return dot;
        };

        worst_shift = std::max(worst_shift,
                               std::fabs(rotated_dot(p1, p2) - rotated_dot(p1 + d, p2 + d)));

        std::vector<float> qa = q;
        std::vector<double> an = angles(p1, cfg);
        std::vector<float> af(an.begin(), an.end());
        apply_rope<float>(qa, af);
        double n0 = 0, n1 = 0;
        for (int i = 0; i < cfg.head_dim; ++i) {
            n0 += double(q[i]) * q[i];
            n1 += double(qa[i]) * qa[i];
        }
        worst_norm = std::max(worst_norm, std::fabs(std::sqrt(n1) - std::sqrt(n0)));
    }

    bool ok = worst_shift <= 1e-5 && worst_norm <= 1e-6;

    // disjointness: every policy-table condition grid that is meant to be
    // spatially separated never shares a 3D position with the target grid
    uint32_t ft = 4, ht = 2, wt = 3;
    std::set<std::tuple<int64_t, int64_t, int64_t>> target;
    for (const auto& p : build_position_grid(ft, ht, wt, {0, 0, 0}))
        target.insert({p.t, p.h, p.w});

    struct Row {
        TaskKind task;
        GridRole role;
        uint32_t f;  // condition grid frame count
        bool disjoint;
    };
    const Row rows[] = {
        {TaskKind::I2V, GridRole::FirstFrame, 1, false},
        {TaskKind::FLF2V, GridRole::FirstFrame, 1, false},
        {TaskKind::FLF2V, GridRole::LastFrame, 1, false},
        {TaskKind::InContextGen, GridRole::ConditionVideo, ft, true},
        {TaskKind::InContextGen, GridRole::ReferenceImage, 1, true},
        {TaskKind::InContextEdit, GridRole::ConditionVideo, ft, true},
        {TaskKind::InContextEdit, GridRole::ReferenceImage, 1, true},
    };
    for (const auto& row : rows) {
        Offset3 off = offset_policy(row.task, row.role, ft, ht, wt);
        bool overlap = false;
        for (const auto& p : build_position_grid(row.f, ht, wt, off))
            overlap |= target.count({p.t, p.h, p.w}) > 0;
        // boundary-frame conditions intentionally share target positions
        if (row.disjoint && overlap) ok = false;
        if (!row.disjoint && !overlap) ok = false;
    }
    for (int task = 0; task < kNumTasks; ++task)
        if (offset_policy(static_cast<TaskKind>(task), GridRole::Target, ft, ht, wt) !=
            Offset3{0, 0, 0})
            ok = false;

    char buf[128];
    std::snprintf(buf, sizeof(buf), "max shift dev %.2e, max norm dev %.2e", worst_shift,
                  worst_norm);
    return {ok, buf};
}

// ---------------------------------------------------------------------------
// 2. codec exactness
// ---------------------------------------------------------------------------

Outcome criterion_codec() {
    int exact = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        uint32_t f = 1 + uint32_t(rng.below(6));
        uint32_t h = kPatchSize * (1 + uint32_t(rng.below(8)));
        uint32_t w = kPatchSize * (1 + uint32_t(rng.below(8)));
        Video v = random_video(rng, f, h, w);
        Video back = decode(encode(v, GridRole::Target));
        exact += back.frames == v.frames && back.height == v.height && back.width == v.width &&
                 back.data == v.data;
    }
    return {exact == 50, std::to_string(exact) + "/50 round trips bitwise"};
}

// ---------------------------------------------------------------------------
// 3. gradient check on all five task assemblies
// ---------------------------------------------------------------------------

Outcome criterion_gradcheck() {
    ModelConfig cfg = gradcheck_config();
    ParamMap pf = init_all_params(cfg, 11);
    ParamMapT<double> p = cast_params<double>(pf);

    Rng data_rng(21);
    double worst = 0;
    long checked = 0;
    for (int task = 0; task < kNumTasks; ++task) {
        TaskSample sample = make_sample(static_cast<TaskKind>(task), cfg, data_rng);
        PreparedSample prep = prepare_sample(sample, pf);

        Rng loss_rng(31 + task);
        ParamMapT<double> grads;
        {
            Rng r = loss_rng;
            fm_loss<double>(cfg, p, prep, r, &grads);
        }

        Rng pick(41 + task);
        for (auto& [name, g] : grads) {
            if (name.rfind("dit.", 0) != 0 && name.rfind("adaptor.", 0) != 0) continue;
            auto& t = p.at(name);
            for (int s = 0; s < 32; ++s) {
                size_t i = pick.below(t.numel());
                double eps = 1e-5, orig = t[i];
                auto loss_at = [&](double v) {
                    t[i] = v;
                    Rng r = loss_rng;
                    return double(fm_loss<double>(cfg, p, prep, r, nullptr));
                };
                double fd = (loss_at(orig + eps) - loss_at(orig - eps)) / (2 * eps);
                t[i] = orig;
                // the 1e-6 floor keeps sub-noise-floor gradients (the central
                // difference cancels to ~1e-10 absolute here) from reading as
                // relative error
                double denom = std::max({1e-6, std::fabs(fd), std::fabs(double(g[i]))});
                worst = std::max(worst, std::fabs(fd - g[i]) / denom);
                ++checked;
            }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%ld sampled parameters, worst rel err %.2e", checked, worst);
    return {worst <= 1e-3, buf};
}

// ---------------------------------------------------------------------------
// 4. stage gating
// ---------------------------------------------------------------------------

Outcome criterion_stage_gating() {
    ModelConfig cfg = gradcheck_config();
    TrainState st = fresh_state(cfg, 3);
    Dataset data = tiny_dataset(cfg, st.params, 4);

    uint64_t enc0 = params_digest(st.params, "encoder.");
    uint64_t dit0 = params_digest(st.params, "dit.");
    uint64_t ada0 = params_digest(st.params, "adaptor.");

    StagePlan s1 = StagePlan::default_plan(1);
    s1.steps = 10;
    s1.lr = 1e-3;
    s1.seed = 3;
    run_stage(st, s1, cfg, data);
    bool ok = params_digest(st.params, "encoder.") == enc0 &&
              params_digest(st.params, "dit.") == dit0 &&
              params_digest(st.params, "adaptor.") != ada0;

    StagePlan s2 = StagePlan::default_plan(2);
    s2.steps = 10;
    s2.lr = 1e-3;
    s2.seed = 3;
    run_stage(st, s2, cfg, data);
    ok = ok && params_digest(st.params, "encoder.") == enc0 &&
         params_digest(st.params, "dit.") != dit0;

    return {ok, "frozen digests held through 10+10 steps"};
}

// ---------------------------------------------------------------------------
// 5. oracle sampler
// ---------------------------------------------------------------------------

Outcome criterion_oracle_sampler() {
    uint32_t f = 2, h = 3, w = 3, c = 8;
    Rng init(51);
    LatentGrid x0(f, h, w, c, GridRole::Target);
    for (auto& v : x0.data) v = float(init.normal());

    // with the straight-path field (x - x0)/t every Euler step count is exact
    VelocityFn field = [&](const Tensor<float>& x, double t) {
        Tensor<float> vel(x.dims);
        for (size_t i = 0; i < x.numel(); ++i)
            vel[i] = float((double(x[i]) - double(x0.data[i])) / t);
        return vel;
    };

    double worst = 0;
    for (int steps : {1, 4, 16}) {
        Rng rng(52);
        LatentGrid out = euler_sample(f, h, w, c, steps, rng, field);
        for (size_t i = 0; i < out.numel(); ++i)
            worst = std::max(worst, std::fabs(double(out.data[i]) - double(x0.data[i])));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max recovery error %.2e", worst);
    return {worst <= 1e-6, buf};
}

// ---------------------------------------------------------------------------
// 6. overfit and recover
// ---------------------------------------------------------------------------

double mean_of(const std::vector<double>& v, size_t begin, size_t end) {
    double acc = 0;
    for (size_t i = begin; i < end; ++i) acc += v[i];
    return acc / double(end - begin);
}

std::vector<double> telemetry_losses(const fs::path& csv) {
    std::ifstream f(csv);
    std::string line;
    std::getline(f, line);  // header
    std::vector<double> losses;
    while (std::getline(f, line)) {
        // step,stage,task,loss,wall_time_s
        size_t a = line.find(','), b = line.find(',', a + 1), c = line.find(',', b + 1);
        size_t d = line.find(',', c + 1);
        losses.push_back(std::stod(line.substr(c + 1, d - c - 1)));
    }
    return losses;
}

Outcome criterion_overfit() {
    fs::path dir = fs::temp_directory_path() / "omnivid_accept6";
    fs::remove_all(dir);

    DatagenConfig dc;
    dc.canvas = 16;
    dc.frames = 4;
    dc.seed = 7;
    for (int i = 0; i < kNumTasks; ++i) dc.counts[i] = 4;
    build_dataset(dc, (dir / "data").string());

    ModelConfig mc;  // desk default: 4 layers, d_model 64, 4x4x4 latent
    mc.check();
    TrainState st = fresh_state(mc, 7);

    std::vector<TaskSample> samples;
    for (const auto& rec : read_manifest((dir / "data" / "manifest.jsonl").string()))
        samples.push_back(load_sample(rec, (dir / "data").string()));
    Dataset data = Dataset::from_samples(samples, st.params);

    StagePlan s1 = StagePlan::default_plan(1);
    s1.steps = 500;
    s1.optimizer = "adam";
    s1.lr = 2e-3;
    s1.grad_accum = 4;
    s1.seed = 7;
    run_stage(st, s1, mc, data, (dir / "stage1.csv").string());

    StagePlan s2 = StagePlan::default_plan(2);
    s2.steps = 2000;
    s2.optimizer = "adam";
    s2.lr = 1e-3;
    s2.grad_accum = 4;
    s2.seed = 7;
    run_stage(st, s2, mc, data, (dir / "stage2.csv").string());

    std::vector<double> l1 = telemetry_losses(dir / "stage1.csv");
    std::vector<double> l2 = telemetry_losses(dir / "stage2.csv");
    double initial = mean_of(l1, 0, 25);
    double final_loss = mean_of(l2, l2.size() - 25, l2.size());

    bool ok = final_loss <= 0.2 * initial;

    double bf = -1, bl = -1, pres = -1;
    for (const auto& s : samples) {
        if (s.task == TaskKind::FLF2V && bf < 0) {
            PreparedSample prep = prepare_sample(s, st.params);
            Video gen = decode(sample_latent(mc, st.params, prep, 32, 123));
            Video first = decode(s.conditions[0]), last = decode(s.conditions[1]);
            std::tie(bf, bl) = boundary_frame_error(gen, first, last);
        }
        if (s.task == TaskKind::InContextEdit && s.edit_mask && pres < 0) {
            // preservation needs a mask complement; skip global (all-ones) edits
            bool has_complement = false;
            for (uint8_t m : s.edit_mask->data) has_complement |= m == 0;
            if (!has_complement) continue;
            PreparedSample prep = prepare_sample(s, st.params);
            Video gen = decode(sample_latent(mc, st.params, prep, 32, 124));
            Video src = decode(s.conditions[0]);
            pres = preservation_error(src, gen, *s.edit_mask);
        }
    }
    ok = ok && bf >= 0 && bf <= 0.02 && bl <= 0.02 && pres >= 0 && pres <= 0.02;

    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "loss %.4f -> %.4f (ratio %.3f), boundary (%.4f, %.4f), preservation %.4f",
                  initial, final_loss, final_loss / initial, bf, bl, pres);
    return {ok, buf};
}

// ---------------------------------------------------------------------------
// 7. data-pipeline fidelity
// ---------------------------------------------------------------------------

Outcome criterion_pipeline() {
    long clean_total = 0, clean_ok = 0;
    for (uint64_t seed = 60; seed < 66; ++seed) {
        SceneSpec spec = scene_with_objects(seed);
        RenderResult r = render(spec);

        EditPair ins = make_insertion_pair(spec, r, 0, seed);
        Video iref = extract_reference(ins);
        EditPair rem = make_removal_pair(spec, r, seed);
        Video rref = extract_reference(rem);

        ++clean_total, clean_ok += verify_sample(ins, &iref).accepted;
        ++clean_total, clean_ok += verify_sample(rem, &rref).accepted;
        ++clean_total, clean_ok += verify_sample(make_style_pair(r, int(seed % kNumStyles)), nullptr).accepted;
        ++clean_total,
            clean_ok +=
            verify_sample(make_modify_pair(spec, r, ModifyMode::Subject, seed), nullptr).accepted;
        ++clean_total,
            clean_ok +=
            verify_sample(make_modify_pair(spec, r, ModifyMode::Background, seed), nullptr)
                .accepted;
    }

    long corrupt_total = 0, corrupt_ok = 0;
    for (uint64_t seed = 70; seed < 80; ++seed) {
        SceneSpec spec = scene_with_objects(seed);
        RenderResult r = render(spec);
        Rng noise(seed);

        {  // one tampered pixel outside the mask
            EditPair pair = make_insertion_pair(spec, r, 0, seed);
            Video ref = extract_reference(pair);
            for (size_t i = 0; i < pair.mask.numel(); ++i)
                if (!pair.mask[i]) {
                    pair.target.data[3 * i] =
                        pair.target.data[3 * i] > 0.5f ? 0.0f : pair.target.data[3 * i] + 0.4f;
                    break;
                }
            Verdict v = verify_sample(pair, &ref);
            ++corrupt_total, corrupt_ok += !v.accepted && v.reason == "unintended editing";
        }
        {  // the removed object left in place
            EditPair pair = make_removal_pair(spec, r, seed);
            Video ref = extract_reference(pair);
            for (size_t i = 0; i < pair.mask.numel(); ++i)
                if (pair.mask[i])
                    for (int c = 0; c < 3; ++c)
                        pair.target.data[3 * i + c] = pair.source.data[3 * i + c];
            Verdict v = verify_sample(pair, &ref);
            ++corrupt_total, corrupt_ok += !v.accepted && v.reason == "incomplete removal";
        }
        {  // subject recolored away from its reference
            EditPair pair = make_insertion_pair(spec, r, 0, seed);
            Video ref = extract_reference(pair);
            for (size_t i = 0; i < pair.mask.numel(); ++i)
                if (pair.mask[i])
                    for (int c = 0; c < 3; ++c) pair.target.data[3 * i + c] = 0.03f;
            Verdict v = verify_sample(pair, &ref);
            ++corrupt_total, corrupt_ok += !v.accepted && v.reason == "identity inconsistency";
        }
        {  // noisy fill in the inpainted region
            EditPair pair = make_insertion_pair(spec, r, 0, seed);
            Video ref = extract_reference(pair);
            for (size_t i = 0; i < pair.mask.numel(); ++i)
                if (pair.mask[i])
                    for (int c = 0; c < 3; ++c) {
                        float v = pair.source.data[3 * i + c] + float(noise.uniform(-0.4, 0.4));
                        pair.source.data[3 * i + c] = std::min(1.0f, std::max(0.0f, v));
                    }
            Verdict v = verify_sample(pair, &ref);
            ++corrupt_total, corrupt_ok += !v.accepted && v.reason == "unnatural inpainting";
        }
    }

    char buf[128];
    std::snprintf(buf, sizeof(buf), "clean %ld/%ld accepted, corrupted %ld/%ld rejected",
                  clean_ok, clean_total, corrupt_ok, corrupt_total);
    return {clean_ok == clean_total && corrupt_ok == corrupt_total && corrupt_total == 40, buf};
}

// ---------------------------------------------------------------------------
// 8. task inference and manifest round trips
// ---------------------------------------------------------------------------

Outcome criterion_task_inference() {
    auto instr = [](std::vector<RefKind> kinds, std::optional<TaskKind> override_task =
                                                    std::nullopt) {
        Instruction in;
        in.text = "fixture";
        int i = 0;
        for (RefKind k : kinds) in.refs.push_back({k, "ref" + std::to_string(i++) + ".tomn"});
        in.task_override = override_task;
        return in;
    };

    struct Row {
        Instruction in;
        TaskKind want;
    };
    std::vector<Row> table = {
        {instr({}), TaskKind::T2V},
        {instr({RefKind::FirstFrame}), TaskKind::I2V},
        {instr({RefKind::FirstFrame, RefKind::LastFrame}), TaskKind::FLF2V},
        {instr({RefKind::LastFrame, RefKind::FirstFrame}), TaskKind::FLF2V},
        {instr({RefKind::Image, RefKind::VideoRef}), TaskKind::InContextGen},
        {instr({RefKind::VideoRef, RefKind::Image}), TaskKind::InContextGen},
        {instr({RefKind::Image, RefKind::Image, RefKind::VideoRef}), TaskKind::InContextGen},
        {instr({RefKind::VideoRef}), TaskKind::InContextEdit},
        {instr({RefKind::Image, RefKind::VideoRef}, TaskKind::InContextEdit),
         TaskKind::InContextEdit},
        {instr({RefKind::VideoRef}, TaskKind::InContextEdit), TaskKind::InContextEdit},
    };
    long agree = 0;
    for (const auto& row : table) agree += infer_task(row.in) == row.want;

    // lossless serialization over 100 varied fixtures
    Rng rng(81);
    long round_trips = 0;
    for (int i = 0; i < 100; ++i) {
        ManifestRecord rec;
        rec.instruction = table[rng.below(table.size())].in;
        rec.instruction.text = "fixture " + std::to_string(i) + " with \"quotes\" and spaces";
        rec.target_path = "target_" + std::to_string(i) + ".tomn";
        if (rng.uniform() < 0.5) rec.mask_path = "mask.tomn";
        if (rng.uniform() < 0.5) rec.reference_path = "ref.tomn";
        std::string line = serialize_record(rec);
        round_trips += serialize_record(deserialize_record(line)) == line;
    }

    char buf[96];
    std::snprintf(buf, sizeof(buf), "table %ld/%zu, round trips %ld/100", agree, table.size(),
                  round_trips);
    return {agree == long(table.size()) && round_trips == 100, buf};
}

// ---------------------------------------------------------------------------
// 9. end-to-end determinism
// ---------------------------------------------------------------------------

Outcome criterion_determinism() {
    fs::path root = fs::temp_directory_path() / "omnivid_accept9";
    fs::remove_all(root);

    auto pipeline = [&](const std::string& run) {
        fs::path base = root / run;
        fs::create_directories(base);
        std::ofstream cfg(base / "datagen.cfg");
        cfg << "canvas = 16\nframes = 4\nseed = 5\n";
        for (int i = 0; i < kNumTasks; ++i)
            cfg << "count." << task_name(static_cast<TaskKind>(i)) << " = 1\n";
        cfg.close();

        // identical relative paths keep the report metadata identical too
        fs::path prev = fs::current_path();
        fs::current_path(base);
        int rc = cli_main({"datagen", "--config", "datagen.cfg", "--out", "data"});
        rc |= cli_main({"train", "--manifest", "data/manifest.jsonl", "--out", "ck", "--stage",
                        "1", "--steps", "30", "--seed", "3"});
        rc |= cli_main({"eval", "--checkpoint", "ck", "--manifest", "data/manifest.jsonl",
                        "--out", "rep", "--seed", "9", "--sample-steps", "8"});
        fs::current_path(prev);
        if (rc != 0) throw std::runtime_error("pipeline " + run + " failed");
    };

    pipeline("run1");
    pipeline("run2");

    bool csv_same = slurp(root / "run1" / "rep" / "report.csv") ==
                    slurp(root / "run2" / "rep" / "report.csv");
    bool txt_same = slurp(root / "run1" / "rep" / "report.txt") ==
                    slurp(root / "run2" / "rep" / "report.txt");
    bool manifest_same = slurp(root / "run1" / "data" / "manifest.jsonl") ==
                         slurp(root / "run2" / "data" / "manifest.jsonl");

    std::string detail = std::string("report.csv ") + (csv_same ? "identical" : "DIFFERS") +
                         ", report.txt " + (txt_same ? "identical" : "DIFFERS") + ", manifest " +
                         (manifest_same ? "identical" : "DIFFERS");
    return {csv_same && txt_same && manifest_same, detail};
}

struct Criterion {
    const char* label;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"positional rotation invariants", criterion_rope},
    {"codec exactness", criterion_codec},
    {"gradient check", criterion_gradcheck},
    {"stage gating", criterion_stage_gating},
    {"oracle sampler", criterion_oracle_sampler},
    {"overfit and recover", criterion_overfit},
    {"data-pipeline fidelity", criterion_pipeline},
    {"task inference", criterion_task_inference},
    {"end-to-end determinism", criterion_determinism},
};

int run_one(int index) {
    const Criterion& c = kCriteria[index];
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = c.run();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d (%s): %s (%s, %.1fs)\n", index + 1, c.label,
                out.ok ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
    return out.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) {
        int n = std::atoi(argv[1]);
        if (n < 1 || n > 9) {
            std::fprintf(stderr, "usage: %s [1-9]\n", argv[0]);
            return 2;
        }
        return run_one(n - 1);
    }
    int rc = 0;
    for (int i = 0; i < 9; ++i) rc |= run_one(i);
    return rc;
}
