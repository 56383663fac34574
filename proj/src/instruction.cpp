#include "omnivid/instruction.hpp"

#include <fstream>

#include "json.hpp"
#include "omnivid/tomn.hpp"

namespace omnivid {

using ojson = nlohmann::ordered_json;

const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::T2V: return "t2v";
        case TaskKind::I2V: return "i2v";
        case TaskKind::FLF2V: return "flf2v";
        case TaskKind::InContextGen: return "in_context_gen";
        case TaskKind::InContextEdit: return "in_context_edit";
    }
    return "?";
}

std::optional<TaskKind> task_from_name(const std::string& s) {
    for (int i = 0; i < kNumTasks; ++i)
        if (s == task_name(static_cast<TaskKind>(i))) return static_cast<TaskKind>(i);
    return std::nullopt;
}

const char* ref_kind_name(RefKind k) {
    switch (k) {
        case RefKind::Image: return "image";
        case RefKind::VideoRef: return "video";
        case RefKind::FirstFrame: return "first_frame";
        case RefKind::LastFrame: return "last_frame";
    }
    return "?";
}

std::optional<RefKind> ref_kind_from_name(const std::string& s) {
    if (s == "image") return RefKind::Image;
    if (s == "video") return RefKind::VideoRef;
    if (s == "first_frame") return RefKind::FirstFrame;
    if (s == "last_frame") return RefKind::LastFrame;
    return std::nullopt;
}

namespace {

struct KindCounts {
    int image = 0, video = 0, first = 0, last = 0;
};

KindCounts count_kinds(const Instruction& instr) {
    KindCounts c;
    for (const auto& r : instr.refs) {
        switch (r.kind) {
            case RefKind::Image: ++c.image; break;
            case RefKind::VideoRef: ++c.video; break;
            case RefKind::FirstFrame: ++c.first; break;
            case RefKind::LastFrame: ++c.last; break;
        }
    }
    return c;
}

std::string combination_str(const KindCounts& c) {
    return "{image:" + std::to_string(c.image) + ", video:" + std::to_string(c.video) +
           ", first_frame:" + std::to_string(c.first) + ", last_frame:" + std::to_string(c.last) +
           "}";
}

}  // namespace

std::vector<std::string> validate(const Instruction& instr) {
    std::vector<std::string> violations;
    if (instr.text.empty()) violations.push_back("text empty");
    KindCounts c = count_kinds(instr);
    if (c.first > 1) violations.push_back("more than one first_frame ref");
    if (c.last > 1) violations.push_back("more than one last_frame ref");
    if (c.last == 1 && c.first == 0) violations.push_back("last_frame without first_frame");
    return violations;
}

TaskKind infer_task(const Instruction& instr) {
    auto violations = validate(instr);
    if (!violations.empty())
        throw std::invalid_argument("infer_task: invalid instruction: " + violations.front());

    KindCounts c = count_kinds(instr);
    std::optional<TaskKind> structural;
    if (c.image == 0 && c.video == 0 && c.first == 0 && c.last == 0)
        structural = TaskKind::T2V;
    else if (c.first == 1 && c.last == 0 && c.image == 0 && c.video == 0)
        structural = TaskKind::I2V;
    else if (c.first == 1 && c.last == 1 && c.image == 0 && c.video == 0)
        structural = TaskKind::FLF2V;
    else if (c.video == 1 && c.image == 0 && c.first == 0 && c.last == 0)
        structural = TaskKind::InContextEdit;
    else if (c.video == 1 && c.image >= 1 && c.first == 0 && c.last == 0)
        structural = TaskKind::InContextGen;

    if (!structural)
        throw std::invalid_argument("infer_task: ref combination outside the task table: " +
                                    combination_str(c));

    if (instr.task_override) {
        // image+video is the one structurally ambiguous combination
        bool ambiguous = *structural == TaskKind::InContextGen;
        bool allowed = *instr.task_override == *structural ||
                       (ambiguous && *instr.task_override == TaskKind::InContextEdit);
        if (!allowed)
            throw std::invalid_argument(std::string("infer_task: task override ") +
                                        task_name(*instr.task_override) +
                                        " inconsistent with ref combination " + combination_str(c));
        return *instr.task_override;
    }
    return *structural;
}

std::string serialize_record(const ManifestRecord& rec) {
    auto violations = validate(rec.instruction);
    if (!violations.empty())
        throw std::invalid_argument("serialize: invalid instruction: " + violations.front());

    ojson j;
    j["text"] = rec.instruction.text;
    j["refs"] = ojson::array();
    for (const auto& r : rec.instruction.refs)
        j["refs"].push_back(ojson{{"kind", ref_kind_name(r.kind)}, {"path", r.path}});
    if (rec.instruction.task_override) j["task"] = task_name(*rec.instruction.task_override);
    if (!rec.target_path.empty()) j["target_path"] = rec.target_path;
    if (!rec.mask_path.empty()) j["mask_path"] = rec.mask_path;
    if (!rec.reference_path.empty()) j["reference_path"] = rec.reference_path;
    return j.dump();
}

ManifestRecord deserialize_record(const std::string& line, int lineno) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const std::exception& e) {
        throw std::runtime_error("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("text"))
        throw std::runtime_error("manifest line " + std::to_string(lineno) +
                                 ": expected an object with a \"text\" field");
    ManifestRecord rec;
    rec.instruction.text = j["text"].get<std::string>();
    for (const auto& r : j.value("refs", ojson::array())) {
        auto kind = ref_kind_from_name(r.at("kind").get<std::string>());
        if (!kind)
            throw std::runtime_error("manifest line " + std::to_string(lineno) +
                                     ": unknown ref kind " + r.at("kind").dump());
        rec.instruction.refs.push_back({*kind, r.at("path").get<std::string>()});
    }
    if (j.contains("task")) {
        auto t = task_from_name(j["task"].get<std::string>());
        if (!t)
            throw std::runtime_error("manifest line " + std::to_string(lineno) +
                                     ": unknown task " + j["task"].dump());
        rec.instruction.task_override = t;
    }
    rec.target_path = j.value("target_path", "");
    rec.mask_path = j.value("mask_path", "");
    rec.reference_path = j.value("reference_path", "");
    return rec;
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("manifest: cannot open " + path);
    std::vector<ManifestRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        out.push_back(deserialize_record(line, lineno));
    }
    return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    for (const auto& rec : records) f << serialize_record(rec) << "\n";
}

namespace {

Video load_video_tensor(const std::string& base_dir, const std::string& rel) {
    std::string path = base_dir.empty() ? rel : base_dir + "/" + rel;
    try {
        return Video::from_tensor(tomn_read(path));
    } catch (const std::exception& e) {
        throw std::runtime_error("load_sample: cannot load tensor " + path + ": " + e.what());
    }
}

GridRole role_for_ref(RefKind kind) {
    switch (kind) {
        case RefKind::Image: return GridRole::ReferenceImage;
        case RefKind::VideoRef: return GridRole::ConditionVideo;
        case RefKind::FirstFrame: return GridRole::FirstFrame;
        case RefKind::LastFrame: return GridRole::LastFrame;
    }
    return GridRole::ConditionVideo;
}

}  // namespace

TaskSample load_sample(const ManifestRecord& rec, const std::string& base_dir) {
    TaskSample s;
    s.instruction = rec.instruction;
    s.task = infer_task(rec.instruction);

    for (const auto& r : rec.instruction.refs)
        s.conditions.push_back(encode(load_video_tensor(base_dir, r.path), role_for_ref(r.kind)));

    if (rec.target_path.empty()) throw std::runtime_error("load_sample: record has no target_path");
    s.target = encode(load_video_tensor(base_dir, rec.target_path), GridRole::Target);
    s.target_path = rec.target_path;

    if (!rec.mask_path.empty()) {
        std::string path = base_dir.empty() ? rec.mask_path : base_dir + "/" + rec.mask_path;
        s.edit_mask = tomn_read_u8(path);
        s.mask_path = rec.mask_path;
    }
    s.reference_path = rec.reference_path;
    return s;
}

}  // namespace omnivid
