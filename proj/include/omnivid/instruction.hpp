#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omnivid/latent_codec.hpp"
#include "omnivid/task.hpp"

namespace omnivid {

enum class RefKind : uint8_t { Image = 0, VideoRef = 1, FirstFrame = 2, LastFrame = 3 };

const char* ref_kind_name(RefKind k);
std::optional<RefKind> ref_kind_from_name(const std::string& s);

struct VisualRef {
    RefKind kind = RefKind::Image;
    std::string path;  // TOMN tensor, relative to the manifest
};

// The single entry point for all five tasks: text plus typed visual references.
struct Instruction {
    std::string text;
    std::vector<VisualRef> refs;
    // Explicit task override; needed only to mark reference-conditioned editing,
    // which is structurally identical to in-context generation.
    std::optional<TaskKind> task_override;
};

// Every violated invariant, empty when valid.
std::vector<std::string> validate(const Instruction& instr);

// Deterministic rule table over ref kinds. Throws on invalid instructions and
// on ref combinations outside the table.
TaskKind infer_task(const Instruction& instr);

// Paired training example.
struct TaskSample {
    Instruction instruction;
    TaskKind task = TaskKind::T2V;
    std::vector<LatentGrid> conditions;
    LatentGrid target;
    std::optional<Tensor<uint8_t>> edit_mask;  // pixel-space (f,h,w), editing tasks only
    std::string target_path;                   // set when backed by manifest files
    std::string mask_path;
    std::string reference_path;  // reference image for identity scoring, optional
};

// Manifest rows: one JSON object per line,
//   {"text":..., "refs":[{"kind":...,"path":...}], "task"?, "target_path"?,
//    "mask_path"?, "reference_path"?}
// serialize(deserialize(line)) == line for canonical lines.
struct ManifestRecord {
    Instruction instruction;
    std::string target_path;
    std::string mask_path;
    std::string reference_path;
};

std::string serialize_record(const ManifestRecord& rec);
ManifestRecord deserialize_record(const std::string& line, int lineno = 0);

std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Resolve a manifest record into an in-memory TaskSample (loads TOMN tensors;
// paths are taken relative to base_dir).
TaskSample load_sample(const ManifestRecord& rec, const std::string& base_dir);

}  // namespace omnivid
