#pragma once

#include <string>
#include <vector>

#include "omnivid/config_kv.hpp"
#include "omnivid/instruction.hpp"
#include "omnivid/latent_codec.hpp"
#include "omnivid/rng.hpp"

namespace omnivid {

// Moving-shape scenes on a small canvas; everything renders deterministically
// from (spec, seed) with hard-edged rasterization, so paired edits are
// bitwise-exact outside their masks.

enum class ShapeKind : uint8_t { Disk = 0, Square = 1, Triangle = 2 };
const char* shape_word(ShapeKind s);

struct PaletteColor {
    const char* name;
    float r, g, b;
};
constexpr int kPaletteSize = 8;
const PaletteColor& palette(int index);

struct SceneObject {
    ShapeKind shape = ShapeKind::Disk;
    int color = 0;  // palette index
    float size = 4;  // half-extent in pixels
    float x = 0, y = 0;    // center at frame 0
    float vx = 0, vy = 0;  // per-frame velocity, bounce reflection at walls
};

constexpr int kNumBackgrounds = 4;
const char* background_word(int id);

struct SceneSpec {
    uint32_t canvas = 64;
    uint32_t frames = 8;
    int background = 0;
    std::vector<SceneObject> objects;
};

struct RenderResult {
    Video video;
    std::vector<Tensor<uint8_t>> masks;  // per object, (frames, canvas, canvas)
};

// Deterministic scene draw; objects are guaranteed pairwise non-overlapping
// over the whole clip (the synthetic world has no occlusion).
SceneSpec random_scene(Rng& rng, uint32_t canvas, uint32_t frames, int max_objects = 2);

RenderResult render(const SceneSpec& spec, uint64_t seed = 0);

enum class EditKind : uint8_t { Style, Insert, Remove, ModifySubject, ModifyBackground };
const char* edit_kind_name(EditKind k);

struct EditPair {
    Video source;
    Video target;
    std::string instruction;
    Tensor<uint8_t> mask;  // (frames, canvas, canvas); for style edits, all ones
    EditKind kind = EditKind::Style;
};

constexpr int kNumStyles = 18;
const char* style_word(int id);
// Per-pixel color map; id 0 is the identity.
void apply_style(int id, float rgb[3]);

EditPair make_style_pair(const RenderResult& rendered, int style_id);
EditPair make_insertion_pair(const SceneSpec& spec, const RenderResult& rendered,
                             size_t object_index, uint64_t seed = 0);
EditPair make_removal_pair(const SceneSpec& spec, const RenderResult& rendered, uint64_t seed);
enum class ModifyMode { Subject, Background };
EditPair make_modify_pair(const SceneSpec& spec, const RenderResult& rendered, ModifyMode mode,
                          uint64_t seed);

// Object pixels from the frame of maximal visibility, centered on a white
// canvas. Returned as a 1-frame video.
Video extract_reference(const EditPair& pair);

struct DiffResult {
    Tensor<uint8_t> mask;  // exact spatio-temporal difference mask
    std::string shape_desc;
    std::string color_desc;
    bool empty = true;
};
DiffResult diff_objects(const Video& source, const Video& target);

struct Verdict {
    bool accepted = true;
    std::string reason;  // one of the four artifact classes when rejected
};
// Dual verification: a mask-based checker and a statistics-based checker both
// must accept. reference may be null for global edits.
Verdict verify_sample(const EditPair& pair, const Video* reference);

struct DatagenConfig {
    uint32_t canvas = 64;
    uint32_t frames = 8;
    uint64_t seed = 0;
    long counts[kNumTasks] = {4, 4, 4, 4, 4};

    static DatagenConfig from_config(const KvConfig& cfg);
};

struct BuildStats {
    long emitted = 0;
    long rejected = 0;
};
// Emits TOMN tensors plus manifest.jsonl under out_dir. Every editing-derived
// sample has passed verify_sample; aborts if the rejection rate exceeds 50%.
BuildStats build_dataset(const DatagenConfig& cfg, const std::string& out_dir);

}  // namespace omnivid
