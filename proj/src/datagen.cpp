#include "omnivid/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "omnivid/digest.hpp"
#include "omnivid/tomn.hpp"

namespace omnivid {

namespace fs = std::filesystem;

const char* shape_word(ShapeKind s) {
    switch (s) {
        case ShapeKind::Disk: return "disk";
        case ShapeKind::Square: return "square";
        case ShapeKind::Triangle: return "triangle";
    }
    return "?";
}

namespace {
constexpr PaletteColor kPalette[kPaletteSize] = {
    {"red", 0.90f, 0.15f, 0.15f},    {"green", 0.15f, 0.80f, 0.20f},
    {"blue", 0.15f, 0.25f, 0.90f},   {"yellow", 0.92f, 0.88f, 0.15f},
    {"magenta", 0.85f, 0.20f, 0.80f}, {"cyan", 0.15f, 0.80f, 0.85f},
    {"orange", 0.95f, 0.55f, 0.10f}, {"white", 0.98f, 0.98f, 0.95f},
};
constexpr const char* kBackgroundWords[kNumBackgrounds] = {"plain", "dusk", "checkered", "dawn"};
}  // namespace

const PaletteColor& palette(int index) { return kPalette[index % kPaletteSize]; }
const char* background_word(int id) { return kBackgroundWords[id % kNumBackgrounds]; }

namespace {

void background_color(int id, uint32_t canvas, uint32_t x, uint32_t y, float out[3]) {
    float fx = canvas > 1 ? float(x) / float(canvas - 1) : 0.0f;
    float fy = canvas > 1 ? float(y) / float(canvas - 1) : 0.0f;
    switch (id % kNumBackgrounds) {
        case 0:
            out[0] = 0.15f; out[1] = 0.17f; out[2] = 0.20f;
            break;
        case 1:
            out[0] = 0.10f + 0.30f * fy; out[1] = 0.12f + 0.18f * fy; out[2] = 0.35f - 0.10f * fy;
            break;
        case 2: {
            uint32_t cell = std::max<uint32_t>(2, canvas / 8);
            bool odd = ((x / cell) + (y / cell)) & 1;
            float v = odd ? 0.30f : 0.12f;
            out[0] = v; out[1] = v; out[2] = v + 0.04f;
            break;
        }
        default:
            out[0] = 0.32f - 0.12f * fx; out[1] = 0.14f + 0.20f * fx; out[2] = 0.12f + 0.10f * fx;
            break;
    }
}

// Bounce reflection: fold coordinate into [lo, hi].
float fold(float p, float lo, float hi) {
    if (hi <= lo) return lo;
    float period = 2.0f * (hi - lo);
    float t = std::fmod(p - lo, period);
    if (t < 0) t += period;
    return lo + (t <= hi - lo ? t : period - t);
}

struct Center {
    float x, y;
};

Center object_center(const SceneObject& o, uint32_t canvas, uint32_t frame) {
    float lo = o.size, hi = float(canvas - 1) - o.size;
    return {fold(o.x + o.vx * frame, lo, hi), fold(o.y + o.vy * frame, lo, hi)};
}

bool inside_shape(const SceneObject& o, float cx, float cy, uint32_t px, uint32_t py) {
    float dx = float(px) - cx, dy = float(py) - cy;
    float r = o.size;
    switch (o.shape) {
        case ShapeKind::Disk: return dx * dx + dy * dy <= r * r;
        case ShapeKind::Square: return std::fabs(dx) <= r && std::fabs(dy) <= r;
        case ShapeKind::Triangle:
            // apex up: vertices (0,-r), (-r,r), (r,r)
            return dy >= -r && dy <= r && std::fabs(dx) <= (dy + r) * 0.5f;
    }
    return false;
}

// Tightest circle containing the rasterized shape: disks use their radius,
// square and triangle reach their corners at size*sqrt(2).
float circumradius(const SceneObject& o) {
    return o.shape == ShapeKind::Disk ? o.size : o.size * 1.4143f;
}

bool trajectories_clear(const SceneObject& a, const SceneObject& b, uint32_t canvas,
                        uint32_t frames) {
    for (uint32_t f = 0; f < frames; ++f) {
        Center ca = object_center(a, canvas, f);
        Center cb = object_center(b, canvas, f);
        float dx = ca.x - cb.x, dy = ca.y - cb.y;
        float min_dist = circumradius(a) + circumradius(b) + 1.5f;
        if (dx * dx + dy * dy < min_dist * min_dist) return false;
    }
    return true;
}

SceneObject random_object(Rng& rng, uint32_t canvas) {
    SceneObject o;
    o.shape = static_cast<ShapeKind>(rng.below(3));
    o.color = static_cast<int>(rng.below(kPaletteSize));
    float smin = std::max(2.0f, canvas / 8.0f);
    float smax = std::max(smin + 1.0f, canvas / 5.0f);
    o.size = static_cast<float>(rng.uniform(smin, smax));
    o.x = static_cast<float>(rng.uniform(o.size + 1, canvas - 2 - o.size));
    o.y = static_cast<float>(rng.uniform(o.size + 1, canvas - 2 - o.size));
    float vmax = std::max(0.8f, canvas / 24.0f);
    o.vx = static_cast<float>(rng.uniform(-vmax, vmax));
    o.vy = static_cast<float>(rng.uniform(-vmax, vmax));
    return o;
}

bool placement_clear(const SceneObject& cand, const SceneSpec& spec) {
    for (const auto& other : spec.objects)
        if (!trajectories_clear(cand, other, spec.canvas, spec.frames)) return false;
    return true;
}

}  // namespace

SceneSpec random_scene(Rng& rng, uint32_t canvas, uint32_t frames, int max_objects) {
    SceneSpec spec;
    spec.canvas = canvas;
    spec.frames = frames;
    spec.background = static_cast<int>(rng.below(kNumBackgrounds));
    int want = 1 + static_cast<int>(rng.below(std::max(1, max_objects)));
    for (int i = 0; i < want; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 300 && !placed; ++attempt) {
            SceneObject cand = random_object(rng, canvas);
            // distinct colors keep instructions unambiguous
            bool color_taken = false;
            for (const auto& o : spec.objects) color_taken |= o.color == cand.color;
            if (color_taken) continue;
            if (placement_clear(cand, spec)) {
                spec.objects.push_back(cand);
                placed = true;
            }
        }
    }
    return spec;
}

RenderResult render(const SceneSpec& spec, uint64_t /*seed*/) {
    RenderResult out;
    out.video = Video(spec.frames, spec.canvas, spec.canvas);
    out.masks.assign(spec.objects.size(),
                     Tensor<uint8_t>({spec.frames, spec.canvas, spec.canvas}));

    std::vector<Center> centers(spec.objects.size());
    for (uint32_t f = 0; f < spec.frames; ++f) {
        for (size_t i = 0; i < spec.objects.size(); ++i)
            centers[i] = object_center(spec.objects[i], spec.canvas, f);
        for (uint32_t y = 0; y < spec.canvas; ++y)
            for (uint32_t x = 0; x < spec.canvas; ++x) {
                float rgb[3];
                background_color(spec.background, spec.canvas, x, y, rgb);
                for (size_t i = 0; i < spec.objects.size(); ++i) {
                    const SceneObject& o = spec.objects[i];
                    if (inside_shape(o, centers[i].x, centers[i].y, x, y)) {
                        const PaletteColor& pc = palette(o.color);
                        rgb[0] = pc.r; rgb[1] = pc.g; rgb[2] = pc.b;
                        out.masks[i][(size_t(f) * spec.canvas + y) * spec.canvas + x] = 1;
                    }
                }
                for (int c = 0; c < 3; ++c) out.video.at(f, y, x, c) = rgb[c];
            }
    }
    return out;
}

const char* edit_kind_name(EditKind k) {
    switch (k) {
        case EditKind::Style: return "style";
        case EditKind::Insert: return "insert";
        case EditKind::Remove: return "remove";
        case EditKind::ModifySubject: return "modify_subject";
        case EditKind::ModifyBackground: return "modify_background";
    }
    return "?";
}

namespace {
constexpr const char* kStyleWords[kNumStyles] = {
    "identity",  "grayscale", "inverted",  "warm-shift", "cold-shift", "red-blue-swap",
    "soft-glow", "deep-gamma", "sepia",    "crimson",    "verdant",    "azure",
    "pastel",    "high-contrast", "faded", "luminous",   "shadowed",   "emberlit",
};

float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }
}  // namespace

const char* style_word(int id) {
    if (id < 0 || id >= kNumStyles) throw std::invalid_argument("style: unknown id " + std::to_string(id));
    return kStyleWords[id];
}

void apply_style(int id, float rgb[3]) {
    float r = rgb[0], g = rgb[1], b = rgb[2];
    switch (id) {
        case 0: break;
        case 1: {
            float y = 0.299f * r + 0.587f * g + 0.114f * b;
            r = g = b = y;
            break;
        }
        case 2: r = 1 - r; g = 1 - g; b = 1 - b; break;
        case 3: { float t = r; r = g; g = b; b = t; break; }
        case 4: { float t = b; b = g; g = r; r = t; break; }
        case 5: std::swap(r, b); break;
        case 6: r = std::sqrt(r); g = std::sqrt(g); b = std::sqrt(b); break;
        case 7: r = r * r; g = g * g; b = b * b; break;
        case 8: {
            float nr = 0.393f * r + 0.769f * g + 0.189f * b;
            float ng = 0.349f * r + 0.686f * g + 0.168f * b;
            float nb = 0.272f * r + 0.534f * g + 0.131f * b;
            r = clamp01(nr); g = clamp01(ng); b = clamp01(nb);
            break;
        }
        case 9: r = clamp01(r * 1.3f); g *= 0.8f; b *= 0.8f; break;
        case 10: g = clamp01(g * 1.3f); r *= 0.8f; b *= 0.8f; break;
        case 11: b = clamp01(b * 1.3f + 0.05f); r *= 0.8f; g *= 0.9f; break;
        case 12: r = r * 0.6f + 0.3f; g = g * 0.6f + 0.3f; b = b * 0.6f + 0.3f; break;
        case 13: r = clamp01(0.5f + 1.4f * (r - 0.5f)); g = clamp01(0.5f + 1.4f * (g - 0.5f));
                 b = clamp01(0.5f + 1.4f * (b - 0.5f)); break;
        case 14: {
            float y = (r + g + b) / 3;
            r = 0.5f * r + 0.5f * y; g = 0.5f * g + 0.5f * y; b = 0.5f * b + 0.5f * y;
            break;
        }
        case 15: r = r * 0.7f + 0.3f; g = g * 0.7f + 0.3f; b = b * 0.7f + 0.3f; break;
        case 16: r *= 0.65f; g *= 0.65f; b *= 0.65f; break;
        case 17: r = clamp01(r * 0.9f + 0.1f); g = g * 0.75f; b = b * 0.6f; break;
        default: throw std::invalid_argument("style: unknown id " + std::to_string(id));
    }
    rgb[0] = r; rgb[1] = g; rgb[2] = b;
}

EditPair make_style_pair(const RenderResult& rendered, int style_id) {
    if (style_id < 0 || style_id >= kNumStyles)
        throw std::invalid_argument("make_style_pair: unknown style id " + std::to_string(style_id));
    EditPair pair;
    pair.kind = EditKind::Style;
    pair.source = rendered.video;
    pair.target = rendered.video;
    const Video& v = pair.source;
    for (size_t i = 0; i < pair.target.data.size(); i += 3) {
        float rgb[3] = {v.data[i], v.data[i + 1], v.data[i + 2]};
        apply_style(style_id, rgb);
        pair.target.data[i] = rgb[0];
        pair.target.data[i + 1] = rgb[1];
        pair.target.data[i + 2] = rgb[2];
    }
    pair.mask = Tensor<uint8_t>({v.frames, v.height, v.width});
    pair.mask.fill(1);
    pair.instruction = std::string("restyle the whole video in the ") + style_word(style_id) +
                       " style";
    return pair;
}

EditPair make_insertion_pair(const SceneSpec& spec, const RenderResult& rendered,
                             size_t object_index, uint64_t seed) {
    if (object_index >= spec.objects.size())
        throw std::invalid_argument("make_insertion_pair: no such object");
    const Tensor<uint8_t>& mask = rendered.masks[object_index];
    size_t canvas_px = size_t(spec.canvas) * spec.canvas;
    for (uint32_t f = 0; f < spec.frames; ++f) {
        size_t count = 0;
        for (size_t i = 0; i < canvas_px; ++i) count += mask[size_t(f) * canvas_px + i];
        if (count * 2 > canvas_px)
            throw std::invalid_argument("make_insertion_pair: object covers more than half the canvas");
    }

    SceneSpec erased = spec;
    erased.objects.erase(erased.objects.begin() + object_index);
    EditPair pair;
    pair.kind = EditKind::Insert;
    pair.source = render(erased, seed).video;  // background re-render, object absent
    pair.target = rendered.video;
    pair.mask = mask;
    const SceneObject& o = spec.objects[object_index];
    pair.instruction = std::string("insert a ") + palette(o.color).name + " " +
                       shape_word(o.shape) + " moving through the scene";
    return pair;
}

EditPair make_removal_pair(const SceneSpec& spec, const RenderResult& rendered, uint64_t seed) {
    Rng rng(seed);
    SceneObject extra;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        extra = random_object(rng, spec.canvas);
        if (placement_clear(extra, spec)) placed = true;
    }
    if (!placed) {
        // crowded scenes: deterministic scan for a static minimal disk in a
        // color no scene object uses
        extra.shape = ShapeKind::Disk;
        extra.size = 2.0f;
        extra.vx = extra.vy = 0.0f;
        for (int c = 0; c < kPaletteSize && !placed; ++c) {
            bool taken = false;
            for (const auto& o : spec.objects) taken |= o.color == c;
            if (!taken) {
                extra.color = c;
                placed = true;
            }
        }
        // a static disk needs only exact pixel disjointness from every frame's
        // rendered masks, which packs far tighter than the circumradius bound
        size_t px = size_t(spec.canvas) * spec.canvas;
        std::vector<uint8_t> occupied(spec.frames * px, 0);
        for (const auto& m : rendered.masks)
            for (size_t k = 0; k < m.numel(); ++k) occupied[k] |= m[k];
        placed = false;
        for (uint32_t y = 3; y + 3 < spec.canvas && !placed; ++y)
            for (uint32_t x = 3; x + 3 < spec.canvas && !placed; ++x) {
                bool clear = true;
                for (int dy = -3; dy <= 3 && clear; ++dy)
                    for (int dx = -3; dx <= 3 && clear; ++dx) {
                        if (dx * dx + dy * dy > 9) continue;  // disk plus 1px rim
                        size_t cell = size_t(y + dy) * spec.canvas + (x + dx);
                        for (uint32_t f = 0; f < spec.frames && clear; ++f)
                            clear = !occupied[f * px + cell];
                    }
                if (clear) {
                    extra.x = static_cast<float>(x);
                    extra.y = static_cast<float>(y);
                    placed = true;
                }
            }
    }
    if (!placed)
        throw std::runtime_error("make_removal_pair: no non-overlapping placement found in 100 attempts");

    SceneSpec augmented = spec;
    augmented.objects.push_back(extra);
    RenderResult aug = render(augmented, seed);

    EditPair pair;
    pair.kind = EditKind::Remove;
    pair.source = aug.video;       // synthesized clip containing the extra object
    pair.target = rendered.video;  // untouched original
    pair.mask = aug.masks.back();
    pair.instruction = std::string("remove the ") + palette(extra.color).name + " " +
                       shape_word(extra.shape) + " from the video";
    return pair;
}

EditPair make_modify_pair(const SceneSpec& spec, const RenderResult& rendered, ModifyMode mode,
                          uint64_t seed) {
    Rng rng(seed);
    EditPair pair;
    if (mode == ModifyMode::Subject) {
        if (spec.objects.empty()) throw std::invalid_argument("make_modify_pair: no objects");
        size_t idx = rng.below(spec.objects.size());
        SceneSpec recolored = spec;
        int old_color = spec.objects[idx].color;
        int new_color = (old_color + 1 + static_cast<int>(rng.below(kPaletteSize - 1))) % kPaletteSize;
        recolored.objects[idx].color = new_color;

        pair.kind = EditKind::ModifySubject;
        pair.source = rendered.video;
        pair.target = render(recolored, seed).video;
        pair.mask = rendered.masks[idx];  // color-only edit, geometry unchanged
        pair.instruction = std::string("change the ") + palette(old_color).name + " " +
                           shape_word(spec.objects[idx].shape) + " to " + palette(new_color).name;
        return pair;
    }

    // background mode requires clearly separable foreground
    size_t total = size_t(spec.frames) * spec.canvas * spec.canvas;
    Tensor<uint8_t> fg({spec.frames, spec.canvas, spec.canvas});
    size_t covered = 0;
    for (const auto& m : rendered.masks)
        for (size_t i = 0; i < total; ++i) fg[i] |= m[i];
    for (size_t i = 0; i < total; ++i) covered += fg[i];
    if (covered * 10 >= total * 4)
        throw std::invalid_argument("make_modify_pair: foreground covers >= 40% of canvas, not separable");

    SceneSpec swapped = spec;
    swapped.background =
        (spec.background + 1 + static_cast<int>(rng.below(kNumBackgrounds - 1))) % kNumBackgrounds;
    pair.kind = EditKind::ModifyBackground;
    pair.source = rendered.video;
    pair.target = render(swapped, seed).video;
    pair.mask = Tensor<uint8_t>({spec.frames, spec.canvas, spec.canvas});
    for (size_t i = 0; i < total; ++i) pair.mask[i] = fg[i] ? 0 : 1;
    pair.instruction = std::string("change the background to ") + background_word(swapped.background);
    return pair;
}

namespace {

const Video& object_bearing_video(const EditPair& pair) {
    switch (pair.kind) {
        case EditKind::Insert:
        case EditKind::ModifySubject: return pair.target;
        case EditKind::Remove: return pair.source;
        default:
            throw std::invalid_argument(std::string("no object-bearing side for edit kind ") +
                                        edit_kind_name(pair.kind));
    }
}

}  // namespace

Video extract_reference(const EditPair& pair) {
    const Video& vid = object_bearing_video(pair);  // throws for global kinds
    size_t px = size_t(vid.height) * vid.width;

    uint32_t best_frame = 0;
    size_t best_count = 0;
    for (uint32_t f = 0; f < vid.frames; ++f) {
        size_t count = 0;
        for (size_t i = 0; i < px; ++i) count += pair.mask[size_t(f) * px + i];
        if (count > best_count) {
            best_count = count;
            best_frame = f;
        }
    }
    if (best_count == 0) throw std::runtime_error("extract_reference: object never visible");

    uint32_t x0 = vid.width, x1 = 0, y0 = vid.height, y1 = 0;
    for (uint32_t y = 0; y < vid.height; ++y)
        for (uint32_t x = 0; x < vid.width; ++x)
            if (pair.mask[(size_t(best_frame) * vid.height + y) * vid.width + x]) {
                x0 = std::min(x0, x); x1 = std::max(x1, x);
                y0 = std::min(y0, y); y1 = std::max(y1, y);
            }

    Video ref(1, vid.height, vid.width);
    std::fill(ref.data.begin(), ref.data.end(), 1.0f);  // pure white background
    int dx = int(vid.width / 2) - int((x0 + x1) / 2);
    int dy = int(vid.height / 2) - int((y0 + y1) / 2);
    for (uint32_t y = y0; y <= y1; ++y)
        for (uint32_t x = x0; x <= x1; ++x) {
            if (!pair.mask[(size_t(best_frame) * vid.height + y) * vid.width + x]) continue;
            int ny = int(y) + dy, nx = int(x) + dx;
            if (ny < 0 || nx < 0 || ny >= int(vid.height) || nx >= int(vid.width)) continue;
            for (int c = 0; c < 3; ++c)
                ref.at(0, uint32_t(ny), uint32_t(nx), c) = vid.at(best_frame, y, x, c);
        }
    return ref;
}

namespace {

std::string classify_shape(const Tensor<uint8_t>& mask, uint32_t frame, uint32_t height,
                           uint32_t width) {
    uint32_t x0 = width, x1 = 0, y0 = height, y1 = 0;
    bool any = false;
    for (uint32_t y = 0; y < height; ++y)
        for (uint32_t x = 0; x < width; ++x)
            if (mask[(size_t(frame) * height + y) * width + x]) {
                any = true;
                x0 = std::min(x0, x); x1 = std::max(x1, x);
                y0 = std::min(y0, y); y1 = std::max(y1, y);
            }
    if (!any) return "";

    // best-IoU match against re-rasterized shape templates over the bbox
    float cx = (x0 + x1) / 2.0f, cy = (y0 + y1) / 2.0f;
    float r = std::max(x1 - x0, y1 - y0) / 2.0f;
    ShapeKind kinds[3] = {ShapeKind::Disk, ShapeKind::Square, ShapeKind::Triangle};
    float best_iou = -1;
    ShapeKind best = ShapeKind::Disk;
    for (ShapeKind k : kinds) {
        SceneObject probe;
        probe.shape = k;
        probe.size = r;
        size_t inter = 0, uni = 0;
        for (uint32_t y = y0 == 0 ? 0 : y0 - 1; y <= std::min(y1 + 1, height - 1); ++y)
            for (uint32_t x = x0 == 0 ? 0 : x0 - 1; x <= std::min(x1 + 1, width - 1); ++x) {
                bool in_mask = mask[(size_t(frame) * height + y) * width + x];
                bool in_tpl = inside_shape(probe, cx, cy, x, y);
                inter += in_mask && in_tpl;
                uni += in_mask || in_tpl;
            }
        float iou = uni ? float(inter) / float(uni) : 0.0f;
        if (iou > best_iou) {
            best_iou = iou;
            best = k;
        }
    }
    return shape_word(best);
}

std::string nearest_palette_name(const float rgb[3]) {
    float best = 1e9f;
    int idx = 0;
    for (int i = 0; i < kPaletteSize; ++i) {
        const PaletteColor& p = kPalette[i];
        float d = (p.r - rgb[0]) * (p.r - rgb[0]) + (p.g - rgb[1]) * (p.g - rgb[1]) +
                  (p.b - rgb[2]) * (p.b - rgb[2]);
        if (d < best) {
            best = d;
            idx = i;
        }
    }
    return kPalette[idx].name;
}

}  // namespace

DiffResult diff_objects(const Video& source, const Video& target) {
    if (source.frames != target.frames || source.height != target.height ||
        source.width != target.width)
        throw std::invalid_argument("diff_objects: shape mismatch");

    DiffResult res;
    res.mask = Tensor<uint8_t>({source.frames, source.height, source.width});
    size_t count = 0;
    for (size_t i = 0; i < res.mask.numel(); ++i) {
        bool differ = source.data[3 * i] != target.data[3 * i] ||
                      source.data[3 * i + 1] != target.data[3 * i + 1] ||
                      source.data[3 * i + 2] != target.data[3 * i + 2];
        res.mask[i] = differ;
        count += differ;
    }
    if (count == 0) return res;  // empty result signals an invalid pair
    res.empty = false;

    size_t px = size_t(source.height) * source.width;
    uint32_t best_frame = 0;
    size_t best_count = 0;
    for (uint32_t f = 0; f < source.frames; ++f) {
        size_t c = 0;
        for (size_t i = 0; i < px; ++i) c += res.mask[size_t(f) * px + i];
        if (c > best_count) {
            best_count = c;
            best_frame = f;
        }
    }
    res.shape_desc = classify_shape(res.mask, best_frame, source.height, source.width);

    // The object side is whichever video's in-mask pixels stand out most from
    // the pixels just outside the mask (the background ring).
    auto side_score = [&](const Video& v, float mean_out[3]) {
        double in_sum[3] = {0, 0, 0}, out_sum[3] = {0, 0, 0};
        size_t n_in = 0, n_out = 0;
        for (uint32_t y = 0; y < v.height; ++y)
            for (uint32_t x = 0; x < v.width; ++x) {
                size_t i = (size_t(best_frame) * v.height + y) * v.width + x;
                if (res.mask[i]) {
                    for (int c = 0; c < 3; ++c) in_sum[c] += v.at(best_frame, y, x, c);
                    ++n_in;
                } else {
                    for (int c = 0; c < 3; ++c) out_sum[c] += v.at(best_frame, y, x, c);
                    ++n_out;
                }
            }
        double score = 0;
        for (int c = 0; c < 3; ++c) {
            double mi = n_in ? in_sum[c] / n_in : 0;
            double mo = n_out ? out_sum[c] / n_out : 0;
            mean_out[c] = static_cast<float>(mi);
            score += (mi - mo) * (mi - mo);
        }
        return score;
    };
    float mean_src[3], mean_tgt[3];
    double s_src = side_score(source, mean_src);
    double s_tgt = side_score(target, mean_tgt);
    res.color_desc = nearest_palette_name(s_tgt >= s_src ? mean_tgt : mean_src);
    return res;
}

namespace {

// Mean local 3x3 variance over pixels selected by pred.
template <typename Pred>
double mean_local_variance(const Video& v, uint32_t frame, Pred&& pred) {
    double acc = 0;
    size_t n = 0;
    for (uint32_t y = 1; y + 1 < v.height; ++y)
        for (uint32_t x = 1; x + 1 < v.width; ++x) {
            if (!pred(y, x)) continue;
            for (int c = 0; c < 3; ++c) {
                double sum = 0, sum2 = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        double val = v.at(frame, y + dy, x + dx, c);
                        sum += val;
                        sum2 += val * val;
                    }
                double mean = sum / 9;
                acc += sum2 / 9 - mean * mean;
            }
            ++n;
        }
    return n ? acc / (3 * n) : 0.0;
}

void accumulate_histogram(const float rgb[3], std::vector<double>& hist) {
    auto bin = [](float v) { return std::min(3, static_cast<int>(v * 4)); };
    hist[(bin(rgb[0]) * 4 + bin(rgb[1])) * 4 + bin(rgb[2])] += 1;
}

double histogram_intersection(std::vector<double> a, std::vector<double> b) {
    double na = 0, nb = 0;
    for (double v : a) na += v;
    for (double v : b) nb += v;
    if (na == 0 || nb == 0) return 0;
    double inter = 0;
    for (size_t i = 0; i < a.size(); ++i) inter += std::min(a[i] / na, b[i] / nb);
    return inter;
}

}  // namespace

Verdict verify_sample(const EditPair& pair, const Video* reference) {
    const Video& src = pair.source;
    const Video& tgt = pair.target;
    size_t px = size_t(src.height) * src.width;

    // Checker A, mask-based.
    for (size_t i = 0; i < pair.mask.numel(); ++i) {
        if (pair.mask[i]) continue;
        for (int c = 0; c < 3; ++c)
            if (src.data[3 * i + c] != tgt.data[3 * i + c])
                return {false, "unintended editing"};
    }
    if (pair.kind == EditKind::Remove) {
        size_t inside = 0, residual = 0;
        for (size_t i = 0; i < pair.mask.numel(); ++i) {
            if (!pair.mask[i]) continue;
            ++inside;
            bool same = src.data[3 * i] == tgt.data[3 * i] &&
                        src.data[3 * i + 1] == tgt.data[3 * i + 1] &&
                        src.data[3 * i + 2] == tgt.data[3 * i + 2];
            residual += same;
        }
        if (inside && residual * 20 > inside)  // > 5% of object pixels survived
            return {false, "incomplete removal"};
    }

    // Checker B, statistics-based.
    if (reference &&
        (pair.kind == EditKind::Insert || pair.kind == EditKind::ModifySubject ||
         pair.kind == EditKind::Remove)) {
        const Video& obj_vid = object_bearing_video(pair);
        std::vector<double> ref_hist(64, 0.0), obj_hist(64, 0.0);
        for (uint32_t y = 0; y < reference->height; ++y)
            for (uint32_t x = 0; x < reference->width; ++x) {
                float rgb[3] = {reference->at(0, y, x, 0), reference->at(0, y, x, 1),
                                reference->at(0, y, x, 2)};
                if (rgb[0] > 0.999f && rgb[1] > 0.999f && rgb[2] > 0.999f) continue;
                accumulate_histogram(rgb, ref_hist);
            }
        for (uint32_t f = 0; f < obj_vid.frames; ++f)
            for (size_t i = 0; i < px; ++i) {
                if (!pair.mask[size_t(f) * px + i]) continue;
                uint32_t y = static_cast<uint32_t>(i / src.width);
                uint32_t x = static_cast<uint32_t>(i % src.width);
                float rgb[3] = {obj_vid.at(f, y, x, 0), obj_vid.at(f, y, x, 1),
                                obj_vid.at(f, y, x, 2)};
                accumulate_histogram(rgb, obj_hist);
            }
        if (histogram_intersection(ref_hist, obj_hist) < 0.9)
            return {false, "identity inconsistency"};
    }

    if (pair.kind == EditKind::Insert || pair.kind == EditKind::Remove) {
        // the inpainted side: object absent inside the mask
        const Video& inpainted = pair.kind == EditKind::Insert ? src : tgt;
        for (uint32_t f = 0; f < inpainted.frames; ++f) {
            auto in_region = [&](uint32_t y, uint32_t x) {
                return pair.mask[(size_t(f) * src.height + y) * src.width + x] != 0;
            };
            auto out_region = [&](uint32_t y, uint32_t x) { return !in_region(y, x); };
            double v_in = mean_local_variance(inpainted, f, in_region);
            double v_out = mean_local_variance(inpainted, f, out_region);
            if (v_in > 3.0 * v_out + 1e-4) return {false, "unnatural inpainting"};
        }
    }

    return {true, ""};
}

DatagenConfig DatagenConfig::from_config(const KvConfig& cfg) {
    DatagenConfig d;
    d.canvas = static_cast<uint32_t>(cfg.get_int("canvas", 64));
    d.frames = static_cast<uint32_t>(cfg.get_int("frames", 8));
    d.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
    for (int i = 0; i < kNumTasks; ++i)
        d.counts[i] = cfg.get_int(std::string("count.") + task_name(static_cast<TaskKind>(i)), 4);
    return d;
}

namespace {

uint64_t sample_seed(uint64_t base, int task, long index, int attempt) {
    uint64_t h = fnv1a(&base, sizeof(base));
    h = fnv1a(&task, sizeof(task), h);
    h = fnv1a(&index, sizeof(index), h);
    h = fnv1a(&attempt, sizeof(attempt), h);
    return h;
}

std::string sample_stem(TaskKind task, long index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03ld", task_name(task), index);
    return buf;
}

Video frame_of(const Video& v, uint32_t f) {
    Video img(1, v.height, v.width);
    std::copy(v.data.begin() + size_t(f) * v.height * v.width * 3,
              v.data.begin() + size_t(f + 1) * v.height * v.width * 3, img.data.begin());
    return img;
}

std::string scene_text(const SceneSpec& spec) {
    std::string s = "a scene with";
    for (size_t i = 0; i < spec.objects.size(); ++i) {
        const SceneObject& o = spec.objects[i];
        s += std::string(i ? " and a " : " a ") + palette(o.color).name + " " + shape_word(o.shape);
    }
    if (spec.objects.empty()) s += " an empty canvas";
    s += std::string(" moving over a ") + background_word(spec.background) + " background";
    return s;
}

}  // namespace

BuildStats build_dataset(const DatagenConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<ManifestRecord> records;
    BuildStats stats;

    auto write_video = [&](const std::string& name, const Video& v) {
        tomn_write((fs::path(out_dir) / name).string(), v.to_tensor());
        return name;
    };
    auto write_mask = [&](const std::string& name, const Tensor<uint8_t>& m) {
        tomn_write_u8((fs::path(out_dir) / name).string(), m);
        return name;
    };

    for (int ti = 0; ti < kNumTasks; ++ti) {
        TaskKind task = static_cast<TaskKind>(ti);
        for (long i = 0; i < cfg.counts[ti]; ++i) {
            std::string stem = sample_stem(task, i);
            ManifestRecord rec;

            bool emitted = false;
            for (int attempt = 0; attempt < 8 && !emitted; ++attempt) {
                uint64_t seed = sample_seed(cfg.seed, ti, i, attempt);
                Rng rng(seed);
                SceneSpec spec = random_scene(rng, cfg.canvas, cfg.frames);
                RenderResult rendered = render(spec, seed);

                try {
                    switch (task) {
                        case TaskKind::T2V:
                            rec.instruction = {scene_text(spec), {}, std::nullopt};
                            rec.target_path = write_video(stem + "_target.tomn", rendered.video);
                            break;
                        case TaskKind::I2V:
                            rec.instruction = {"animate the scene starting from this frame: " +
                                                   scene_text(spec),
                                               {{RefKind::FirstFrame, stem + "_first.tomn"}},
                                               std::nullopt};
                            write_video(stem + "_first.tomn", frame_of(rendered.video, 0));
                            rec.target_path = write_video(stem + "_target.tomn", rendered.video);
                            break;
                        case TaskKind::FLF2V:
                            rec.instruction = {"generate the motion between the given frames: " +
                                                   scene_text(spec),
                                               {{RefKind::FirstFrame, stem + "_first.tomn"},
                                                {RefKind::LastFrame, stem + "_last.tomn"}},
                                               std::nullopt};
                            write_video(stem + "_first.tomn", frame_of(rendered.video, 0));
                            write_video(stem + "_last.tomn",
                                        frame_of(rendered.video, rendered.video.frames - 1));
                            rec.target_path = write_video(stem + "_target.tomn", rendered.video);
                            break;
                        case TaskKind::InContextGen: {
                            if (spec.objects.empty()) throw std::runtime_error("no object");
                            EditPair pair =
                                make_insertion_pair(spec, rendered, rng.below(spec.objects.size()),
                                                    seed);
                            Video ref = extract_reference(pair);
                            Verdict v = verify_sample(pair, &ref);
                            if (!v.accepted) throw std::runtime_error("verify: " + v.reason);
                            rec.instruction = {pair.instruction + " as shown in the reference",
                                               {{RefKind::Image, stem + "_ref.tomn"},
                                                {RefKind::VideoRef, stem + "_source.tomn"}},
                                               std::nullopt};
                            write_video(stem + "_ref.tomn", ref);
                            write_video(stem + "_source.tomn", pair.source);
                            rec.target_path = write_video(stem + "_target.tomn", pair.target);
                            rec.mask_path = write_mask(stem + "_mask.tomn", pair.mask);
                            rec.reference_path = stem + "_ref.tomn";
                            break;
                        }
                        case TaskKind::InContextEdit: {
                            EditKind kinds[5] = {EditKind::Style, EditKind::Insert,
                                                 EditKind::Remove, EditKind::ModifySubject,
                                                 EditKind::ModifyBackground};
                            EditKind kind = kinds[i % 5];
                            EditPair pair;
                            switch (kind) {
                                case EditKind::Style:
                                    pair = make_style_pair(rendered,
                                                           1 + static_cast<int>(rng.below(kNumStyles - 1)));
                                    break;
                                case EditKind::Insert:
                                    if (spec.objects.empty()) throw std::runtime_error("no object");
                                    pair = make_insertion_pair(spec, rendered,
                                                               rng.below(spec.objects.size()), seed);
                                    break;
                                case EditKind::Remove:
                                    pair = make_removal_pair(spec, rendered, seed);
                                    break;
                                case EditKind::ModifySubject:
                                    pair = make_modify_pair(spec, rendered, ModifyMode::Subject, seed);
                                    break;
                                case EditKind::ModifyBackground:
                                    pair = make_modify_pair(spec, rendered, ModifyMode::Background,
                                                            seed);
                                    break;
                            }
                            bool local = kind == EditKind::Insert || kind == EditKind::Remove ||
                                         kind == EditKind::ModifySubject;
                            Video ref;
                            if (local) ref = extract_reference(pair);
                            Verdict v = verify_sample(pair, local ? &ref : nullptr);
                            if (!v.accepted) throw std::runtime_error("verify: " + v.reason);
                            rec.instruction = {pair.instruction,
                                               {{RefKind::VideoRef, stem + "_source.tomn"}},
                                               std::nullopt};
                            write_video(stem + "_source.tomn", pair.source);
                            rec.target_path = write_video(stem + "_target.tomn", pair.target);
                            rec.mask_path = write_mask(stem + "_mask.tomn", pair.mask);
                            break;
                        }
                    }
                    emitted = true;
                } catch (const std::exception&) {
                    ++stats.rejected;
                }
            }
            if (!emitted)
                throw std::runtime_error(std::string("build_dataset: cannot construct sample for ") +
                                         task_name(task));
            records.push_back(rec);
            ++stats.emitted;
        }
    }

    if (stats.rejected * 2 > stats.emitted + stats.rejected)
        throw std::runtime_error("build_dataset: verification rejection rate exceeds 50%, generator bug");

    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);
    return stats;
}

}  // namespace omnivid
