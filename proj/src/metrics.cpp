#include "omnivid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace omnivid {

namespace fs = std::filesystem;

namespace {

void require_same_shape(const Video& a, const Video& b, const char* where) {
    if (a.frames != b.frames || a.height != b.height || a.width != b.width)
        throw std::invalid_argument(std::string(where) + ": video shape mismatch, (" +
                                    std::to_string(a.frames) + "," + std::to_string(a.height) +
                                    "," + std::to_string(a.width) + ") vs (" +
                                    std::to_string(b.frames) + "," + std::to_string(b.height) +
                                    "," + std::to_string(b.width) + ")");
}

double frame_mse(const Video& a, uint32_t fa, const Video& b, uint32_t fb) {
    size_t n = size_t(a.height) * a.width * kVideoChannels;
    const float* pa = a.data.data() + size_t(fa) * n;
    const float* pb = b.data.data() + size_t(fb) * n;
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
        double d = double(pa[i]) - double(pb[i]);
        acc += d * d;
    }
    return acc / double(n);
}

constexpr int kBins = 8;
constexpr int kHistSize = kBins * kBins * kBins;

int hist_index(const float rgb[3]) {
    auto bin = [](float v) {
        int b = static_cast<int>(v * kBins);
        return b < 0 ? 0 : (b >= kBins ? kBins - 1 : b);
    };
    return (bin(rgb[0]) * kBins + bin(rgb[1])) * kBins + bin(rgb[2]);
}

}  // namespace

double video_mse(const Video& a, const Video& b) {
    require_same_shape(a, b, "video_mse");
    double acc = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / double(a.data.size());
}

double psnr_db(double mse) {
    if (mse <= 0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

std::pair<double, double> boundary_frame_error(const Video& generated, const Video& first,
                                               const Video& last) {
    if (generated.frames == 0) throw std::invalid_argument("boundary_frame_error: empty video");
    if (first.frames != 1 || last.frames != 1)
        throw std::invalid_argument("boundary_frame_error: boundary images must be 1-frame");
    if (first.height != generated.height || first.width != generated.width ||
        last.height != generated.height || last.width != generated.width)
        throw std::invalid_argument("boundary_frame_error: spatial shape mismatch");
    return {frame_mse(generated, 0, first, 0),
            frame_mse(generated, generated.frames - 1, last, 0)};
}

double preservation_error(const Video& source, const Video& generated,
                          const Tensor<uint8_t>& mask) {
    require_same_shape(source, generated, "preservation_error");
    if (mask.numel() * kVideoChannels != source.data.size())
        throw std::invalid_argument("preservation_error: mask shape mismatch");
    double acc = 0;
    size_t n = 0;
    for (size_t i = 0; i < mask.numel(); ++i) {
        if (mask[i]) continue;
        for (int c = 0; c < kVideoChannels; ++c) {
            double d = double(source.data[3 * i + c]) - double(generated.data[3 * i + c]);
            acc += d * d;
        }
        ++n;
    }
    if (n == 0) throw std::invalid_argument("preservation_error: mask complement is empty");
    return acc / double(n * kVideoChannels);
}

double identity_score(const Video& reference, const Video& generated,
                      const Tensor<uint8_t>& mask) {
    if (mask.numel() != size_t(generated.frames) * generated.height * generated.width)
        throw std::invalid_argument("identity_score: mask shape mismatch");

    std::vector<double> ref_hist(kHistSize, 0.0);
    double ref_total = 0;
    for (uint32_t y = 0; y < reference.height; ++y)
        for (uint32_t x = 0; x < reference.width; ++x) {
            float rgb[3] = {reference.at(0, y, x, 0), reference.at(0, y, x, 1),
                            reference.at(0, y, x, 2)};
            if (rgb[0] > 0.999f && rgb[1] > 0.999f && rgb[2] > 0.999f) continue;
            ref_hist[hist_index(rgb)] += 1;
            ref_total += 1;
        }
    if (ref_total == 0) throw std::invalid_argument("identity_score: reference has no object pixels");
    for (double& v : ref_hist) v /= ref_total;

    size_t px = size_t(generated.height) * generated.width;
    double score_sum = 0;
    long scored_frames = 0;
    for (uint32_t f = 0; f < generated.frames; ++f) {
        std::vector<double> gen_hist(kHistSize, 0.0);
        double total = 0;
        for (size_t i = 0; i < px; ++i) {
            if (!mask[size_t(f) * px + i]) continue;
            uint32_t y = static_cast<uint32_t>(i / generated.width);
            uint32_t x = static_cast<uint32_t>(i % generated.width);
            float rgb[3] = {generated.at(f, y, x, 0), generated.at(f, y, x, 1),
                            generated.at(f, y, x, 2)};
            gen_hist[hist_index(rgb)] += 1;
            total += 1;
        }
        if (total == 0) continue;
        double inter = 0;
        for (int i = 0; i < kHistSize; ++i) inter += std::min(ref_hist[i], gen_hist[i] / total);
        score_sum += inter;
        ++scored_frames;
    }
    if (scored_frames == 0) throw std::invalid_argument("identity_score: mask is empty");
    return score_sum / scored_frames;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct Agg {
    double sum = 0, sum2 = 0;
    long n = 0;
    void add(double v) { sum += v; sum2 += v * v; ++n; }
    double mean() const { return n ? sum / n : 0; }
    double stddev() const {
        if (n < 2) return 0;
        double m = mean();
        double var = sum2 / n - m * m;
        return var > 0 ? std::sqrt(var) : 0;
    }
};

void agg_line(std::ofstream& out, const char* name, const Agg& a) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-20s n=%-4ld mean=%-14.9g std=%.9g\n", name, a.n, a.mean(),
                  a.stddev());
    out << buf;
}

}  // namespace

void emit_report(const std::vector<EvalRow>& rows, const std::string& out_dir,
                 const std::string& run_metadata) {
    if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
    fs::create_directories(out_dir);

    std::ofstream csv(fs::path(out_dir) / "report.csv", std::ios::binary);
    csv << "index,task,mse,psnr,boundary_first,boundary_last,preservation,identity\n";
    Agg a_mse, a_psnr, a_bf, a_bl, a_pres, a_id;
    for (const auto& r : rows) {
        csv << r.index << "," << task_name(r.task) << "," << fmt(r.mse) << "," << fmt(r.psnr);
        a_mse.add(r.mse);
        a_psnr.add(r.psnr);
        if (r.has_boundary) {
            csv << "," << fmt(r.boundary_first) << "," << fmt(r.boundary_last);
            a_bf.add(r.boundary_first);
            a_bl.add(r.boundary_last);
        } else {
            csv << ",,";
        }
        if (r.has_preservation) {
            csv << "," << fmt(r.preservation);
            a_pres.add(r.preservation);
        } else {
            csv << ",";
        }
        if (r.has_identity) {
            csv << "," << fmt(r.identity);
            a_id.add(r.identity);
        } else {
            csv << ",";
        }
        csv << "\n";
    }

    std::ofstream txt(fs::path(out_dir) / "report.txt", std::ios::binary);
    txt << "evaluation report (proxy metrics; coherence and identity claims are qualitative)\n";
    if (!run_metadata.empty()) txt << run_metadata << "\n";
    txt << "rows: " << rows.size() << "\n";
    agg_line(txt, "mse", a_mse);
    agg_line(txt, "psnr", a_psnr);
    if (a_bf.n) agg_line(txt, "boundary_first", a_bf);
    if (a_bl.n) agg_line(txt, "boundary_last", a_bl);
    if (a_pres.n) agg_line(txt, "preservation", a_pres);
    if (a_id.n) agg_line(txt, "identity", a_id);
}

void export_ppm(const Video& video, const std::string& stem) {
    for (uint32_t f = 0; f < video.frames; ++f) {
        char name[32];
        std::snprintf(name, sizeof(name), "_%03u.ppm", f);
        std::ofstream out(stem + name, std::ios::binary);
        out << "P6\n" << video.width << " " << video.height << "\n255\n";
        for (uint32_t y = 0; y < video.height; ++y)
            for (uint32_t x = 0; x < video.width; ++x)
                for (int c = 0; c < kVideoChannels; ++c) {
                    float v = video.at(f, y, x, c);
                    int b = static_cast<int>(v * 255.0f + 0.5f);
                    out.put(static_cast<char>(b < 0 ? 0 : (b > 255 ? 255 : b)));
                }
    }
}

}  // namespace omnivid
