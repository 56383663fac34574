#pragma once

#include <string>
#include <utility>
#include <vector>

#include "omnivid/latent_codec.hpp"
#include "omnivid/task.hpp"

namespace omnivid {

// Proxy metrics; the claims they stand in for (temporal coherence, identity
// fidelity) are qualitative, and the report header says so.

double video_mse(const Video& a, const Video& b);
// 10*log10(1/mse) on [0,1] signal, capped at 99 dB so reports stay finite.
double psnr_db(double mse);

// (MSE of frame 0 vs first, MSE of frame F-1 vs last); each image is a
// 1-frame video of matching spatial shape.
std::pair<double, double> boundary_frame_error(const Video& generated, const Video& first,
                                               const Video& last);

// MSE restricted to the mask complement; rejects an empty complement.
double preservation_error(const Video& source, const Video& generated,
                          const Tensor<uint8_t>& mask);

// Color-histogram intersection (8 bins per channel) between the reference's
// non-white pixels and masked generated pixels, averaged over frames where the
// mask is non-empty. Rejects an all-empty mask.
double identity_score(const Video& reference, const Video& generated,
                      const Tensor<uint8_t>& mask);

struct EvalRow {
    long index = 0;
    TaskKind task = TaskKind::T2V;
    double mse = 0;
    double psnr = 0;
    // task-specific metrics; has_* gates presence in the report
    bool has_boundary = false;
    double boundary_first = 0, boundary_last = 0;
    bool has_preservation = false;
    double preservation = 0;
    bool has_identity = false;
    double identity = 0;
};

// report.csv (fixed column order, empty cells for inapplicable metrics) plus
// report.txt with per-metric mean/std over the rows that carry the metric.
// Byte-stable given identical rows.
void emit_report(const std::vector<EvalRow>& rows, const std::string& out_dir,
                 const std::string& run_metadata);

// Human-inspection exporter: one binary PPM per frame, stem_000.ppm etc.
void export_ppm(const Video& video, const std::string& stem);

}  // namespace omnivid
