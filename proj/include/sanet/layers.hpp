#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sanet/clustering.hpp"
#include "sanet/patches.hpp"

namespace sanet {

/// {0,1} feature maps produced by the binarization layer.
struct BinaryMaps {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<std::uint8_t> bits; // row-major (row, col, channel)
    std::vector<ChannelLineage> channel_lineage;

    std::uint8_t at(int r, int c, int ch) const {
        return bits[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
    }
};

/// Budget/limit knobs for one spectral layer run.
struct SpectralLayerOptions {
    int lanczos_iters = 1000;
    int minibatch_steps = 250;
    int nystrom_l_col = 0;   // 0 = auto rule
    int dense_limit = 10000; // largest N with a materialized dense kernel
    int dense_cap = 2000;    // dense_eigh oracle cap
    double tol = 1e-10;
};

/// Per-procedure solver record for run reports.
struct ProcedureReport {
    std::string procedure;
    double residual = 0.0;
    double seconds = 0.0;
    std::vector<std::string> warnings;
};

struct SpectralLayerResult {
    std::vector<FeatureMaps> maps; // one per image
    std::vector<ProcedureReport> procedures;
};

/// The spectral analysis layer: all patches of all images form one point
/// set; every procedure embeds that set independently; per image, each
/// procedure's rows are stacked to the grid and the procedures' maps are
/// concatenated channel-wise in procedure order.
SpectralLayerResult spectral_layer(const std::vector<PatchGrid>& inputs,
                                   const std::vector<ProcedureSpec>& procs, std::uint64_t seed,
                                   const SpectralLayerOptions& opts = {});

/// Max-absolute-value pooling: output(u,v) keeps the signed entry of
/// largest magnitude in the s_p x s_p window anchored at stride steps
/// (zero-padded past the borders, first maximum in row-major order wins).
FeatureMaps pool(const FeatureMaps& maps, int s_p, int stride);

/// bit = 1 where the feature is strictly positive.
BinaryMaps binarize(const FeatureMaps& maps);

/// Coding layer: channels sorted by lineage eigenvalue (ties by procedure,
/// then rank), partitioned into groups of L, bit j weighted 2^{L-j}; an
/// incomplete final group is padded with zero bits at the low-weight end.
FeatureMaps code(const BinaryMaps& maps, int group_bits = 8);

} // namespace sanet
