#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sanet/image.hpp"

namespace sanet {

/// Origin of one feature-map channel: which spectral procedure produced it,
/// the eigenvector's rank within that procedure, and its eigenvalue. The
/// coding layer orders channels by this record.
struct ChannelLineage {
    int procedure = 0;
    int eigen_rank = 0;
    double eigenvalue = 0.0;

    friend bool operator==(const ChannelLineage&, const ChannelLineage&) = default;
};

/// Per-image m×n×c feature stack, row-major (row, col, channel).
struct FeatureMaps {
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<double> values;
    std::vector<ChannelLineage> channel_lineage;

    FeatureMaps() = default;
    FeatureMaps(int r, int c, int ch)
        : rows(r), cols(c), channels(ch),
          values(static_cast<std::size_t>(r) * c * ch, 0.0), channel_lineage(ch) {}

    double& at(int r, int c, int ch) {
        return values[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
    }
    double at(int r, int c, int ch) const {
        return values[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
    }
};

/// Dense grid of flattened patches in row-major image order.
struct PatchGrid {
    int rows = 0;       // grid height m
    int cols = 0;       // grid width n
    int patch_h = 0;
    int patch_w = 0;
    int patch_c = 0;
    int stride = 1;
    // patches.row(r*cols + c) is the flattened (row, col, channel) window
    Eigen::MatrixXd patches;

    int count() const { return rows * cols; }
    int dim() const { return patch_h * patch_w * patch_c; }
};

/// Strided window extraction. With `pad`, windows are placed at stride steps
/// with symmetric zero padding so the grid is ⌈H/s⌉×⌈W/s⌉; without, only
/// fully interior windows are taken.
PatchGrid sample_patches(const ImageTensor& src, int p_h, int p_w, int stride, bool pad);
PatchGrid sample_patches(const FeatureMaps& src, int p_h, int p_w, int stride, bool pad);

/// Subtract each patch's own scalar mean (illumination normalization).
PatchGrid normalize_patches(const PatchGrid& g);

struct SpectralEmbedding; // eigensolver.hpp

/// Regroup embedding rows — ordered (image, patch-row, patch-col) — into one
/// FeatureMaps per image with the eigenvalue lineage attached.
std::vector<FeatureMaps> stack_embeddings(const SpectralEmbedding& e, int grid_rows,
                                          int grid_cols, int images, int procedure_id = 0);

/// Original-image extent influencing one second-layer feature patch
/// (exact when the first layer has stride 1).
std::pair<int, int> receptive_field(int p1_h, int p1_w, int p0_h, int p0_w);

/// Row-major flattening of a feature stack to one vector per image.
Eigen::VectorXd flatten(const FeatureMaps& m);

} // namespace sanet
