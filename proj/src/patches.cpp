#include "sanet/patches.hpp"

#include <cmath>
#include <string>

#include "sanet/eigensolver.hpp"
#include "sanet/errors.hpp"

namespace sanet {

namespace {

struct SourceView {
    int height;
    int width;
    int channels;
    const double* data; // row-major (row, col, channel)

    double at(int r, int c, int ch) const {
        return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
};

PatchGrid sample_impl(const SourceView& src, int p_h, int p_w, int stride, bool pad) {
    if (p_h < 1 || p_w < 1) throw ParameterError("patch size must be positive");
    if (stride < 1) throw ParameterError("stride must be positive");

    int grid_rows, grid_cols, top0, left0;
    if (pad) {
        grid_rows = (src.height + stride - 1) / stride;
        grid_cols = (src.width + stride - 1) / stride;
        // split the overhang of the strided window span evenly
        const int over_h = std::max(0, (grid_rows - 1) * stride + p_h - src.height);
        const int over_w = std::max(0, (grid_cols - 1) * stride + p_w - src.width);
        top0 = -over_h / 2;
        left0 = -over_w / 2;
    } else {
        if (src.height < p_h || src.width < p_w) {
            throw GeometryError("patch " + std::to_string(p_h) + "x" + std::to_string(p_w) +
                                " exceeds source extent " + std::to_string(src.height) + "x" +
                                std::to_string(src.width) + " without padding");
        }
        grid_rows = (src.height - p_h) / stride + 1;
        grid_cols = (src.width - p_w) / stride + 1;
        top0 = 0;
        left0 = 0;
    }

    PatchGrid g;
    g.rows = grid_rows;
    g.cols = grid_cols;
    g.patch_h = p_h;
    g.patch_w = p_w;
    g.patch_c = src.channels;
    g.stride = stride;
    g.patches.resize(static_cast<Eigen::Index>(grid_rows) * grid_cols,
                     static_cast<Eigen::Index>(p_h) * p_w * src.channels);

    for (int gr = 0; gr < grid_rows; ++gr) {
        for (int gc = 0; gc < grid_cols; ++gc) {
            const Eigen::Index row = static_cast<Eigen::Index>(gr) * grid_cols + gc;
            Eigen::Index col = 0;
            const int top = top0 + gr * stride;
            const int left = left0 + gc * stride;
            for (int r = 0; r < p_h; ++r) {
                const int sr = top + r;
                for (int c = 0; c < p_w; ++c) {
                    const int sc = left + c;
                    const bool inside = sr >= 0 && sr < src.height && sc >= 0 && sc < src.width;
                    for (int ch = 0; ch < src.channels; ++ch) {
                        g.patches(row, col++) = inside ? src.at(sr, sc, ch) : 0.0;
                    }
                }
            }
        }
    }
    return g;
}

} // namespace

PatchGrid sample_patches(const ImageTensor& src, int p_h, int p_w, int stride, bool pad) {
    return sample_impl({src.height, src.width, src.channels, src.data.data()}, p_h, p_w, stride, pad);
}

PatchGrid sample_patches(const FeatureMaps& src, int p_h, int p_w, int stride, bool pad) {
    return sample_impl({src.rows, src.cols, src.channels, src.values.data()}, p_h, p_w, stride, pad);
}

PatchGrid normalize_patches(const PatchGrid& g) {
    PatchGrid out = g;
    for (Eigen::Index i = 0; i < out.patches.rows(); ++i) {
        out.patches.row(i).array() -= out.patches.row(i).mean();
    }
    return out;
}

std::vector<FeatureMaps> stack_embeddings(const SpectralEmbedding& e, int grid_rows,
                                          int grid_cols, int images, int procedure_id) {
    const int per_image = grid_rows * grid_cols;
    const Eigen::Index expected = static_cast<Eigen::Index>(images) * per_image;
    if (e.rows.rows() != expected) {
        throw ConsistencyError("embedding has " + std::to_string(e.rows.rows()) + " rows, expected " +
                               std::to_string(expected) + " (" + std::to_string(images) + " images x " +
                               std::to_string(per_image) + " patches)");
    }
    const int n_eig = static_cast<int>(e.rows.cols());

    std::vector<FeatureMaps> maps;
    maps.reserve(images);
    for (int i = 0; i < images; ++i) {
        FeatureMaps m(grid_rows, grid_cols, n_eig);
        for (int ch = 0; ch < n_eig; ++ch) {
            m.channel_lineage[ch] = {procedure_id, ch, e.eigenvalues[ch]};
        }
        for (int r = 0; r < grid_rows; ++r) {
            for (int c = 0; c < grid_cols; ++c) {
                const Eigen::Index row = static_cast<Eigen::Index>(i) * per_image + r * grid_cols + c;
                for (int ch = 0; ch < n_eig; ++ch) m.at(r, c, ch) = e.rows(row, ch);
            }
        }
        maps.push_back(std::move(m));
    }
    return maps;
}

std::pair<int, int> receptive_field(int p1_h, int p1_w, int p0_h, int p0_w) {
    if (p1_h < 1 || p1_w < 1 || p0_h < 1 || p0_w < 1)
        throw ParameterError("patch sizes must be positive");
    return {p1_h + p0_h - 1, p1_w + p0_w - 1};
}

Eigen::VectorXd flatten(const FeatureMaps& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.values.data(), static_cast<Eigen::Index>(m.values.size()));
}

} // namespace sanet
