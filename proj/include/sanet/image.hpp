#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sanet/errors.hpp"

namespace sanet {

/// H×W×C image with values in [0,1], row-major by (row, col, channel).
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;
    std::int64_t source_index = 0;

    ImageTensor() = default;
    ImageTensor(int h, int w, int c, std::int64_t src = 0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0.0), source_index(src) {}

    double& at(int r, int c, int ch) {
        return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }
    double at(int r, int c, int ch) const {
        return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
    }

    std::size_t size() const { return data.size(); }
};

/// Uniformly shaped image collection with optional integer class labels.
struct LabeledDataset {
    std::vector<ImageTensor> images;
    std::optional<std::vector<int>> labels;
    std::string name;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }

    int height() const { return images.empty() ? 0 : images.front().height; }
    int width() const { return images.empty() ? 0 : images.front().width; }
    int channels() const { return images.empty() ? 0 : images.front().channels; }

    /// Enforce the structural invariants; throws ConsistencyError.
    void validate() const {
        if (labels && labels->size() != images.size()) {
            throw ConsistencyError("dataset '" + name + "': " + std::to_string(labels->size()) +
                                   " labels for " + std::to_string(images.size()) + " images");
        }
        for (std::size_t i = 0; i < images.size(); ++i) {
            const ImageTensor& im = images[i];
            if (im.height != height() || im.width != width() || im.channels != channels()) {
                throw ConsistencyError("dataset '" + name + "': image " + std::to_string(i) +
                                       " has shape " + std::to_string(im.height) + "x" +
                                       std::to_string(im.width) + "x" + std::to_string(im.channels) +
                                       ", expected " + std::to_string(height()) + "x" +
                                       std::to_string(width()) + "x" + std::to_string(channels()));
            }
            if (im.data.size() != static_cast<std::size_t>(im.height) * im.width * im.channels) {
                throw ConsistencyError("dataset '" + name + "': image " + std::to_string(i) +
                                       " data length does not match its shape");
            }
        }
    }
};

} // namespace sanet
