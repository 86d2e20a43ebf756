#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sanet/image.hpp"

namespace sanet {

/// Parse a big-endian IDX image file (magic 0x00000803) and, when given, the
/// matching label file (magic 0x00000801). Pixel bytes are scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path,
                        const std::optional<std::string>& labels_path = std::nullopt);

/// Write a dataset back to IDX. Values are rounded to bytes; loading a file
/// and re-serializing it reproduces the original payload bit for bit.
void save_idx(const LabeledDataset& d, const std::string& images_path,
              const std::optional<std::string>& labels_path = std::nullopt);

/// Decode every PNG/PGM/BMP under `root` (sorted by relative path). With
/// `class_from_subdir`, the first-level subdirectory gives the class id, in
/// lexicographic order. `channels` = 0 keeps native depth; 1 or 3 converts.
LabeledDataset load_image_dir(const std::string& root, bool class_from_subdir,
                              int channels = 0);

/// Resample every image to h×w bilinearly; channels preserved, values
/// clamped to [0,1]. Resizing to the current shape is the identity.
LabeledDataset resize_bilinear(const LabeledDataset& d, int h, int w);

/// A single image variant of the above.
ImageTensor resize_bilinear(const ImageTensor& im, int h, int w);

/// Pick exactly `per_class` members of every class, reproducibly from the
/// seed; selected items keep their original dataset order.
LabeledDataset stratified_subset(const LabeledDataset& d, int per_class, std::uint64_t seed);

/// Luma conversion (0.299/0.587/0.114) or channel replication.
ImageTensor convert_channels(const ImageTensor& im, int channels);

} // namespace sanet
