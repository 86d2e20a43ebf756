#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sanet/dataset_io.hpp"
#include "sanet/layers.hpp"
#include "sanet/metrics.hpp"

namespace sanet {

/// One layer of a pipeline.
struct LayerSpec {
    enum class Type { spectral, pool, binarize, code };
    Type type = Type::spectral;

    // spectral
    struct Patch {
        int h = 1;
        int w = 1;
        int stride = 1;
        bool pad = true;
    } patch;
    std::vector<ProcedureSpec> procedures;

    // pool
    int pool_size = 2;
    int pool_stride = 2;

    // code
    int group_bits = 8;
};

struct DatasetSpec {
    enum class Kind { idx, dir };
    Kind kind = Kind::idx;
    std::string images; // idx images file, or directory root
    std::optional<std::string> labels;
    bool class_from_subdir = true; // dir only
    int channels = 0;              // dir only; 0 keeps native depth
    std::optional<std::pair<int, int>> resize;
    // declared input dims; enables shape validation at parse time
    std::optional<int> height, width, depth;
};

struct SubsetSpec {
    int per_class = 0;
};

struct PipelineConfig {
    std::vector<LayerSpec> layers;
    int kmeans_k = 2;
    int kmeans_restarts = 10;
    std::uint64_t seed = 0;
    DatasetSpec dataset;
    std::optional<SubsetSpec> subset;
    SpectralLayerOptions solver;

    /// Structural invariants (ordering, nonempty procedure banks).
    void validate_structure() const;
};

struct LayerShape {
    int rows = 0, cols = 0, channels = 0;
};

/// Walk the layer arithmetic from an input shape; throws ValidationError
/// citing the offending layers on any mismatch. Returns the per-layer
/// output shapes; the final entry gives the k-means feature length.
std::vector<LayerShape> predict_shapes(const PipelineConfig& cfg, int height, int width,
                                       int channels);

/// Parse + validate a JSON config; shape arithmetic is checked when the
/// dataset block declares input dimensions.
PipelineConfig parse_config(const std::string& text);
std::string serialize_config(const PipelineConfig& cfg);

struct StageTime {
    std::string stage;
    double seconds = 0.0;
};

struct RunReport {
    std::string version;
    std::uint64_t seed = 0;
    std::string config_echo; // serialized config
    std::vector<LayerShape> layer_shapes;
    std::optional<std::map<std::string, double>> metrics; // acc/nmi/ari/f1 (+ch)
    std::optional<std::string> ch_note; // degenerate-CH sentinel text
    double inertia = 0.0;
    std::vector<int> labels;
    std::vector<StageTime> stage_seconds;
    std::vector<std::vector<ProcedureReport>> procedures; // per spectral layer
};

std::string serialize_report(const RunReport& report);
RunReport parse_report(const std::string& text);

/// Execute the layer sequence, flatten the final per-image features, run
/// k-means, and score against labels when present. All randomness derives
/// from cfg.seed.
RunReport run_pipeline(const PipelineConfig& cfg, const LabeledDataset& data);

/// The concatenated per-point embedding produced by spectral layer
/// `layer_index` (0-based position in cfg.layers, which must name a
/// spectral layer): one row per patch, ordered (image, patch-row, patch-col).
Eigen::MatrixXd dump_embedding(const PipelineConfig& cfg, const LabeledDataset& data,
                               int layer_index);

enum class Ablation { full, no_cl, no_bl_cl, sal_only };

/// Truncate trailing layers per the ablation harness (Table-style variants).
PipelineConfig ablate(const PipelineConfig& cfg, Ablation variant);

/// Keep only the first M procedures of the first spectral layer.
PipelineConfig procedures_prefix(const PipelineConfig& cfg, int m);

/// Load the dataset a config names (including resize and subset handling).
LabeledDataset load_dataset(const PipelineConfig& cfg);

} // namespace sanet
