#include "sanet/pipeline.hpp"

#include <chrono>
#include <sstream>

#include <json.hpp>

#include "sanet/errors.hpp"
#include "sanet/rng.hpp"
#include "sanet/version.hpp"

namespace sanet {

namespace {

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw FormatError("config: " + path + ": " + msg);
}

const Json& need(const Json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) fail(path, "missing field '" + key + "'");
    return j.at(key);
}

int need_int(const Json& j, const std::string& key, const std::string& path) {
    const Json& v = need(j, key, path);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

double need_number(const Json& j, const std::string& key, const std::string& path) {
    const Json& v = need(j, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

std::string need_string(const Json& j, const std::string& key, const std::string& path) {
    const Json& v = need(j, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

ProcedureSpec parse_procedure(const Json& j, const std::string& path) {
    ProcedureSpec p;
    const std::string aff = need_string(j, "affinity", path);
    if (aff == "knn") {
        p.affinity = KnnKind{need_int(j, "k", path)};
    } else if (aff == "eps") {
        p.affinity = EpsKind{need_number(j, "eta_multiplier", path)};
    } else if (aff == "full") {
        p.affinity = FullKind{need_number(j, "sigma", path)};
    } else if (aff == "selftune") {
        p.affinity = SelfTuneKind{j.contains("K") ? need_int(j, "K", path) : 7};
    } else {
        fail(path + ".affinity", "unknown affinity '" + aff + "' (knn|eps|full|selftune)");
    }
    const std::string lap = need_string(j, "laplacian", path);
    if (lap == "sym") {
        p.laplacian = LaplacianKind::sym;
    } else if (lap == "rw") {
        p.laplacian = LaplacianKind::rw;
    } else {
        fail(path + ".laplacian", "unknown laplacian '" + lap + "' (sym|rw)");
    }
    const std::string sol = need_string(j, "solver", path);
    if (sol == "lanczos") {
        p.solver = SolverKind::lanczos;
    } else if (sol == "nystrom") {
        p.solver = SolverKind::nystrom;
    } else if (sol == "minibatch") {
        p.solver = SolverKind::minibatch;
    } else if (sol == "dense") {
        p.solver = SolverKind::dense;
    } else {
        fail(path + ".solver", "unknown solver '" + sol + "' (lanczos|nystrom|minibatch|dense)");
    }
    p.n_eig = need_int(j, "n_eig", path);
    try {
        p.validate();
    } catch (const ParameterError& e) {
        fail(path, e.what());
    }
    return p;
}

Json procedure_to_json(const ProcedureSpec& p) {
    Json j;
    if (const auto* k = std::get_if<KnnKind>(&p.affinity)) {
        j["affinity"] = "knn";
        j["k"] = k->k;
    } else if (const auto* e = std::get_if<EpsKind>(&p.affinity)) {
        j["affinity"] = "eps";
        j["eta_multiplier"] = e->eps;
    } else if (const auto* f = std::get_if<FullKind>(&p.affinity)) {
        j["affinity"] = "full";
        j["sigma"] = f->sigma;
    } else {
        j["affinity"] = "selftune";
        j["K"] = std::get<SelfTuneKind>(p.affinity).K;
    }
    j["laplacian"] = p.laplacian == LaplacianKind::sym ? "sym" : "rw";
    j["solver"] = to_string(p.solver);
    j["n_eig"] = p.n_eig;
    return j;
}

} // namespace

void PipelineConfig::validate_structure() const {
    if (layers.empty()) throw FormatError("config: layers: must not be empty");
    if (layers.front().type != LayerSpec::Type::spectral)
        throw FormatError("config: layers[0]: the first layer must be spectral");

    int code_count = 0;
    bool saw_binarize = false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const std::string path = "layers[" + std::to_string(i) + "]";
        switch (l.type) {
            case LayerSpec::Type::spectral:
                if (saw_binarize)
                    throw FormatError("config: " + path + ": spectral cannot follow binarize");
                if (l.procedures.empty())
                    throw FormatError("config: " + path + ": spectral layer needs >= 1 procedure");
                for (const ProcedureSpec& p : l.procedures) p.validate();
                if (l.patch.h < 1 || l.patch.w < 1 || l.patch.stride < 1)
                    throw FormatError("config: " + path + ": patch fields must be positive");
                break;
            case LayerSpec::Type::pool:
                if (saw_binarize) throw FormatError("config: " + path + ": pool cannot follow binarize");
                if (l.pool_size < 1 || l.pool_stride < 1)
                    throw FormatError("config: " + path + ": pool fields must be positive");
                break;
            case LayerSpec::Type::binarize: {
                if (i == 0) throw FormatError("config: " + path + ": binarize cannot open the pipeline");
                const LayerSpec::Type prev = layers[i - 1].type;
                if (prev != LayerSpec::Type::spectral && prev != LayerSpec::Type::pool)
                    throw FormatError("config: " + path + ": binarize must follow a spectral or pool layer");
                saw_binarize = true;
                break;
            }
            case LayerSpec::Type::code:
                if (++code_count > 1) throw FormatError("config: " + path + ": code may appear only once");
                if (!saw_binarize)
                    throw FormatError("config: " + path + ": code requires a preceding binarize layer");
                if (layers[i - 1].type != LayerSpec::Type::binarize)
                    throw FormatError("config: " + path + ": code must directly follow binarize");
                if (l.group_bits < 1)
                    throw FormatError("config: " + path + ": group_bits must be positive");
                if (i + 1 != layers.size())
                    throw FormatError("config: " + path + ": code must be the final layer");
                break;
        }
    }
    if (kmeans_k < 1) throw FormatError("config: kmeans.k must be positive");
    if (kmeans_restarts < 1) throw FormatError("config: kmeans.restarts must be positive");
}

std::vector<LayerShape> predict_shapes(const PipelineConfig& cfg, int height, int width,
                                       int channels) {
    std::vector<LayerShape> shapes;
    int r = height, c = width, ch = channels;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        const LayerSpec& l = cfg.layers[i];
        const std::string path = "layers[" + std::to_string(i) + "]";
        switch (l.type) {
            case LayerSpec::Type::spectral: {
                int gr, gc;
                if (l.patch.pad) {
                    gr = (r + l.patch.stride - 1) / l.patch.stride;
                    gc = (c + l.patch.stride - 1) / l.patch.stride;
                } else {
                    if (r < l.patch.h || c < l.patch.w) {
                        throw FormatError("config: " + path + ": patch " + std::to_string(l.patch.h) +
                                          "x" + std::to_string(l.patch.w) + " exceeds the incoming " +
                                          std::to_string(r) + "x" + std::to_string(c) + " maps from layer " +
                                          std::to_string(static_cast<int>(i) - 1));
                    }
                    gr = (r - l.patch.h) / l.patch.stride + 1;
                    gc = (c - l.patch.w) / l.patch.stride + 1;
                }
                int total = 0;
                for (const ProcedureSpec& p : l.procedures) total += p.n_eig;
                r = gr;
                c = gc;
                ch = total;
                break;
            }
            case LayerSpec::Type::pool:
                r = (r + l.pool_stride - 1) / l.pool_stride;
                c = (c + l.pool_stride - 1) / l.pool_stride;
                break;
            case LayerSpec::Type::binarize:
                break;
            case LayerSpec::Type::code:
                ch = (ch + l.group_bits - 1) / l.group_bits;
                break;
        }
        shapes.push_back({r, c, ch});
    }
    return shapes;
}

PipelineConfig parse_config(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("config: not valid JSON: ") + e.what());
    }
    PipelineConfig cfg;

    const Json& layers = need(j, "layers", "$");
    if (!layers.is_array()) fail("layers", "expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Json& lj = layers[i];
        const std::string path = "layers[" + std::to_string(i) + "]";
        LayerSpec l;
        const std::string type = need_string(lj, "type", path);
        if (type == "spectral") {
            l.type = LayerSpec::Type::spectral;
            const Json& pj = need(lj, "patch", path);
            l.patch.h = need_int(pj, "h", path + ".patch");
            l.patch.w = need_int(pj, "w", path + ".patch");
            l.patch.stride = need_int(pj, "stride", path + ".patch");
            l.patch.pad = pj.contains("pad") ? pj.at("pad").get<bool>() : true;
            const Json& procs = need(lj, "procedures", path);
            if (!procs.is_array()) fail(path + ".procedures", "expected an array");
            for (std::size_t t = 0; t < procs.size(); ++t) {
                l.procedures.push_back(
                    parse_procedure(procs[t], path + ".procedures[" + std::to_string(t) + "]"));
            }
        } else if (type == "pool") {
            l.type = LayerSpec::Type::pool;
            l.pool_size = need_int(lj, "size", path);
            l.pool_stride = lj.contains("stride") ? need_int(lj, "stride", path) : l.pool_size;
        } else if (type == "binarize") {
            l.type = LayerSpec::Type::binarize;
        } else if (type == "code") {
            l.type = LayerSpec::Type::code;
            l.group_bits = lj.contains("group_bits") ? need_int(lj, "group_bits", path) : 8;
        } else {
            fail(path + ".type", "unknown layer type '" + type + "'");
        }
        cfg.layers.push_back(std::move(l));
    }

    const Json& km = need(j, "kmeans", "$");
    cfg.kmeans_k = need_int(km, "k", "kmeans");
    cfg.kmeans_restarts = km.contains("restarts") ? need_int(km, "restarts", "kmeans") : 10;
    cfg.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;

    const Json& ds = need(j, "dataset", "$");
    const std::string kind = need_string(ds, "kind", "dataset");
    if (kind == "idx") {
        cfg.dataset.kind = DatasetSpec::Kind::idx;
    } else if (kind == "dir") {
        cfg.dataset.kind = DatasetSpec::Kind::dir;
    } else {
        fail("dataset.kind", "expected 'idx' or 'dir'");
    }
    cfg.dataset.images = need_string(ds, "images", "dataset");
    if (ds.contains("labels")) cfg.dataset.labels = ds.at("labels").get<std::string>();
    if (ds.contains("class_from_subdir")) cfg.dataset.class_from_subdir = ds.at("class_from_subdir").get<bool>();
    if (ds.contains("channels")) cfg.dataset.channels = need_int(ds, "channels", "dataset");
    if (ds.contains("resize")) {
        const Json& rs = ds.at("resize");
        cfg.dataset.resize = {need_int(rs, "height", "dataset.resize"), need_int(rs, "width", "dataset.resize")};
    }
    if (ds.contains("height")) cfg.dataset.height = need_int(ds, "height", "dataset");
    if (ds.contains("width")) cfg.dataset.width = need_int(ds, "width", "dataset");
    if (ds.contains("depth")) cfg.dataset.depth = need_int(ds, "depth", "dataset");

    if (j.contains("subset")) {
        cfg.subset = SubsetSpec{need_int(j.at("subset"), "per_class", "subset")};
    }
    if (j.contains("solver")) {
        const Json& so = j.at("solver");
        if (so.contains("lanczos_iters")) cfg.solver.lanczos_iters = need_int(so, "lanczos_iters", "solver");
        if (so.contains("minibatch_steps")) cfg.solver.minibatch_steps = need_int(so, "minibatch_steps", "solver");
        if (so.contains("nystrom_l_col")) cfg.solver.nystrom_l_col = need_int(so, "nystrom_l_col", "solver");
        if (so.contains("dense_limit")) cfg.solver.dense_limit = need_int(so, "dense_limit", "solver");
        if (so.contains("dense_cap")) cfg.solver.dense_cap = need_int(so, "dense_cap", "solver");
        if (so.contains("tol")) cfg.solver.tol = need_number(so, "tol", "solver");
    }

    cfg.validate_structure();

    // shape arithmetic, when the input dimensions are declared
    std::optional<int> h = cfg.dataset.height, w = cfg.dataset.width;
    int depth = cfg.dataset.depth.value_or(cfg.dataset.kind == DatasetSpec::Kind::idx
                                               ? 1
                                               : (cfg.dataset.channels > 0 ? cfg.dataset.channels : 0));
    if (cfg.dataset.resize) {
        h = cfg.dataset.resize->first;
        w = cfg.dataset.resize->second;
    }
    if (h && w && depth > 0) predict_shapes(cfg, *h, *w, depth);
    return cfg;
}

std::string serialize_config(const PipelineConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    Json ds;
    ds["kind"] = cfg.dataset.kind == DatasetSpec::Kind::idx ? "idx" : "dir";
    ds["images"] = cfg.dataset.images;
    if (cfg.dataset.labels) ds["labels"] = *cfg.dataset.labels;
    if (cfg.dataset.kind == DatasetSpec::Kind::dir) {
        ds["class_from_subdir"] = cfg.dataset.class_from_subdir;
        if (cfg.dataset.channels > 0) ds["channels"] = cfg.dataset.channels;
    }
    if (cfg.dataset.resize) {
        ds["resize"] = Json{{"height", cfg.dataset.resize->first}, {"width", cfg.dataset.resize->second}};
    }
    if (cfg.dataset.height) ds["height"] = *cfg.dataset.height;
    if (cfg.dataset.width) ds["width"] = *cfg.dataset.width;
    if (cfg.dataset.depth) ds["depth"] = *cfg.dataset.depth;
    j["dataset"] = std::move(ds);
    if (cfg.subset) j["subset"] = Json{{"per_class", cfg.subset->per_class}};

    Json layers = Json::array();
    for (const LayerSpec& l : cfg.layers) {
        Json lj;
        switch (l.type) {
            case LayerSpec::Type::spectral: {
                lj["type"] = "spectral";
                lj["patch"] = Json{{"h", l.patch.h},
                                   {"w", l.patch.w},
                                   {"stride", l.patch.stride},
                                   {"pad", l.patch.pad}};
                Json procs = Json::array();
                for (const ProcedureSpec& p : l.procedures) procs.push_back(procedure_to_json(p));
                lj["procedures"] = std::move(procs);
                break;
            }
            case LayerSpec::Type::pool:
                lj["type"] = "pool";
                lj["size"] = l.pool_size;
                lj["stride"] = l.pool_stride;
                break;
            case LayerSpec::Type::binarize:
                lj["type"] = "binarize";
                break;
            case LayerSpec::Type::code:
                lj["type"] = "code";
                lj["group_bits"] = l.group_bits;
                break;
        }
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["kmeans"] = Json{{"k", cfg.kmeans_k}, {"restarts", cfg.kmeans_restarts}};
    j["solver"] = Json{{"lanczos_iters", cfg.solver.lanczos_iters},
                       {"minibatch_steps", cfg.solver.minibatch_steps},
                       {"nystrom_l_col", cfg.solver.nystrom_l_col},
                       {"dense_limit", cfg.solver.dense_limit},
                       {"dense_cap", cfg.solver.dense_cap},
                       {"tol", cfg.solver.tol}};
    return j.dump(2);
}

LabeledDataset load_dataset(const PipelineConfig& cfg) {
    LabeledDataset data;
    if (cfg.dataset.kind == DatasetSpec::Kind::idx) {
        data = load_idx(cfg.dataset.images, cfg.dataset.labels);
    } else {
        data = load_image_dir(cfg.dataset.images, cfg.dataset.class_from_subdir, cfg.dataset.channels);
    }
    if (cfg.dataset.resize) {
        data = resize_bilinear(data, cfg.dataset.resize->first, cfg.dataset.resize->second);
    }
    if (cfg.subset && cfg.subset->per_class > 0) {
        data = stratified_subset(data, cfg.subset->per_class,
                                 Rng(cfg.seed).derive("pipeline/subset").key());
    }
    return data;
}

namespace {

/// Rolling state while layers execute.
struct StageData {
    std::vector<ImageTensor> images;   // stage 0 input
    std::vector<FeatureMaps> maps;
    std::vector<BinaryMaps> binary;
    enum class Kind { images, maps, binary } kind = Kind::images;
};

std::vector<PatchGrid> sample_stage(const StageData& s, const LayerSpec& l, bool normalize) {
    std::vector<PatchGrid> grids;
    if (s.kind == StageData::Kind::images) {
        grids.reserve(s.images.size());
        for (const ImageTensor& im : s.images) {
            PatchGrid g = sample_patches(im, l.patch.h, l.patch.w, l.patch.stride, l.patch.pad);
            grids.push_back(normalize ? normalize_patches(g) : std::move(g));
        }
    } else if (s.kind == StageData::Kind::maps) {
        grids.reserve(s.maps.size());
        for (const FeatureMaps& m : s.maps) {
            grids.push_back(sample_patches(m, l.patch.h, l.patch.w, l.patch.stride, l.patch.pad));
        }
    } else {
        throw ConsistencyError("spectral layer cannot consume binarized maps");
    }
    return grids;
}

struct ExecutionTrace {
    StageData state;
    std::vector<LayerShape> shapes;
    std::vector<StageTime> times;
    std::vector<std::vector<ProcedureReport>> procedures;
    std::vector<SpectralLayerResult> spectral_results; // per spectral layer
};

ExecutionTrace execute_layers(const PipelineConfig& cfg, const LabeledDataset& data,
                              int stop_after = -1) {
    ExecutionTrace trace;
    trace.state.images = data.images;
    trace.state.kind = StageData::Kind::images;

    const Rng root(cfg.seed);
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
        if (stop_after >= 0 && static_cast<int>(i) > stop_after) break;
        const LayerSpec& l = cfg.layers[i];
        const auto t0 = Clock::now();
        const std::string label = "layer[" + std::to_string(i) + "]";
        try {
            switch (l.type) {
                case LayerSpec::Type::spectral: {
                    const bool normalize = trace.state.kind == StageData::Kind::images;
                    std::vector<PatchGrid> grids = sample_stage(trace.state, l, normalize);
                    const std::uint64_t layer_seed =
                        root.derive("pipeline/layer", static_cast<std::uint64_t>(i)).key();
                    SpectralLayerResult res = spectral_layer(grids, l.procedures, layer_seed, cfg.solver);
                    trace.procedures.push_back(res.procedures);
                    trace.state.maps = res.maps;
                    trace.state.kind = StageData::Kind::maps;
                    trace.state.images.clear();
                    trace.spectral_results.push_back(std::move(res));
                    break;
                }
                case LayerSpec::Type::pool: {
                    if (trace.state.kind != StageData::Kind::maps)
                        throw ConsistencyError("pool layer needs feature maps");
                    for (FeatureMaps& m : trace.state.maps) m = pool(m, l.pool_size, l.pool_stride);
                    break;
                }
                case LayerSpec::Type::binarize: {
                    if (trace.state.kind != StageData::Kind::maps)
                        throw ConsistencyError("binarize layer needs feature maps");
                    trace.state.binary.clear();
                    trace.state.binary.reserve(trace.state.maps.size());
                    for (const FeatureMaps& m : trace.state.maps) trace.state.binary.push_back(binarize(m));
                    trace.state.maps.clear();
                    trace.state.kind = StageData::Kind::binary;
                    break;
                }
                case LayerSpec::Type::code: {
                    if (trace.state.kind != StageData::Kind::binary)
                        throw ConsistencyError("code layer needs binarized maps");
                    trace.state.maps.clear();
                    trace.state.maps.reserve(trace.state.binary.size());
                    for (const BinaryMaps& b : trace.state.binary)
                        trace.state.maps.push_back(code(b, l.group_bits));
                    trace.state.binary.clear();
                    trace.state.kind = StageData::Kind::maps;
                    break;
                }
            }
        } catch (const Error& e) {
            throw RuntimeError(label + ": " + e.what());
        }

        LayerShape shape;
        if (trace.state.kind == StageData::Kind::maps && !trace.state.maps.empty()) {
            shape = {trace.state.maps[0].rows, trace.state.maps[0].cols, trace.state.maps[0].channels};
        } else if (trace.state.kind == StageData::Kind::binary && !trace.state.binary.empty()) {
            shape = {trace.state.binary[0].rows, trace.state.binary[0].cols, trace.state.binary[0].channels};
        }
        trace.shapes.push_back(shape);
        trace.times.push_back({label + (l.type == LayerSpec::Type::spectral
                                            ? ":spectral"
                                            : l.type == LayerSpec::Type::pool
                                                  ? ":pool"
                                                  : l.type == LayerSpec::Type::binarize ? ":binarize"
                                                                                        : ":code"),
                               seconds_since(t0)});
    }
    return trace;
}

Eigen::MatrixXd final_features(const StageData& s) {
    if (s.kind == StageData::Kind::maps) {
        const std::size_t n = s.maps.size();
        const Eigen::Index d = static_cast<Eigen::Index>(s.maps[0].values.size());
        Eigen::MatrixXd X(n, d);
        for (std::size_t i = 0; i < n; ++i) X.row(static_cast<Eigen::Index>(i)) = flatten(s.maps[i]);
        return X;
    }
    if (s.kind == StageData::Kind::binary) {
        const std::size_t n = s.binary.size();
        const Eigen::Index d = static_cast<Eigen::Index>(s.binary[0].bits.size());
        Eigen::MatrixXd X(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) X(static_cast<Eigen::Index>(i), j) = s.binary[i].bits[j];
        }
        return X;
    }
    throw ConsistencyError("pipeline produced no features");
}

} // namespace

RunReport run_pipeline(const PipelineConfig& cfg, const LabeledDataset& data) {
    if (data.empty()) throw ParameterError("run_pipeline: dataset is empty");
    cfg.validate_structure();
    predict_shapes(cfg, data.height(), data.width(), data.channels());

    ExecutionTrace trace = execute_layers(cfg, data);

    RunReport report;
    report.version = kVersion;
    report.seed = cfg.seed;
    report.config_echo = serialize_config(cfg);
    report.layer_shapes = trace.shapes;
    report.stage_seconds = trace.times;
    report.procedures = trace.procedures;

    const auto t0 = Clock::now();
    const Eigen::MatrixXd features = final_features(trace.state);
    ClusteringResult clusters = kmeans(features, cfg.kmeans_k, cfg.kmeans_restarts,
                                       Rng(cfg.seed).derive("pipeline/kmeans").key());
    report.stage_seconds.push_back({"kmeans", seconds_since(t0)});
    report.inertia = clusters.inertia;
    report.labels = clusters.labels;

    if (data.labels) {
        std::map<std::string, double> m;
        m["acc"] = accuracy(*data.labels, clusters.labels);
        m["nmi"] = nmi(*data.labels, clusters.labels);
        m["ari"] = ari(*data.labels, clusters.labels);
        m["f1"] = pairwise_f1(*data.labels, clusters.labels);
        try {
            m["ch"] = calinski_harabasz(features, clusters.labels);
        } catch (const Error& e) {
            report.ch_note = e.what();
        }
        report.metrics = std::move(m);
    }
    return report;
}

Eigen::MatrixXd dump_embedding(const PipelineConfig& cfg, const LabeledDataset& data,
                               int layer_index) {
    if (layer_index < 0 || layer_index >= static_cast<int>(cfg.layers.size()))
        throw ParameterError("layer index " + std::to_string(layer_index) + " out of range");
    if (cfg.layers[layer_index].type != LayerSpec::Type::spectral)
        throw ParameterError("layer " + std::to_string(layer_index) + " is not a spectral layer");

    ExecutionTrace trace = execute_layers(cfg, data, layer_index);
    const std::vector<FeatureMaps>& maps = trace.spectral_results.back().maps;

    const int per_image = maps[0].rows * maps[0].cols;
    const int channels = maps[0].channels;
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(maps.size()) * per_image, channels);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        for (int r = 0; r < maps[0].rows; ++r) {
            for (int c = 0; c < maps[0].cols; ++c) {
                const Eigen::Index row = static_cast<Eigen::Index>(i) * per_image + r * maps[0].cols + c;
                for (int ch = 0; ch < channels; ++ch) rows(row, ch) = maps[i].at(r, c, ch);
            }
        }
    }
    return rows;
}

PipelineConfig ablate(const PipelineConfig& cfg, Ablation variant) {
    PipelineConfig out = cfg;
    auto drop_trailing = [&](LayerSpec::Type t) {
        if (!out.layers.empty() && out.layers.back().type == t) out.layers.pop_back();
    };
    switch (variant) {
        case Ablation::full:
            break;
        case Ablation::no_cl:
            drop_trailing(LayerSpec::Type::code);
            break;
        case Ablation::no_bl_cl:
            drop_trailing(LayerSpec::Type::code);
            drop_trailing(LayerSpec::Type::binarize);
            break;
        case Ablation::sal_only:
            drop_trailing(LayerSpec::Type::code);
            drop_trailing(LayerSpec::Type::binarize);
            while (!out.layers.empty() && out.layers.back().type == LayerSpec::Type::pool)
                out.layers.pop_back();
            break;
    }
    out.validate_structure();
    return out;
}

PipelineConfig procedures_prefix(const PipelineConfig& cfg, int m) {
    if (m < 1) throw ParameterError("procedures prefix must be positive");
    PipelineConfig out = cfg;
    for (LayerSpec& l : out.layers) {
        if (l.type == LayerSpec::Type::spectral) {
            if (m > static_cast<int>(l.procedures.size()))
                throw ParameterError("prefix " + std::to_string(m) + " exceeds the " +
                                     std::to_string(l.procedures.size()) + " procedures of the first layer");
            l.procedures.resize(m);
            break;
        }
    }
    return out;
}

std::string serialize_report(const RunReport& report) {
    Json j;
    j["version"] = report.version;
    j["seed"] = report.seed;
    j["config"] = Json::parse(report.config_echo);
    Json shapes = Json::array();
    for (const LayerShape& s : report.layer_shapes) shapes.push_back(Json::array({s.rows, s.cols, s.channels}));
    j["layer_shapes"] = std::move(shapes);
    j["metric_variants"] = Json{{"nmi", "geometric"}, {"f1", "pairwise"}};
    if (report.metrics) {
        Json m;
        for (const auto& [k, v] : *report.metrics) m[k] = v;
        j["metrics"] = std::move(m);
    } else {
        j["metrics"] = nullptr;
    }
    if (report.ch_note) j["ch_note"] = *report.ch_note;
    j["inertia"] = report.inertia;
    j["labels"] = report.labels;
    Json times = Json::array();
    for (const StageTime& t : report.stage_seconds)
        times.push_back(Json{{"stage", t.stage}, {"seconds", t.seconds}});
    j["stage_seconds"] = std::move(times);
    Json procs = Json::array();
    for (const auto& layer : report.procedures) {
        Json lj = Json::array();
        for (const ProcedureReport& p : layer) {
            lj.push_back(Json{{"procedure", p.procedure},
                              {"residual", p.residual},
                              {"seconds", p.seconds},
                              {"warnings", p.warnings}});
        }
        procs.push_back(std::move(lj));
    }
    j["procedures"] = std::move(procs);
    return j.dump(2);
}

RunReport parse_report(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("report: not valid JSON: ") + e.what());
    }
    RunReport r;
    r.version = j.at("version").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config_echo = j.at("config").dump(2);
    for (const Json& s : j.at("layer_shapes")) {
        r.layer_shapes.push_back({s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
    }
    if (!j.at("metrics").is_null()) {
        std::map<std::string, double> m;
        for (const auto& [k, v] : j.at("metrics").items()) m[k] = v.get<double>();
        r.metrics = std::move(m);
    }
    if (j.contains("ch_note")) r.ch_note = j.at("ch_note").get<std::string>();
    r.inertia = j.at("inertia").get<double>();
    r.labels = j.at("labels").get<std::vector<int>>();
    for (const Json& t : j.at("stage_seconds")) {
        r.stage_seconds.push_back({t.at("stage").get<std::string>(), t.at("seconds").get<double>()});
    }
    for (const Json& layer : j.at("procedures")) {
        std::vector<ProcedureReport> lp;
        for (const Json& p : layer) {
            ProcedureReport pr;
            pr.procedure = p.at("procedure").get<std::string>();
            pr.residual = p.at("residual").get<double>();
            pr.seconds = p.at("seconds").get<double>();
            pr.warnings = p.at("warnings").get<std::vector<std::string>>();
            lp.push_back(std::move(pr));
        }
        r.procedures.push_back(std::move(lp));
    }
    return r;
}

} // namespace sanet
