#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sanet/clustering.hpp"
#include "sanet/metrics.hpp"
#include "sanet/parallel.hpp"
#include "sanet/pipeline.hpp"
#include "sanet/version.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sanet::FormatError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw sanet::FormatError("cannot write '" + path + "'");
    out << text;
}

std::vector<int> read_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sanet::FormatError("cannot open label file '" + path + "'");
    std::vector<int> labels;
    std::string token;
    while (in >> token) {
        try {
            labels.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw sanet::FormatError("label file '" + path + "': '" + token + "' is not an integer");
        }
    }
    if (labels.empty()) throw sanet::FormatError("label file '" + path + "' is empty");
    return labels;
}

Eigen::MatrixXd read_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sanet::FormatError("cannot open points file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line) {
            if (c == ',' || c == ';' || c == '\t') c = ' ';
        }
        std::istringstream ls(line);
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw sanet::FormatError("points file '" + path + "' has no rows");
    Eigen::MatrixXd X(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw sanet::ConsistencyError("points file '" + path + "': ragged row " + std::to_string(i));
        for (std::size_t j = 0; j < rows[i].size(); ++j) X(i, j) = rows[i][j];
    }
    return X;
}

sanet::GraphKind parse_affinity_arg(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string param = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (kind == "knn") return sanet::KnnKind{std::stoi(param)};
        if (kind == "eps") return sanet::EpsKind{std::stod(param)}; // multiplier of eta
        if (kind == "full") return sanet::FullKind{std::stod(param)};
        if (kind == "selftune") return sanet::SelfTuneKind{param.empty() ? 7 : std::stoi(param)};
    } catch (const std::exception&) {
        throw sanet::ParameterError("affinity '" + text + "': bad parameter");
    }
    throw sanet::ParameterError("unknown affinity '" + kind + "' (knn|eps|full|selftune)");
}

sanet::SolverKind parse_solver_arg(const std::string& s) {
    if (s == "lanczos") return sanet::SolverKind::lanczos;
    if (s == "nystrom") return sanet::SolverKind::nystrom;
    if (s == "minibatch") return sanet::SolverKind::minibatch;
    if (s == "dense") return sanet::SolverKind::dense;
    throw sanet::ParameterError("unknown solver '" + s + "'");
}

std::string format_embedding(const Eigen::MatrixXd& rows, int layer) {
    std::ostringstream os;
    os << "# rows=" << rows.rows() << " cols=" << rows.cols() << " layer=" << layer << "\n";
    char buf[32];
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.9g", rows(i, j));
            os << buf << (j + 1 < rows.cols() ? " " : "");
        }
        os << "\n";
    }
    return os.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SA-Net spectral-analysis clustering"};
    app.set_version_flag("--version", sanet::kVersion);
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads, "worker thread cap (outputs are identical for any value)");

    // run
    auto* run = app.add_subcommand("run", "execute a pipeline config");
    std::string run_config, run_out;
    std::int64_t run_seed = -1;
    int run_subset = -1, run_prefix = -1;
    std::string run_ablation = "full";
    run->add_option("--config", run_config, "pipeline config (JSON)")->required();
    run->add_option("--out", run_out, "report output path")->required();
    run->add_option("--seed", run_seed, "override the config seed");
    run->add_option("--subset", run_subset, "override per-class stratified subset size");
    run->add_option("--procedures-prefix", run_prefix, "keep only the first M procedures of the first spectral layer");
    run->add_option("--ablation", run_ablation, "full|no-cl|no-bl-cl|sal-only")
        ->check(CLI::IsMember({"full", "no-cl", "no-bl-cl", "sal-only"}));

    // baseline spectral
    auto* baseline = app.add_subcommand("baseline", "one-shot reference methods");
    auto* spectral = baseline->add_subcommand("spectral", "spectral clustering (affinity -> Laplacian -> k-means)");
    std::string sp_affinity = "knn:9", sp_laplacian = "sym", sp_solver = "lanczos";
    std::string sp_points, sp_images, sp_labels, sp_out;
    int sp_k = 0;
    std::uint64_t sp_seed = 0;
    spectral->add_option("--affinity", sp_affinity, "knn:K | eps:MULT | full:SIGMA | selftune[:K]");
    spectral->add_option("--laplacian", sp_laplacian, "sym|rw")->check(CLI::IsMember({"sym", "rw"}));
    spectral->add_option("--solver", sp_solver, "lanczos|nystrom|minibatch|dense");
    spectral->add_option("--k", sp_k, "cluster count")->required();
    spectral->add_option("--points", sp_points, "delimited text points (one row per point)");
    spectral->add_option("--images", sp_images, "IDX image file (flattened pixels as points)");
    spectral->add_option("--labels", sp_labels, "IDX label file for scoring");
    spectral->add_option("--out", sp_out, "write predicted labels here (one per line)");
    spectral->add_option("--seed", sp_seed, "random seed");

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "score a predicted labeling");
    std::string m_true, m_pred;
    metrics_cmd->add_option("--true", m_true, "ground-truth labels, one per line")->required();
    metrics_cmd->add_option("--pred", m_pred, "predicted labels, one per line")->required();

    // dump-embedding
    auto* dump = app.add_subcommand("dump-embedding", "write a spectral layer's per-point rows");
    std::string d_config, d_out;
    int d_layer = 0;
    std::int64_t d_seed = -1;
    dump->add_option("--config", d_config, "pipeline config (JSON)")->required();
    dump->add_option("--layer", d_layer, "0-based index of a spectral layer")->required();
    dump->add_option("--out", d_out, "output path")->required();
    dump->add_option("--seed", d_seed, "override the config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints the message and usage
        return code == 0 ? 0 : 1;     // validation errors exit 1
    }

    sanet::parallel::set_max_threads(threads);
    try {
        if (*run) {
            sanet::PipelineConfig cfg = sanet::parse_config(read_file(run_config));
            if (run_seed >= 0) cfg.seed = static_cast<std::uint64_t>(run_seed);
            if (run_subset >= 0) cfg.subset = sanet::SubsetSpec{run_subset};
            if (run_prefix >= 0) cfg = sanet::procedures_prefix(cfg, run_prefix);
            if (run_ablation == "no-cl") cfg = sanet::ablate(cfg, sanet::Ablation::no_cl);
            if (run_ablation == "no-bl-cl") cfg = sanet::ablate(cfg, sanet::Ablation::no_bl_cl);
            if (run_ablation == "sal-only") cfg = sanet::ablate(cfg, sanet::Ablation::sal_only);

            sanet::LabeledDataset data = sanet::load_dataset(cfg);
            sanet::RunReport report = sanet::run_pipeline(cfg, data);
            write_file(run_out, sanet::serialize_report(report));
            if (report.metrics) {
                for (const auto& [k, v] : *report.metrics) std::cout << k << "=" << v << "\n";
            }
            std::cout << "report written to " << run_out << "\n";
        } else if (*spectral) {
            Eigen::MatrixXd X;
            std::optional<std::vector<int>> truth;
            if (!sp_points.empty()) {
                X = read_points(sp_points);
            } else if (!sp_images.empty()) {
                sanet::LabeledDataset d = sanet::load_idx(
                    sp_images, sp_labels.empty() ? std::nullopt : std::make_optional(sp_labels));
                X.resize(d.size(), static_cast<Eigen::Index>(d.images[0].size()));
                for (std::size_t i = 0; i < d.size(); ++i) {
                    X.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(
                        d.images[i].data.data(), static_cast<Eigen::Index>(d.images[i].size()));
                }
                truth = d.labels;
            } else {
                throw sanet::ParameterError("baseline spectral needs --points or --images");
            }
            sanet::ProcedureSpec proc;
            proc.affinity = parse_affinity_arg(sp_affinity);
            proc.laplacian = sp_laplacian == "rw" ? sanet::LaplacianKind::rw : sanet::LaplacianKind::sym;
            proc.solver = parse_solver_arg(sp_solver);
            sanet::ClusteringResult result = sanet::spectral_cluster(X, sp_k, proc, sp_seed);

            if (!sp_out.empty()) {
                std::ostringstream os;
                for (int label : result.labels) os << label << "\n";
                write_file(sp_out, os.str());
            }
            std::cout << "inertia=" << result.inertia << "\n";
            if (truth) {
                std::cout << "acc=" << sanet::accuracy(*truth, result.labels) << "\n"
                          << "nmi=" << sanet::nmi(*truth, result.labels) << "\n"
                          << "ari=" << sanet::ari(*truth, result.labels) << "\n"
                          << "f1=" << sanet::pairwise_f1(*truth, result.labels) << "\n";
            }
        } else if (*metrics_cmd) {
            const std::vector<int> t = read_labels(m_true);
            const std::vector<int> p = read_labels(m_pred);
            std::cout << "acc=" << sanet::accuracy(t, p) << "\n"
                      << "nmi=" << sanet::nmi(t, p) << "\n"
                      << "ari=" << sanet::ari(t, p) << "\n"
                      << "f1=" << sanet::pairwise_f1(t, p) << "\n";
        } else if (*dump) {
            sanet::PipelineConfig cfg = sanet::parse_config(read_file(d_config));
            if (d_seed >= 0) cfg.seed = static_cast<std::uint64_t>(d_seed);
            sanet::LabeledDataset data = sanet::load_dataset(cfg);
            const Eigen::MatrixXd rows = sanet::dump_embedding(cfg, data, d_layer);
            write_file(d_out, format_embedding(rows, d_layer));
            std::cout << "embedding written to " << d_out << "\n";
        }
    } catch (const sanet::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sanet::RuntimeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
