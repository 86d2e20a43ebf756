#include <doctest.h>

#include <numeric>

#include "sanet/layers.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace sanet;

namespace {

/// Wrap a point set as single-pixel images: one 1x1xd patch per image, so a
/// spectral layer reduces to plain spectral embedding of the points.
std::vector<PatchGrid> as_point_grids(const Eigen::MatrixXd& X) {
    std::vector<PatchGrid> grids(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        PatchGrid& g = grids[i];
        g.rows = g.cols = 1;
        g.patch_h = 1;
        g.patch_w = 1;
        g.patch_c = static_cast<int>(X.cols());
        g.stride = 1;
        g.patches = X.row(i);
    }
    return grids;
}

FeatureMaps maps_from(std::initializer_list<double> values, int rows, int cols, int channels) {
    FeatureMaps m(rows, cols, channels);
    std::copy(values.begin(), values.end(), m.values.begin());
    for (int ch = 0; ch < channels; ++ch) m.channel_lineage[ch] = {0, ch, 0.1 * ch};
    return m;
}

} // namespace

TEST_CASE("spectral_layer") {
    SUBCASE("reduction case: 1 procedure on 1x1 grids equals the plain embedding") {
        std::vector<int> truth;
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}}, 30, 1.5, 3, &truth);
        ProcedureSpec proc;
        proc.affinity = KnnKind{5};
        proc.laplacian = LaplacianKind::sym;
        proc.solver = SolverKind::dense;
        proc.n_eig = 2;

        SpectralLayerResult res = spectral_layer(as_point_grids(X), {proc}, 11);
        REQUIRE(res.maps.size() == 30);
        CHECK(res.maps[0].rows == 1);
        CHECK(res.maps[0].channels == 2);

        AffinityGraph g = knn_graph(X, 5);
        SolverBudget b;
        b.n_eig = 2;
        b.seed = Rng(11).derive("proc/" + proc.canonical()).key();
        SpectralEmbedding direct = solve_laplacian(g, LaplacianKind::sym, SolverKind::dense, b);
        for (int i = 0; i < 30; ++i) {
            CHECK(res.maps[i].at(0, 0, 0) == doctest::Approx(direct.rows(i, 0)).epsilon(1e-12));
            CHECK(res.maps[i].at(0, 0, 1) == doctest::Approx(direct.rows(i, 1)).epsilon(1e-12));
        }
    }
    SUBCASE("two identical procedures produce two identical channel blocks") {
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}}, 20, 1.2, 5);
        ProcedureSpec proc;
        proc.affinity = KnnKind{4};
        proc.solver = SolverKind::lanczos;
        proc.n_eig = 3;
        SpectralLayerResult res = spectral_layer(as_point_grids(X), {proc, proc}, 17);
        for (const FeatureMaps& m : res.maps) {
            REQUIRE(m.channels == 6);
            for (int ch = 0; ch < 3; ++ch) {
                CHECK(m.at(0, 0, ch) == m.at(0, 0, ch + 3));
            }
        }
        CHECK(res.maps[0].channel_lineage[0].procedure == 0);
        CHECK(res.maps[0].channel_lineage[3].procedure == 1);
    }
    SUBCASE("procedure banks concatenate channels with eigenvalue lineage") {
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}}, 24, 1.0, 9);
        ProcedureSpec a;
        a.affinity = KnnKind{4};
        a.solver = SolverKind::dense;
        a.n_eig = 2;
        ProcedureSpec b;
        b.affinity = SelfTuneKind{5};
        b.solver = SolverKind::dense;
        b.n_eig = 3;
        SpectralLayerResult res = spectral_layer(as_point_grids(X), {a, b}, 23);
        REQUIRE(res.maps[0].channels == 5);
        CHECK(res.maps[0].channel_lineage[2].procedure == 1);
        CHECK(res.maps[0].channel_lineage[2].eigen_rank == 0);
        // eigenvalues are non-descending inside each procedure block
        CHECK(res.maps[0].channel_lineage[0].eigenvalue <= res.maps[0].channel_lineage[1].eigenvalue);
        CHECK(res.maps[0].channel_lineage[3].eigenvalue <= res.maps[0].channel_lineage[4].eigenvalue);
        CHECK(res.procedures.size() == 2);
    }
    SUBCASE("a disconnected sparse graph names the failing procedure") {
        Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {500, 0}}, 10, 0.1, 13);
        ProcedureSpec proc;
        proc.affinity = KnnKind{3};
        proc.solver = SolverKind::lanczos;
        proc.n_eig = 2;
        try {
            spectral_layer(as_point_grids(X), {proc}, 1);
            FAIL("expected ConnectivityError");
        } catch (const ConnectivityError& e) {
            CHECK(std::string(e.what()).find("knn:3") != std::string::npos);
            CHECK(std::string(e.what()).find("2 components") != std::string::npos);
        }
    }
    SUBCASE("grid-shaped inputs stack back to grid-shaped maps") {
        // 3 images of 6x6, patches 3x3 stride 3 -> 2x2 grids
        std::vector<PatchGrid> grids;
        Rng rng = Rng(31).derive("imgs");
        std::vector<ImageTensor> images;
        for (int i = 0; i < 3; ++i) {
            ImageTensor im(6, 6, 1);
            for (double& v : im.data) v = rng.uniform();
            images.push_back(im);
            grids.push_back(normalize_patches(sample_patches(im, 3, 3, 3, true)));
        }
        ProcedureSpec proc;
        proc.affinity = SelfTuneKind{3};
        proc.solver = SolverKind::dense;
        proc.n_eig = 4;
        SpectralLayerResult res = spectral_layer(grids, {proc}, 7);
        REQUIRE(res.maps.size() == 3);
        CHECK(res.maps[0].rows == 2);
        CHECK(res.maps[0].cols == 2);
        CHECK(res.maps[0].channels == 4);
    }
}

TEST_CASE("spectral_layer implicit kernel path matches the dense path") {
    // force the over-limit branch at a tiny size and compare against the
    // materialized kernel route
    std::vector<int> truth;
    Eigen::MatrixXd X = synthetic::blobs({{0, 0}, {4, 0}}, 14, 0.7, 19, &truth);
    ProcedureSpec st;
    st.affinity = SelfTuneKind{5};
    st.solver = SolverKind::minibatch;
    st.n_eig = 2;
    ProcedureSpec fg;
    fg.affinity = FullKind{1.0};
    fg.solver = SolverKind::minibatch;
    fg.n_eig = 2;

    SpectralLayerOptions dense_opts;
    dense_opts.minibatch_steps = 4000;
    SpectralLayerOptions implicit_opts = dense_opts;
    implicit_opts.dense_limit = 4; // below N = 28

    for (const ProcedureSpec& proc : {st, fg}) {
        SpectralLayerResult dense_run = spectral_layer(as_point_grids(X), {proc}, 77, dense_opts);
        SpectralLayerResult implicit_run = spectral_layer(as_point_grids(X), {proc}, 77, implicit_opts);
        Eigen::MatrixXd A(X.rows(), 2), B(X.rows(), 2);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            for (int ch = 0; ch < 2; ++ch) {
                A(i, ch) = dense_run.maps[i].at(0, 0, ch);
                B(i, ch) = implicit_run.maps[i].at(0, 0, ch);
            }
        }
        CHECK(oracle::principal_angle(A, B) <= 1e-4);
        bool flagged = false;
        for (const std::string& w : implicit_run.procedures[0].warnings) {
            if (w.find("implicit") != std::string::npos) flagged = true;
        }
        CHECK(flagged);
    }
    // non-minibatch solvers cannot run implicitly
    ProcedureSpec bad = st;
    bad.solver = SolverKind::dense;
    CHECK_THROWS_AS(spectral_layer(as_point_grids(X), {bad}, 1, implicit_opts), ParameterError);
}

TEST_CASE("pool") {
    SUBCASE("keeps the signed strongest response: window [[1,-3],[2,0]] -> -3") {
        FeatureMaps m = maps_from({1, -3, 2, 0}, 2, 2, 1);
        FeatureMaps p = pool(m, 2, 2);
        CHECK(p.rows == 1);
        CHECK(p.cols == 1);
        CHECK(p.at(0, 0, 0) == -3.0);
    }
    SUBCASE("s_p = 1, stride 1 is the identity") {
        FeatureMaps m = maps_from({0.5, -0.25, 0.125, 1.0, 0.0, -2.0}, 2, 3, 1);
        FeatureMaps p = pool(m, 1, 1);
        CHECK(p.values == m.values);
    }
    SUBCASE("all-equal magnitudes: the first in row-major order wins") {
        FeatureMaps m = maps_from({1, -1, 1, -1}, 2, 2, 1);
        FeatureMaps p = pool(m, 2, 2);
        CHECK(p.at(0, 0, 0) == 1.0);
    }
    SUBCASE("output dims are ceil(n/s) with zero padding past the border") {
        FeatureMaps m = maps_from({1, 2, 3, 4, 5, 6, 7, 8, 9}, 3, 3, 1);
        FeatureMaps p = pool(m, 2, 2);
        CHECK(p.rows == 2);
        CHECK(p.cols == 2);
        CHECK(p.at(0, 0, 0) == 5.0);
        CHECK(p.at(1, 1, 0) == 9.0); // window covers only the corner
    }
    SUBCASE("overlapped pooling preserves dimensions at stride 1") {
        FeatureMaps m = maps_from({1, 2, 3, 4, 5, 6, 7, 8, 9}, 3, 3, 1);
        FeatureMaps p = pool(m, 2, 1);
        CHECK(p.rows == 3);
        CHECK(p.cols == 3);
        CHECK(p.at(0, 0, 0) == 5.0);
        CHECK(p.at(2, 2, 0) == 9.0);
    }
    SUBCASE("pooling never increases the per-channel max magnitude") {
        Rng rng = Rng(3).derive("pool");
        FeatureMaps m(7, 5, 3);
        for (double& v : m.values) v = rng.gaussian();
        for (int ch = 0; ch < 3; ++ch) m.channel_lineage[ch] = {0, ch, 0.1 * ch};
        FeatureMaps p = pool(m, 3, 2);
        for (int ch = 0; ch < 3; ++ch) {
            double in_max = 0.0, out_max = 0.0;
            for (int r = 0; r < m.rows; ++r)
                for (int c = 0; c < m.cols; ++c) in_max = std::max(in_max, std::abs(m.at(r, c, ch)));
            for (int r = 0; r < p.rows; ++r)
                for (int c = 0; c < p.cols; ++c) out_max = std::max(out_max, std::abs(p.at(r, c, ch)));
            CHECK(out_max <= in_max + 1e-15);
        }
    }
}

TEST_CASE("binarize") {
    FeatureMaps m = maps_from({0.3, -0.2, 0.0}, 1, 3, 1);
    BinaryMaps b = binarize(m);
    CHECK(b.at(0, 0, 0) == 1);
    CHECK(b.at(0, 1, 0) == 0);
    CHECK(b.at(0, 2, 0) == 0); // exact zero maps to 0

    SUBCASE("all-positive maps become all ones") {
        FeatureMaps pos = maps_from({1, 2, 3, 4}, 2, 2, 1);
        BinaryMaps bb = binarize(pos);
        for (std::uint8_t bit : bb.bits) CHECK(bit == 1);
    }
    SUBCASE("binarize of a binarized-as-real map is idempotent") {
        FeatureMaps real(1, 3, 1);
        for (std::size_t i = 0; i < b.bits.size(); ++i) real.values[i] = b.bits[i];
        real.channel_lineage = b.channel_lineage;
        BinaryMaps again = binarize(real);
        CHECK(again.bits == b.bits);
    }
}

TEST_CASE("code") {
    SUBCASE("bit pattern 10110010 with L=8 codes to 178") {
        BinaryMaps b;
        b.rows = b.cols = 1;
        b.channels = 8;
        b.bits = {1, 0, 1, 1, 0, 0, 1, 0};
        b.channel_lineage.resize(8);
        for (int ch = 0; ch < 8; ++ch) b.channel_lineage[ch] = {0, ch, 0.1 * ch}; // already sorted
        FeatureMaps coded = code(b, 8);
        CHECK(coded.channels == 1);
        CHECK(coded.at(0, 0, 0) == 178.0);
    }
    SUBCASE("L=1 is the identity on binary maps") {
        BinaryMaps b;
        b.rows = 1;
        b.cols = 2;
        b.channels = 3;
        b.bits = {1, 0, 1, 0, 1, 0};
        b.channel_lineage = {{0, 0, 0.0}, {0, 1, 0.1}, {0, 2, 0.2}};
        FeatureMaps coded = code(b, 1);
        CHECK(coded.channels == 3);
        for (std::size_t i = 0; i < b.bits.size(); ++i) CHECK(coded.values[i] == b.bits[i]);
    }
    SUBCASE("channel permutations do not change the coding (eigenvalue sort)") {
        Rng rng = Rng(4).derive("code");
        BinaryMaps b;
        b.rows = 2;
        b.cols = 2;
        b.channels = 11;
        b.bits.resize(2 * 2 * 11);
        for (auto& bit : b.bits) bit = rng.uniform() < 0.5 ? 1 : 0;
        b.channel_lineage.resize(11);
        for (int ch = 0; ch < 11; ++ch) b.channel_lineage[ch] = {ch % 3, ch, 0.05 * ch + 0.001};

        BinaryMaps shuffled = b;
        std::vector<int> perm(11);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = 10; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                for (int ch = 0; ch < 11; ++ch)
                    shuffled.bits[(r * 2 + c) * 11 + ch] = b.at(r, c, perm[ch]);
        for (int ch = 0; ch < 11; ++ch) shuffled.channel_lineage[ch] = b.channel_lineage[perm[ch]];

        FeatureMaps c1 = code(b, 4);
        FeatureMaps c2 = code(shuffled, 4);
        CHECK(c1.values == c2.values);
    }
    SUBCASE("values stay in [0, 2^L - 1] and decode back to the sorted bits") {
        Rng rng = Rng(5).derive("code2");
        BinaryMaps b;
        b.rows = 3;
        b.cols = 2;
        b.channels = 10; // 2 groups of 8 -> second group padded
        b.bits.resize(3 * 2 * 10);
        for (auto& bit : b.bits) bit = rng.uniform() < 0.5 ? 1 : 0;
        b.channel_lineage.resize(10);
        for (int ch = 0; ch < 10; ++ch) b.channel_lineage[ch] = {0, ch, 0.1 * ch};

        const int L = 8;
        FeatureMaps coded = code(b, L);
        CHECK(coded.channels == 2);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 2; ++c) {
                for (int g = 0; g < 2; ++g) {
                    const double v = coded.at(r, c, g);
                    CHECK(v >= 0.0);
                    CHECK(v <= 255.0);
                    const int iv = static_cast<int>(v);
                    for (int j = 0; j < L; ++j) {
                        const int src = g * L + j;
                        const int bit = (iv >> (L - 1 - j)) & 1;
                        if (src < 10) {
                            CHECK(bit == b.at(r, c, src)); // lineage already sorted
                        } else {
                            CHECK(bit == 0); // padded low-weight positions
                        }
                    }
                }
            }
        }
    }
}
