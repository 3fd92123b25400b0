#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "pvae/data.hpp"
#include "support/stats.hpp"

using namespace pvae;
using data::BranchingConfig;
using data::Dataset;

TEST_CASE("branching generation: counts for the paper configuration") {
    BranchingConfig cfg;  // depth 6, factor 2, J = 5
    data::BranchingTree tree;
    const Dataset ds = data::generate_branching(cfg, &tree);
    CHECK(tree.parent.size() == 127);  // root + 126
    CHECK(ds.size() == 630);
    CHECK(ds.features.cols() == 50);
}

TEST_CASE("branching generation: zero observation noise copies are identical") {
    BranchingConfig cfg;
    cfg.depth = 3;
    cfg.sigma_obs = 0.0;
    const Dataset ds = data::generate_branching(cfg);
    for (std::size_t i = 0; i < ds.size(); i += cfg.copies) {
        for (int j = 1; j < cfg.copies; ++j) {
            CHECK(ds.node_id[i + j] == ds.node_id[i]);
            for (std::size_t f = 0; f < ds.features.cols(); ++f)
                CHECK(ds.features[(i + j) * ds.features.cols() + f] ==
                      ds.features[i * ds.features.cols() + f]);
        }
    }
}

TEST_CASE("branching generation: observation-to-parent distance statistics") {
    // E||x_ij - y_parent||^2 = n (sigma0^2 + sigma_obs^2), checked on the raw
    // (unnormalised) process via the retained tree latents
    BranchingConfig cfg;
    cfg.depth = 4;
    cfg.copies = 3;
    std::vector<double> sq;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        cfg.seed = seed;
        data::BranchingTree tree;
        Dataset ds = data::generate_branching(cfg, &tree);
        // un-normalise to recover the raw observations
        const std::size_t n = ds.features.cols();
        for (std::size_t i = 0; i < ds.size(); ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < n; ++f) {
                const double raw = ds.features[i * n + f] * ds.scale[f] + ds.shift[f];
                const double parent_latent =
                    tree.latents[ds.parent_id[i] * static_cast<int>(n) + f];
                s += (raw - parent_latent) * (raw - parent_latent);
            }
            sq.push_back(s);
        }
    }
    const double expect =
        cfg.obs_dim * (cfg.sigma0 * cfg.sigma0 + cfg.sigma_obs * cfg.sigma_obs);
    CHECK(std::abs(oracle::mean(sq) - expect) <= 3.0 * oracle::sem(sq));
}

TEST_CASE("tree metadata: ancestors are strictly shallower, root at depth 0") {
    BranchingConfig cfg;
    data::BranchingTree tree;
    data::generate_branching(cfg, &tree);
    CHECK(tree.depth[0] == 0);
    CHECK(tree.parent[0] == -1);
    for (std::size_t i = 1; i < tree.parent.size(); ++i) {
        CHECK(tree.parent[i] >= 0);
        CHECK(tree.depth[tree.parent[i]] == tree.depth[i] - 1);
    }
}

TEST_CASE("normalization: means and variances within 1e-10") {
    BranchingConfig cfg;
    const Dataset ds = data::generate_branching(cfg);
    const std::size_t m = ds.size(), n = ds.features.cols();
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += ds.features[i * n + j];
        mean /= m;
        for (std::size_t i = 0; i < m; ++i) {
            const double dx = ds.features[i * n + j] - mean;
            var += dx * dx;
        }
        var /= m;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-10);
    }
}

TEST_CASE("normalization: constant features map to zeros, standard data unchanged") {
    Dataset ds;
    const double a = 1.4142135623730951;  // population variance of {-a,0,0,a} is 1
    ds.features = Tensor({4, 2}, {3.0, -a,
                                  3.0, 0.0,
                                  3.0, 0.0,
                                  3.0, a});
    ds.node_id.assign(4, 0);
    ds.parent_id.assign(4, -1);
    ds.depth.assign(4, 0);
    ds.train_mask.assign(4, 1);
    data::normalize(ds);
    for (int i = 0; i < 4; ++i) {
        CHECK(ds.features[i * 2] == 0.0);  // constant column, no NaN
        CHECK(std::isfinite(ds.features[i * 2 + 1]));
    }
    // second column was already standard: unchanged within 1e-12
    CHECK(ds.features[1 * 2 + 1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ds.features[3 * 2 + 1] == doctest::Approx(a).epsilon(1e-12));
}

TEST_CASE("split: masks partition, train fraction within one observation") {
    BranchingConfig cfg;
    const Dataset ds = data::generate_branching(cfg);
    const std::size_t n_train = ds.split_indices(true).size();
    const std::size_t n_test = ds.split_indices(false).size();
    CHECK(n_train + n_test == ds.size());
    CHECK(std::abs(static_cast<double>(n_train) - 0.7 * ds.size()) <= 1.0);
}

TEST_CASE("generation is deterministic under the seed") {
    BranchingConfig cfg;
    const Dataset a = data::generate_branching(cfg);
    const Dataset b = data::generate_branching(cfg);
    cfg.seed = 2;
    const Dataset c = data::generate_branching(cfg);
    CHECK(a.features.vec() == b.features.vec());
    CHECK(a.train_mask == b.train_mask);
    CHECK(a.features.vec() != c.features.vec());
}

TEST_CASE("csv round trip preserves the dataset") {
    BranchingConfig cfg;
    cfg.depth = 3;
    const Dataset ds = data::generate_branching(cfg);
    const std::string path = "test_data_roundtrip.csv";
    data::write_csv(path, ds);
    const Dataset back = data::read_csv(path);
    CHECK(back.size() == ds.size());
    CHECK(back.node_id == ds.node_id);
    CHECK(back.parent_id == ds.parent_id);
    CHECK(back.depth == ds.depth);
    CHECK(back.train_mask == ds.train_mask);
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        CHECK(back.features[i] == ds.features[i]);
    std::remove(path.c_str());
}

namespace {

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("idx reader: crafted fixture parses bit-exactly") {
    // two 2x2 images with known bytes
    const std::vector<unsigned char> img = {
        0x00, 0x00, 0x08, 0x03,              // magic: ubyte, 3 dims
        0x00, 0x00, 0x00, 0x02,              // 2 images
        0x00, 0x00, 0x00, 0x02,              // 2 rows
        0x00, 0x00, 0x00, 0x02,              // 2 cols
        0, 51, 102, 255, 10, 20, 30, 40};
    const std::vector<unsigned char> lab = {
        0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3};
    write_bytes("fix_images.idx", img);
    write_bytes("fix_labels.idx", lab);

    const Tensor t = data::read_idx("fix_images.idx");
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 4);
    CHECK(t[0] == 0.0);
    CHECK(t[1] == doctest::Approx(51.0 / 255.0).epsilon(1e-15));
    CHECK(t[2] == doctest::Approx(102.0 / 255.0).epsilon(1e-15));
    CHECK(t[3] == 1.0);
    CHECK(t[4] == doctest::Approx(10.0 / 255.0).epsilon(1e-15));

    const Dataset ds = data::read_idx_dataset("fix_images.idx", "fix_labels.idx", 0);
    CHECK(ds.size() == 2);
    CHECK(ds.labels[0] == 7);
    CHECK(ds.labels[1] == 3);
    const Dataset one = data::read_idx_dataset("fix_images.idx", "fix_labels.idx", 1);
    CHECK(one.size() == 1);

    std::remove("fix_images.idx");
    std::remove("fix_labels.idx");
}

TEST_CASE("idx reader: distinct errors for magic, truncation and dimensions") {
    write_bytes("bad_magic.idx", {0x00, 0x00, 0x09, 0x03, 0, 0, 0, 1});
    CHECK_THROWS_AS(data::read_idx("bad_magic.idx"), data::idx_magic_error);
    std::remove("bad_magic.idx");

    write_bytes("trunc.idx", {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x05, 1, 2});
    try {
        data::read_idx("trunc.idx");
        FAIL("expected idx_truncated_error");
    } catch (const data::idx_truncated_error& e) {
        CHECK(std::string(e.what()).find("expected 5") != std::string::npos);
    }
    std::remove("trunc.idx");

    write_bytes("huge.idx", {0x00, 0x00, 0x08, 0x03, 0x7f, 0xff, 0xff, 0xff, 0x7f,
                             0xff, 0xff, 0xff, 0x00, 0x00, 0x00, 0x01});
    CHECK_THROWS_AS(data::read_idx("huge.idx"), data::idx_dimension_error);
    std::remove("huge.idx");
}
