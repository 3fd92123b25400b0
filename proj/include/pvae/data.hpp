#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvae/rng.hpp"
#include "pvae/tensor.hpp"

namespace pvae::data {

struct BranchingConfig {
    int depth = 6;
    int factor = 2;
    int obs_dim = 50;
    int copies = 5;          // J noisy observations per node
    double sigma0 = 1.0;     // node diffusion
    double sigma_obs = 1.0 / std::sqrt(5.0);  // observation noise, sigma0^2/5
    double train_fraction = 0.7;
    std::uint64_t seed = 1;
};

struct Dataset {
    Tensor features;               // {N_obs, n}
    std::vector<int> node_id;      // per observation
    std::vector<int> parent_id;    // node's ancestor (-1 for depth-1 nodes' root)
    std::vector<int> depth;        // node depth (root = 0)
    std::vector<std::uint8_t> train_mask;  // 1 = train
    std::vector<int> labels;       // optional (images); empty otherwise

    // normalisation transform (per feature): x' = (x - shift) / scale
    std::vector<double> shift, scale;

    std::size_t size() const { return features.rows(); }
    Tensor split(bool train) const;
    std::vector<std::size_t> split_indices(bool train) const;
};

// Full node latents of one generated tree (kept for oracles and plots).
struct BranchingTree {
    std::vector<int> parent;       // per node; -1 for root
    std::vector<int> depth;        // per node
    Tensor latents;                // {num_nodes, n}, row 0 = root = 0
};

// Branching diffusion process: root 0, each child N(parent, sigma0^2 I),
// J noisy copies per non-root node. The returned dataset is centred and
// scaled to unit variance and randomly split by observation.
Dataset generate_branching(const BranchingConfig& cfg, BranchingTree* tree = nullptr);

// Per-feature standardisation over all observations; zero-variance features
// are clamped at 1e-12 before dividing. Stores the transform in the dataset.
void normalize(Dataset& ds);

// --- IDX ingestion -------------------------------------------------------
struct idx_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct idx_magic_error : idx_error { using idx_error::idx_error; };
struct idx_truncated_error : idx_error { using idx_error::idx_error; };
struct idx_dimension_error : idx_error { using idx_error::idx_error; };

// Parses an IDX unsigned-byte tensor file (big-endian header). Image files
// (magic 0x00000803) load as {count, rows*cols} scaled to [0,1]; label files
// (magic 0x00000801) as {count, 1} raw values.
Tensor read_idx(const std::string& path);

// Loads an MNIST-style pair of image/label files, keeping the first `count`
// items (count <= 0 keeps everything).
Dataset read_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         int count);

// --- CSV round trip ------------------------------------------------------
void write_csv(const std::string& path, const Dataset& ds);
Dataset read_csv(const std::string& path);

}  // namespace pvae::data
