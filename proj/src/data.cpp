#include "pvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace pvae::data {

Tensor Dataset::split(bool train) const {
    const auto idx = split_indices(train);
    const std::size_t n = features.cols();
    Tensor out({idx.size(), n});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = features[idx[i] * n + j];
    return out;
}

std::vector<std::size_t> Dataset::split_indices(bool train) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i)
        if ((train_mask[i] != 0) == train) idx.push_back(i);
    return idx;
}

Dataset generate_branching(const BranchingConfig& cfg, BranchingTree* tree_out) {
    if (cfg.depth < 1 || cfg.factor < 1 || cfg.copies < 1 || cfg.obs_dim < 1)
        throw std::invalid_argument("generate_branching: bad configuration");
    RngState rng(cfg.seed);
    const int n = cfg.obs_dim;

    // Nodes level by level; root is index 0 at the origin and contributes no
    // observations.
    BranchingTree tree;
    tree.parent.push_back(-1);
    tree.depth.push_back(0);
    std::vector<std::vector<double>> latents;
    latents.emplace_back(n, 0.0);
    std::vector<int> frontier{0};
    for (int level = 1; level <= cfg.depth; ++level) {
        std::vector<int> next;
        for (int p : frontier) {
            for (int b = 0; b < cfg.factor; ++b) {
                std::vector<double> y(n);
                for (int j = 0; j < n; ++j)
                    y[j] = latents[p][j] + cfg.sigma0 * rng.normal();
                tree.parent.push_back(p);
                tree.depth.push_back(level);
                latents.push_back(std::move(y));
                next.push_back(static_cast<int>(latents.size()) - 1);
            }
        }
        frontier = std::move(next);
    }

    const std::size_t num_nodes = latents.size();
    const std::size_t num_obs = (num_nodes - 1) * cfg.copies;
    Dataset ds;
    ds.features = Tensor({num_obs, static_cast<std::size_t>(n)});
    ds.node_id.reserve(num_obs);
    std::size_t row = 0;
    for (std::size_t i = 1; i < num_nodes; ++i) {
        for (int j = 0; j < cfg.copies; ++j) {
            for (int f = 0; f < n; ++f)
                ds.features[row * n + f] = latents[i][f] + cfg.sigma_obs * rng.normal();
            ds.node_id.push_back(static_cast<int>(i));
            ds.parent_id.push_back(tree.parent[i]);
            ds.depth.push_back(tree.depth[i]);
            ++row;
        }
    }

    normalize(ds);

    // Random split by observation.
    std::vector<std::size_t> perm(num_obs);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = num_obs; i > 1; --i) {
        const std::size_t j = std::min(static_cast<std::size_t>(rng.uniform() * i), i - 1);
        std::swap(perm[i - 1], perm[j]);
    }
    const std::size_t n_train =
        static_cast<std::size_t>(std::lround(cfg.train_fraction * num_obs));
    ds.train_mask.assign(num_obs, 0);
    for (std::size_t i = 0; i < n_train; ++i) ds.train_mask[perm[i]] = 1;

    if (tree_out) {
        tree_out->parent = tree.parent;
        tree_out->depth = tree.depth;
        tree_out->latents = Tensor({num_nodes, static_cast<std::size_t>(n)});
        for (std::size_t i = 0; i < num_nodes; ++i)
            for (int f = 0; f < n; ++f) tree_out->latents[i * n + f] = latents[i][f];
    }
    return ds;
}

void normalize(Dataset& ds) {
    const std::size_t m = ds.features.rows(), n = ds.features.cols();
    ds.shift.assign(n, 0.0);
    ds.scale.assign(n, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += ds.features[i * n + j];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double dx = ds.features[i * n + j] - mean;
            var += dx * dx;
        }
        var /= static_cast<double>(m);
        const double sd = std::sqrt(std::max(var, 1e-12));
        ds.shift[j] = mean;
        ds.scale[j] = sd;
        for (std::size_t i = 0; i < m; ++i)
            ds.features[i * n + j] = (ds.features[i * n + j] - mean) / sd;
    }
}

namespace {

std::uint32_t read_be32(std::istream& f, const std::string& path) {
    unsigned char buf[4];
    f.read(reinterpret_cast<char*>(buf), 4);
    if (!f) throw idx_truncated_error("idx: truncated header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Tensor read_idx(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw idx_error("idx: cannot open " + path);
    const std::uint32_t magic = read_be32(f, path);
    if (magic != 0x00000803u && magic != 0x00000801u) {
        std::ostringstream os;
        os << "idx: magic mismatch in " << path << " (got 0x" << std::hex << magic
           << ", want 0x803 images or 0x801 labels)";
        throw idx_magic_error(os.str());
    }
    const int ndim = magic & 0xff;
    std::uint64_t total = 1;
    std::vector<std::uint32_t> dims(ndim);
    for (int i = 0; i < ndim; ++i) {
        dims[i] = read_be32(f, path);
        total *= dims[i];
        if (total > (1ull << 31)) {
            throw idx_dimension_error("idx: dimension overflow in " + path);
        }
    }
    std::vector<unsigned char> raw(total);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
    if (static_cast<std::uint64_t>(f.gcount()) != total) {
        std::ostringstream os;
        os << "idx: truncated payload in " << path << " (expected " << total
           << " bytes, got " << f.gcount() << ")";
        throw idx_truncated_error(os.str());
    }

    if (magic == 0x00000801u) {
        Tensor out({dims[0], 1});
        for (std::uint32_t i = 0; i < dims[0]; ++i) out[i] = raw[i];
        return out;
    }
    std::uint64_t item = total / dims[0];
    Tensor out({dims[0], item});
    for (std::uint64_t i = 0; i < total; ++i) out[i] = raw[i] / 255.0;
    return out;
}

Dataset read_idx_dataset(const std::string& images_path, const std::string& labels_path,
                         int count) {
    Tensor images = read_idx(images_path);
    Tensor labels = read_idx(labels_path);
    if (images.rows() != labels.rows())
        throw idx_error("idx: image/label counts disagree");
    std::size_t keep = images.rows();
    if (count > 0) keep = std::min<std::size_t>(keep, count);
    const std::size_t n = images.cols();
    Dataset ds;
    ds.features = Tensor({keep, n});
    std::memcpy(ds.features.data(), images.data(), keep * n * sizeof(double));
    ds.labels.resize(keep);
    for (std::size_t i = 0; i < keep; ++i) ds.labels[i] = static_cast<int>(labels[i]);
    ds.node_id.assign(keep, -1);
    ds.parent_id.assign(keep, -1);
    ds.depth.assign(keep, -1);
    ds.train_mask.assign(keep, 1);
    return ds;
}

void write_csv(const std::string& path, const Dataset& ds) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const std::size_t n = ds.features.cols();
    for (std::size_t j = 0; j < n; ++j) f << 'f' << j << ',';
    f << "node_id,parent_id,depth,split\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features[i * n + j]);
            f << buf << ',';
        }
        f << ds.node_id[i] << ',' << ds.parent_id[i] << ',' << ds.depth[i] << ','
          << (ds.train_mask[i] ? "train" : "test") << '\n';
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

Dataset read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    std::size_t n = 0;
    {
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> header;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
        if (header.size() < 5 || header[header.size() - 4] != "node_id")
            throw std::runtime_error("unexpected csv header in " + path);
        n = header.size() - 4;
    }
    std::vector<double> values;
    Dataset ds;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t j = 0; j < n; ++j) {
            std::getline(ss, cell, ',');
            values.push_back(std::stod(cell));
        }
        std::getline(ss, cell, ',');
        ds.node_id.push_back(std::stoi(cell));
        std::getline(ss, cell, ',');
        ds.parent_id.push_back(std::stoi(cell));
        std::getline(ss, cell, ',');
        ds.depth.push_back(std::stoi(cell));
        std::getline(ss, cell, ',');
        ds.train_mask.push_back(cell == "train" ? 1 : 0);
    }
    const std::size_t m = ds.node_id.size();
    ds.features = Tensor({m, n}, std::move(values));
    return ds;
}

}  // namespace pvae::data
