// Command-line frontend: dataset generation, training, evaluation, sampling,
// embedding export and plot emission for the Poincare-ball VAE toolkit.
//
// Exit codes: 0 success, 1 usage/IO/config errors, 2 numerical instability.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvae/data.hpp"
#include "pvae/errors.hpp"
#include "pvae/hypdist.hpp"
#include "pvae/nets.hpp"
#include "pvae/radsample.hpp"
#include "pvae/svg.hpp"
#include "pvae/vae.hpp"
#include "pvae/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pvae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitUnstable = 2;

json default_config() {
    return json{
        {"model",
         {{"curvature", 0.0},
          {"latent_dim", 2},
          {"family", "wrapped"},
          {"prior_sigma", 1.0},
          {"likelihood", "gaussian"},
          {"decoder", "gyroplane"},
          {"hidden", json::array({200})},
          {"sigma_per_dim", false},
          {"k_train", 1},
          {"k_eval", 500},
          {"adam", {{"lr", 1e-3}, {"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}}},
          {"batch_size", 64},
          {"epochs", 1000}}},
        {"data",
         {{"kind", "branching"},
          {"branching",
           {{"depth", 6},
            {"factor", 2},
            {"obs_dim", 50},
            {"copies", 5},
            {"sigma0", 1.0},
            {"sigma_obs", 1.0 / std::sqrt(5.0)},
            {"train_fraction", 0.7}}},
          {"mnist", {{"dir", ""}, {"train_count", 10000}, {"test_count", 2000}}}}},
        {"output_dir", "."},
        {"seed", 1}};
}

void check_known_keys(const json& cfg, const json& schema, const std::string& prefix) {
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!schema.contains(it.key()))
            throw std::runtime_error("unknown key \"" + path + "\" in config");
        if (it->is_object() && schema.at(it.key()).is_object())
            check_known_keys(*it, schema.at(it.key()), path);
    }
}

json merge_config(const json& base, const json& overlay) {
    json out = base;
    for (auto it = overlay.begin(); it != overlay.end(); ++it) {
        if (it->is_object() && out.contains(it.key()) && out[it.key()].is_object())
            out[it.key()] = merge_config(out[it.key()], *it);
        else
            out[it.key()] = *it;
    }
    return out;
}

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    json user;
    try {
        user = json::parse(f);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    const json defaults = default_config();
    check_known_keys(user, defaults, "");
    return merge_config(defaults, user);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(const std::string& s) {
    std::ostringstream os;
    os << std::hex << fnv1a(s);
    return os.str();
}

void write_provenance(const fs::path& path, const std::string& command,
                      const json& effective_config, std::uint64_t seed) {
    json p;
    p["command"] = command;
    p["config_hash"] = hash_hex(effective_config.dump());
    p["seed"] = seed;
    p["toolkit_version"] = kVersion;
    std::ofstream f(path);
    f << p.dump(2) << "\n";
}

net::ModelSpec model_spec_from(const json& cfg, int input_dim) {
    const json& m = cfg.at("model");
    net::ModelSpec spec;
    spec.input_dim = input_dim;
    spec.latent_dim = m.at("latent_dim").get<int>();
    spec.hidden = m.at("hidden").get<std::vector<int>>();
    spec.curvature = m.at("curvature").get<double>();
    const std::string fam = m.at("family").get<std::string>();
    if (fam != "wrapped" && fam != "riemannian")
        throw std::runtime_error("config: family must be wrapped or riemannian");
    spec.family = fam == "wrapped" ? Family::wrapped : Family::riemannian;
    spec.prior_sigma = m.at("prior_sigma").get<double>();
    const std::string lik = m.at("likelihood").get<std::string>();
    if (lik != "gaussian" && lik != "bernoulli")
        throw std::runtime_error("config: likelihood must be gaussian or bernoulli");
    spec.likelihood = lik == "gaussian" ? net::Likelihood::gaussian_unit
                                        : net::Likelihood::bernoulli;
    const std::string dec = m.at("decoder").get<std::string>();
    if (dec == "gyroplane") spec.decoder = net::DecoderVariant::gyroplane;
    else if (dec == "log0_mlp") spec.decoder = net::DecoderVariant::log0_mlp;
    else if (dec == "plain_mlp") spec.decoder = net::DecoderVariant::plain_mlp;
    else throw std::runtime_error("config: unknown decoder variant " + dec);
    spec.sigma_per_dim = m.at("sigma_per_dim").get<bool>();
    return spec;
}

data::BranchingConfig branching_from(const json& cfg, std::uint64_t seed) {
    const json& b = cfg.at("data").at("branching");
    data::BranchingConfig bc;
    bc.depth = b.at("depth").get<int>();
    bc.factor = b.at("factor").get<int>();
    bc.obs_dim = b.at("obs_dim").get<int>();
    bc.copies = b.at("copies").get<int>();
    bc.sigma0 = b.at("sigma0").get<double>();
    bc.sigma_obs = b.at("sigma_obs").get<double>();
    bc.train_fraction = b.at("train_fraction").get<double>();
    bc.seed = seed;
    return bc;
}

struct LoadedData {
    data::Dataset dataset;
    Tensor train_x, test_x;
};

LoadedData load_training_data(const json& cfg, const std::string& data_path) {
    LoadedData out;
    const std::string kind = cfg.at("data").at("kind").get<std::string>();
    if (kind == "mnist") {
        const json& m = cfg.at("data").at("mnist");
        const fs::path dir = m.at("dir").get<std::string>();
        if (dir.empty()) throw std::runtime_error("config: data.mnist.dir not set");
        data::Dataset tr = data::read_idx_dataset(
            (dir / "train-images-idx3-ubyte").string(),
            (dir / "train-labels-idx1-ubyte").string(), m.at("train_count").get<int>());
        data::Dataset te = data::read_idx_dataset(
            (dir / "t10k-images-idx3-ubyte").string(),
            (dir / "t10k-labels-idx1-ubyte").string(), m.at("test_count").get<int>());
        out.train_x = tr.features;
        out.test_x = te.features;
        out.dataset = std::move(tr);
        return out;
    }
    if (kind != "branching" && kind != "csv")
        throw std::runtime_error("config: data.kind must be branching, csv or mnist");
    if (data_path.empty())
        throw std::runtime_error("--data is required for csv/branching datasets");
    out.dataset = data::read_csv(data_path);
    out.train_x = out.dataset.split(true);
    out.test_x = out.dataset.split(false);
    return out;
}

int cmd_synth_gen(const std::string& config_path, const std::string& out_path,
                  std::int64_t seed_override) {
    const json cfg = load_config(config_path);
    const std::uint64_t seed = seed_override >= 0 ? seed_override
                                                  : cfg.at("seed").get<std::uint64_t>();
    const data::BranchingConfig bc = branching_from(cfg, seed);
    const data::Dataset ds = data::generate_branching(bc);
    data::write_csv(out_path, ds);
    write_provenance(out_path + ".provenance.json", "synth-gen", cfg, seed);
    std::cout << "wrote " << ds.size() << " observations to " << out_path << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, const std::string& resume_path,
              std::int64_t seed_override, int workers) {
    const json cfg = load_config(config_path);
    const std::uint64_t seed = seed_override >= 0 ? seed_override
                                                  : cfg.at("seed").get<std::uint64_t>();
    LoadedData data = load_training_data(cfg, data_path);
    const net::ModelSpec spec = model_spec_from(cfg, static_cast<int>(data.train_x.cols()));

    RngState init_rng(seed);
    net::Model model(spec, init_rng);
    if (!resume_path.empty()) {
        net::Model loaded = net::load_checkpoint(resume_path);
        if (net::arch_hash(loaded.spec()) != net::arch_hash(spec))
            throw std::runtime_error("resume: architecture hash mismatch vs config");
        model = std::move(loaded);
    } else if (spec.likelihood == net::Likelihood::bernoulli) {
        // init decoder output bias so the initial mean equals the pixel mean
        std::vector<double> bias(data.train_x.cols());
        for (std::size_t j = 0; j < data.train_x.cols(); ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < data.train_x.rows(); ++i)
                m += data.train_x[i * data.train_x.cols() + j];
            m = std::clamp(m / data.train_x.rows(), 1e-4, 1.0 - 1e-4);
            bias[j] = std::log(m / (1.0 - m));
        }
        model.set_output_bias(bias);
    }

    fs::create_directories(out_dir);
    vae::TrainConfig tc;
    const json& m = cfg.at("model");
    tc.epochs = m.at("epochs").get<int>();
    tc.batch_size = m.at("batch_size").get<int>();
    tc.k_train = m.at("k_train").get<int>();
    tc.k_eval = m.at("k_eval").get<int>();
    tc.adam.lr = m.at("adam").at("lr").get<double>();
    tc.adam.beta1 = m.at("adam").at("beta1").get<double>();
    tc.adam.beta2 = m.at("adam").at("beta2").get<double>();
    tc.adam.eps = m.at("adam").at("eps").get<double>();
    tc.seed = seed;
    tc.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
    tc.eval_workers = workers;

    const vae::TrainReport report = vae::train(model, data.train_x, data.test_x, tc);
    net::save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), model);
    {
        std::ofstream f(fs::path(out_dir) / "report.json");
        f << report.to_json() << "\n";
    }
    write_provenance(fs::path(out_dir) / "provenance.json", "train", cfg, seed);
    if (report.unstable) {
        std::cerr << "training unstable: " << report.instability_note << "\n";
        return kExitUnstable;
    }
    std::cout << "test -L_IWAE = " << report.test_neg_iwae << " +- "
              << report.test_neg_iwae_se << " (K=" << tc.k_eval << ")\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, int k,
             const std::string& split, std::uint64_t seed, int workers) {
    if (!fs::exists(ckpt_path)) {
        std::cerr << "checkpoint not found: " << ckpt_path << "\n";
        return kExitUsage;
    }
    net::Model model = net::load_checkpoint(ckpt_path);
    const data::Dataset ds = data::read_csv(data_path);
    std::vector<std::pair<std::string, Tensor>> splits;
    if (split == "all" || split == "train") splits.emplace_back("train", ds.split(true));
    if (split == "all" || split == "test") splits.emplace_back("test", ds.split(false));
    if (splits.empty()) {
        std::cerr << "unknown split: " << split << "\n";
        return kExitUsage;
    }
    for (const auto& [name, x] : splits) {
        if (x.rows() == 0) {
            std::cout << name << ": empty split\n";
            continue;
        }
        RngState rng(seed);
        const auto vals = vae::iwae(model, x, k, rng, workers);
        std::vector<double> neg(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) neg[i] = -vals[i];
        std::cout << name << " -L_IWAE = " << vae::mean_of(neg) << " +- "
                  << vae::se_of(neg) << " (K=" << k << ", n=" << neg.size() << ")\n";
    }
    return kExitOk;
}

int cmd_embed(const std::string& ckpt_path, const std::string& data_path,
              const std::string& out_path) {
    net::Model model = net::load_checkpoint(ckpt_path);
    const data::Dataset ds = data::read_csv(data_path);
    ad::NoGradGuard no_grad;
    const ad::Var x = ad::Var::constant(ds.features);
    const net::EncoderOut enc = model.encode(x);
    const int d = model.spec().latent_dim;
    const int sdims = model.spec().sigma_dims();

    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot open for writing: " + out_path);
    f << "node_id,parent_id,depth,split,curvature";
    for (int j = 0; j < d; ++j) f << ",mu_" << j;
    for (int j = 0; j < sdims; ++j) f << ",sigma_" << j;
    f << "\n";
    char buf[32];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        f << ds.node_id[i] << ',' << ds.parent_id[i] << ',' << ds.depth[i] << ','
          << (ds.train_mask[i] ? "train" : "test") << ',' << model.spec().curvature;
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", enc.mu.val()[i * d + j]);
            f << ',' << buf;
        }
        for (int j = 0; j < sdims; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", enc.sigma.val()[i * sdims + j]);
            f << ',' << buf;
        }
        f << "\n";
    }
    std::cout << "wrote " << ds.size() << " embeddings to " << out_path << "\n";
    return kExitOk;
}

int cmd_plot(const std::string& emb_path, const std::string& out_path) {
    std::ifstream f(emb_path);
    if (!f) throw std::runtime_error("cannot open: " + emb_path);
    std::string line;
    std::getline(f, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    int d = 0;
    for (const auto& h : header)
        if (h.rfind("mu_", 0) == 0) ++d;
    if (d != 2) {
        std::cerr << "plot: requires 2-D embeddings, got d = " << d
                  << " (use embed output directly for higher dimensions)\n";
        return kExitUsage;
    }
    std::vector<svg::ScatterPoint> points;
    std::map<int, std::pair<std::vector<double>, int>> node_accum;  // sums + count
    std::map<int, int> node_parent;
    double curvature = 0.0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        const int node = std::stoi(cells[0]);
        const int parent = std::stoi(cells[1]);
        const int depth = std::stoi(cells[2]);
        curvature = std::stod(cells[4]);
        const double mx = std::stod(cells[5]);
        const double my = std::stod(cells[6]);
        points.push_back({mx, my, depth});
        auto& acc = node_accum[node];
        if (acc.first.empty()) acc.first.assign(2, 0.0);
        acc.first[0] += mx;
        acc.first[1] += my;
        acc.second += 1;
        node_parent[node] = parent;
    }
    std::map<int, std::pair<double, double>> centroid;
    centroid[0] = {0.0, 0.0};  // root
    for (const auto& [node, acc] : node_accum)
        centroid[node] = {acc.first[0] / acc.second, acc.first[1] / acc.second};
    std::vector<svg::Segment> edges;
    for (const auto& [node, parent] : node_parent) {
        const auto pit = centroid.find(parent);
        if (pit == centroid.end()) continue;
        const auto& a = centroid[node];
        edges.push_back({a.first, a.second, pit->second.first, pit->second.second});
    }
    const double radius = curvature > 0.0 ? 1.0 / std::sqrt(curvature) : 0.0;
    svg::write_scatter(out_path, points, edges, radius);
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

int cmd_sample(const std::string& params_path, int n, const std::string& family,
               const std::string& method, const std::string& out_path,
               const std::string& heatmap_path, std::uint64_t seed) {
    std::ifstream pf(params_path);
    if (!pf) throw std::runtime_error("cannot open params: " + params_path);
    json pj;
    try {
        pj = json::parse(pf);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("params parse error: ") + e.what());
    }
    const double c = pj.at("c").get<double>();
    const int d = pj.at("d").get<int>();
    std::vector<double> mu_coords = pj.value("mu", std::vector<double>(d, 0.0));
    const double sigma = pj.at("sigma").get<double>();
    if (static_cast<int>(mu_coords.size()) != d)
        throw std::runtime_error("params: mu length does not match d");

    const Family fam = family == "riemannian" ? Family::riemannian : Family::wrapped;
    RadiusMethod rm = RadiusMethod::ars;
    if (method == "truncnorm") rm = RadiusMethod::truncnorm;
    else if (method == "gamma") rm = RadiusMethod::gamma;
    else if (method != "ars") throw std::runtime_error("unknown --method: " + method);

    const BallPoint mu(mu_coords, Curvature(c));
    const HypNormalParams params(mu, sigma, fam);
    RngState rng(seed);

    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot open for writing: " + out_path);
    for (int j = 0; j < d; ++j) f << (j ? "," : "") << 'x' << j;
    f << "\n";
    char buf[32];
    for (int i = 0; i < n; ++i) {
        const BallPoint z = sample_hyp_normal(params, rng, rm);
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", z.coords()[j]);
            f << (j ? "," : "") << buf;
        }
        f << "\n";
    }
    std::cout << "wrote " << n << " samples to " << out_path << "\n";

    if (!heatmap_path.empty()) {
        if (d != 2) {
            std::cerr << "heatmap: requires d = 2\n";
            return kExitUsage;
        }
        auto pdf = [&](double x, double y) {
            const BallPoint z({x, y}, Curvature(c));
            const double lp = fam == Family::riemannian ? riemannian_log_pdf(params, z)
                                                        : wrapped_log_pdf(params, z);
            return std::exp(lp);
        };
        const double mass =
            svg::write_heatmap(heatmap_path, pdf, c, 12.0 * sigma, 200);
        std::cout << "heatmap grid mass = " << mass << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Poincare-ball VAE toolkit"};
    app.require_subcommand(0, 1);
    bool dump_defaults = false;
    app.add_flag("--dump-defaults", dump_defaults, "print the default config JSON");

    std::string config_path, data_path, out_path, ckpt_path, emb_path, params_path;
    std::string resume_path, split = "test", family = "wrapped", method = "ars";
    std::string heatmap_path;
    std::int64_t seed_override = -1;
    std::uint64_t seed = 1;
    int k = 500, n = 100, workers = 1;

    CLI::App* synth = app.add_subcommand("synth-gen", "generate the branching dataset");
    synth->add_option("--config", config_path)->required();
    synth->add_option("--out", out_path)->required();
    synth->add_option("--seed", seed_override);

    CLI::App* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path)->required();
    train->add_option("--data", data_path);
    train->add_option("--out", out_path)->required();
    train->add_option("--resume", resume_path);
    train->add_option("--seed", seed_override);
    train->add_option("--workers", workers);

    CLI::App* eval = app.add_subcommand("eval", "evaluate -L_IWAE of a checkpoint");
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--K", k);
    eval->add_option("--split", split);
    eval->add_option("--seed", seed);
    eval->add_option("--workers", workers);

    CLI::App* embed = app.add_subcommand("embed", "export posterior embeddings");
    embed->add_option("--checkpoint", ckpt_path)->required();
    embed->add_option("--data", data_path)->required();
    embed->add_option("--out", out_path)->required();

    CLI::App* plot = app.add_subcommand("plot", "render 2-D embeddings as SVG");
    plot->add_option("--embeddings", emb_path)->required();
    plot->add_option("--out", out_path)->required();

    CLI::App* sample = app.add_subcommand("sample", "draw hyperbolic normal samples");
    sample->add_option("--params", params_path)->required();
    sample->add_option("--n", n);
    sample->add_option("--family", family);
    sample->add_option("--method", method);
    sample->add_option("--out", out_path)->required();
    sample->add_option("--heatmap", heatmap_path);
    sample->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (dump_defaults) {
            std::cout << default_config().dump(2) << "\n";
            return kExitOk;
        }
        if (synth->parsed()) return cmd_synth_gen(config_path, out_path, seed_override);
        if (train->parsed())
            return cmd_train(config_path, data_path, out_path, resume_path,
                             seed_override, workers);
        if (eval->parsed())
            return cmd_eval(ckpt_path, data_path, k, split, seed, workers);
        if (embed->parsed()) return cmd_embed(ckpt_path, data_path, out_path);
        if (plot->parsed()) return cmd_plot(emb_path, out_path);
        if (sample->parsed())
            return cmd_sample(params_path, n, family, method, out_path, heatmap_path,
                              seed);
        std::cout << app.help();
        return kExitOk;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitUnstable;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
