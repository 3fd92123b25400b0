#include "pvae/nets.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pvae/graphgeo.hpp"

namespace pvae::net {

using nlohmann::json;

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, RngState& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t({fan_in, fan_out});
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = bound * (2.0 * rng.uniform() - 1.0);
    return t;
}

Linear make_linear(std::size_t in, std::size_t out, RngState& rng) {
    return {Var::leaf(glorot(in, out, rng)), Var::leaf(Tensor({out}))};
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

const char* variant_name(DecoderVariant v) {
    switch (v) {
        case DecoderVariant::gyroplane: return "gyroplane";
        case DecoderVariant::log0_mlp: return "log0_mlp";
        case DecoderVariant::plain_mlp: return "plain_mlp";
    }
    return "?";
}

const char* likelihood_name(Likelihood l) {
    return l == Likelihood::gaussian_unit ? "gaussian_unit" : "bernoulli";
}

const char* family_name(Family f) {
    return f == Family::wrapped ? "wrapped" : "riemannian";
}

DecoderVariant variant_from(const std::string& s) {
    if (s == "gyroplane") return DecoderVariant::gyroplane;
    if (s == "log0_mlp") return DecoderVariant::log0_mlp;
    if (s == "plain_mlp") return DecoderVariant::plain_mlp;
    throw std::invalid_argument("unknown decoder variant: " + s);
}

}  // namespace

std::string arch_hash(const ModelSpec& spec) {
    std::ostringstream os;
    os << spec.input_dim << '|' << spec.latent_dim << '|';
    for (int h : spec.hidden) os << h << ',';
    os << '|' << variant_name(spec.decoder) << '|' << likelihood_name(spec.likelihood)
       << '|' << spec.sigma_dims();
    std::ostringstream hex;
    hex << std::hex << fnv1a(os.str());
    return hex.str();
}

Model::Model(const ModelSpec& spec, RngState& rng) : spec_(spec) {
    if (spec.input_dim < 1 || spec.latent_dim < 1)
        throw std::invalid_argument("Model: dimensions must be positive");
    for (int h : spec.hidden)
        if (h < 1) throw std::invalid_argument("Model: hidden widths must be positive");
    if (spec.sigma_per_dim && spec.family != Family::wrapped)
        throw std::invalid_argument("Model: per-dimension sigma needs the wrapped family");

    const std::size_t d = spec.latent_dim;
    std::size_t in = spec.input_dim;
    int idx = 0;
    for (int h : spec.hidden) {
        enc_.trunk.push_back(make_linear(in, h, rng));
        params_.push_back({"enc.trunk" + std::to_string(idx) + ".w", enc_.trunk.back().w});
        params_.push_back({"enc.trunk" + std::to_string(idx) + ".b", enc_.trunk.back().b});
        in = h;
        ++idx;
    }
    enc_.head = make_linear(in, d + spec.sigma_dims(), rng);
    params_.push_back({"enc.head.w", enc_.head.w});
    params_.push_back({"enc.head.b", enc_.head.b});

    dec_.variant = spec.decoder;
    dec_.has_hidden = !spec.hidden.empty();
    const std::size_t first_out = dec_.has_hidden ? spec.hidden.front() : spec.input_dim;
    if (spec.decoder == DecoderVariant::gyroplane) {
        // orientations as rows {H, d}, same fan-based scheme as FC weights
        Tensor a({first_out, d});
        const double bound = std::sqrt(6.0 / static_cast<double>(d + first_out));
        for (std::size_t i = 0; i < a.size(); ++i)
            a[i] = bound * (2.0 * rng.uniform() - 1.0);
        dec_.gyro_a = Var::leaf(std::move(a));
        Tensor p({first_out, d});
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.1 * rng.normal();
        dec_.gyro_p0 = Var::leaf(std::move(p));
        params_.push_back({"dec.gyro.a", dec_.gyro_a});
        params_.push_back({"dec.gyro.p0", dec_.gyro_p0});
    } else {
        dec_.first = make_linear(d, first_out, rng);
        params_.push_back({"dec.first.w", dec_.first.w});
        params_.push_back({"dec.first.b", dec_.first.b});
    }
    if (dec_.has_hidden) {
        std::size_t prev = spec.hidden.front();
        idx = 0;
        for (std::size_t i = 1; i < spec.hidden.size(); ++i) {
            dec_.stack.push_back(make_linear(prev, spec.hidden[i], rng));
            params_.push_back({"dec.stack" + std::to_string(idx) + ".w", dec_.stack.back().w});
            params_.push_back({"dec.stack" + std::to_string(idx) + ".b", dec_.stack.back().b});
            prev = spec.hidden[i];
            ++idx;
        }
        dec_.stack.push_back(make_linear(prev, spec.input_dim, rng));
        params_.push_back({"dec.stack" + std::to_string(idx) + ".w", dec_.stack.back().w});
        params_.push_back({"dec.stack" + std::to_string(idx) + ".b", dec_.stack.back().b});
    }
}

EncoderOut Model::encode(const Var& x) const {
    Var h = x;
    for (const auto& layer : enc_.trunk) h = ad::relu(layer.forward(h));
    Var out = enc_.head.forward(h);
    const std::size_t d = spec_.latent_dim;
    Var mu = geo::exp0_rows(ad::slice_cols(out, 0, d), spec_.curvature);
    // the additive floor keeps sigma > 0 when softplus underflows
    Var sigma = ad::add_const(
        ad::softplus(ad::slice_cols(out, d, d + spec_.sigma_dims())), 1e-12);
    return {mu, sigma};
}

Var Model::decode(const Var& z) const {
    Var h;
    switch (dec_.variant) {
        case DecoderVariant::gyroplane:
            h = geo::gyroplane_rows(z, dec_.gyro_a, dec_.gyro_p0, spec_.curvature);
            break;
        case DecoderVariant::log0_mlp:
            h = dec_.first.forward(geo::log0_rows(z, spec_.curvature));
            break;
        case DecoderVariant::plain_mlp:
            h = dec_.first.forward(z);
            break;
    }
    if (!dec_.has_hidden) return h;
    for (std::size_t i = 0; i < dec_.stack.size(); ++i) {
        h = ad::relu(h);
        h = dec_.stack[i].forward(h);
    }
    return h;
}

void Model::zero_grad() const {
    for (const auto& p : params_) p.value.node()->zero_grad();
}

void Model::set_output_bias(const std::vector<double>& bias) {
    Var b = dec_.has_hidden ? dec_.stack.back().b
            : (dec_.variant == DecoderVariant::gyroplane ? Var() : dec_.first.b);
    if (!b.defined())
        throw std::invalid_argument("set_output_bias: no bias on a bare gyroplane layer");
    if (b.val().size() != bias.size())
        throw std::invalid_argument("set_output_bias: size mismatch");
    for (std::size_t i = 0; i < bias.size(); ++i) b.mutable_val()[i] = bias[i];
}

void save_checkpoint(const std::string& path, const Model& model) {
    const ModelSpec& s = model.spec();
    json header;
    header["format"] = "pvae-checkpoint-v1";
    header["arch_hash"] = arch_hash(s);
    header["spec"] = {
        {"input_dim", s.input_dim},     {"latent_dim", s.latent_dim},
        {"hidden", s.hidden},           {"curvature", s.curvature},
        {"family", family_name(s.family)},
        {"prior_sigma", s.prior_sigma}, {"likelihood", likelihood_name(s.likelihood)},
        {"decoder", variant_name(s.decoder)}, {"sigma_per_dim", s.sigma_per_dim},
    };
    json tensors = json::array();
    for (const auto& p : model.params()) {
        tensors.push_back({{"name", p.name}, {"shape", p.value.val().shape()}});
    }
    header["tensors"] = tensors;
    const std::string htxt = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    const std::uint64_t hlen = htxt.size();
    char lenbuf[8];
    std::memcpy(lenbuf, &hlen, 8);
    f.write(lenbuf, 8);
    f.write(htxt.data(), static_cast<std::streamsize>(htxt.size()));
    for (const auto& p : model.params()) {
        const Tensor& t = p.value.val();
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char lenbuf[8];
    f.read(lenbuf, 8);
    if (!f) throw std::runtime_error("checkpoint truncated: " + path);
    std::uint64_t hlen = 0;
    std::memcpy(&hlen, lenbuf, 8);
    std::string htxt(hlen, '\0');
    f.read(htxt.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("checkpoint truncated: " + path);
    json header = json::parse(htxt);
    if (header.value("format", "") != "pvae-checkpoint-v1")
        throw std::runtime_error("not a pvae checkpoint: " + path);

    const json& js = header.at("spec");
    ModelSpec spec;
    spec.input_dim = js.at("input_dim").get<int>();
    spec.latent_dim = js.at("latent_dim").get<int>();
    spec.hidden = js.at("hidden").get<std::vector<int>>();
    spec.curvature = js.at("curvature").get<double>();
    spec.family = js.at("family").get<std::string>() == "wrapped" ? Family::wrapped
                                                                  : Family::riemannian;
    spec.prior_sigma = js.at("prior_sigma").get<double>();
    spec.likelihood = js.at("likelihood").get<std::string>() == "bernoulli"
                          ? Likelihood::bernoulli
                          : Likelihood::gaussian_unit;
    spec.decoder = variant_from(js.at("decoder").get<std::string>());
    spec.sigma_per_dim = js.at("sigma_per_dim").get<bool>();

    if (header.at("arch_hash").get<std::string>() != arch_hash(spec))
        throw std::runtime_error("checkpoint architecture hash mismatch: " + path);

    RngState rng(0);
    Model model(spec, rng);
    const json& tensors = header.at("tensors");
    if (tensors.size() != model.params().size())
        throw std::runtime_error("checkpoint tensor count mismatch: " + path);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        const auto& p = model.params()[i];
        if (tensors[i].at("name").get<std::string>() != p.name)
            throw std::runtime_error("checkpoint tensor order mismatch: " + path);
        Tensor& t = const_cast<Var&>(p.value).mutable_val();
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!f) throw std::runtime_error("checkpoint payload truncated: " + path);
    }
    return model;
}

}  // namespace pvae::net
