#pragma once

#include <string>
#include <vector>

#include "pvae/autodiff.hpp"
#include "pvae/hypdist.hpp"
#include "pvae/rng.hpp"

namespace pvae::net {

using ad::Var;

enum class DecoderVariant { gyroplane, log0_mlp, plain_mlp };
enum class Likelihood { gaussian_unit, bernoulli };

struct Linear {
    Var w;  // {in, out}
    Var b;  // {out}
    Var forward(const Var& x) const { return ad::add(ad::matmul(x, w), b); }
};

struct ModelSpec {
    int input_dim = 0;
    int latent_dim = 2;
    std::vector<int> hidden = {200};  // trunk widths, shared encoder/decoder
    double curvature = 0.0;
    Family family = Family::wrapped;
    double prior_sigma = 1.0;
    Likelihood likelihood = Likelihood::gaussian_unit;
    DecoderVariant decoder = DecoderVariant::gyroplane;
    bool sigma_per_dim = false;  // wrapped family only

    int sigma_dims() const { return sigma_per_dim ? latent_dim : 1; }
};

std::string arch_hash(const ModelSpec& spec);

struct Encoder {
    std::vector<Linear> trunk;
    Linear head;  // emits latent_dim mean pre-image coords + sigma logits
};

struct Decoder {
    DecoderVariant variant = DecoderVariant::plain_mlp;
    Var gyro_a, gyro_p0;        // {H, d}, gyroplane variant only
    Linear first;               // d -> H, log0/plain variants
    std::vector<Linear> stack;  // remaining layers, ending at input_dim
    bool has_hidden = false;
};

struct EncoderOut {
    Var mu;     // {B, d}, valid ball points (image of exp_0)
    Var sigma;  // {B, 1} or {B, d}, softplus output
};

class Model {
public:
    Model(const ModelSpec& spec, RngState& rng);

    const ModelSpec& spec() const { return spec_; }

    EncoderOut encode(const Var& x) const;
    // Decoder output: Gaussian mean, or Bernoulli logits.
    Var decode(const Var& z) const;

    struct NamedParam {
        std::string name;
        Var value;
    };
    const std::vector<NamedParam>& params() const { return params_; }
    void zero_grad() const;

    // Sets the bias of the final decoder layer (e.g. to logit pixel means).
    void set_output_bias(const std::vector<double>& bias);

private:
    ModelSpec spec_;
    Encoder enc_;
    Decoder dec_;
    std::vector<NamedParam> params_;
};

// Checkpoint: 8-byte little-endian header length, JSON header (arch hash,
// model spec, tensor names + shapes in declaration order), then the raw
// double-precision values in that order.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace pvae::net
