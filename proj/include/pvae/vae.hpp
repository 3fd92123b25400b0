#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pvae/nets.hpp"
#include "pvae/radsample.hpp"

namespace pvae::vae {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// One bias-corrected Adam update of w given gradient g and moments (m, v);
// t is the 1-based step count.
void adam_step(Tensor& w, const Tensor& g, Tensor& m, Tensor& v, std::uint64_t t,
               const AdamConfig& cfg);

class Adam {
public:
    Adam(const std::vector<net::Model::NamedParam>& params, AdamConfig cfg);
    void step(const std::vector<net::Model::NamedParam>& params);
    std::uint64_t steps() const { return t_; }

private:
    std::vector<Tensor> m_, v_;
    std::uint64_t t_ = 0;
    AdamConfig cfg_;
};

// Noise of one sampling pass, recorded or replayed for gradient checks:
// eps holds the direction (riemannian: r alpha / wrapped: standard normals),
// quantile the radius quantiles u = F(r; sigma) for the riemannian family.
struct NoisePack {
    Tensor eps;       // {B, d}: alpha rows (riemannian) or eps rows (wrapped)
    Tensor quantile;  // {B, 1}: radius quantiles, riemannian only
};

struct PosteriorSample {
    ad::Var z;     // {B, d}
    ad::Var logq;  // {B, 1}, log posterior density of z w.r.t. dM
};

// Reparametrised one-sample draw from q(z|x). `record`, when given, captures
// the noise; `frozen`, when given, replays it (radii via quantile inversion)
// so finite differences through the whole estimator are well defined.
PosteriorSample sample_posterior(const net::Model& model, const net::EncoderOut& enc,
                                 RngState& rng, NoisePack* record = nullptr,
                                 const NoisePack* frozen = nullptr);

// log p(z) under the model prior (mean zero, dispersion prior_sigma): {B,1}.
ad::Var log_prior(const net::Model& model, const ad::Var& z);

// log p(x|z) per row given the decoder output: {B,1}.
ad::Var log_likelihood(const net::Model& model, const ad::Var& x, const ad::Var& decoded);

// Monte-Carlo ELBO of the batch (mean over rows, K sample passes).
ad::Var elbo_mc(const net::Model& model, const ad::Var& x, int k, RngState& rng);

// Same estimator with frozen noise, one pass (for gradient checks).
ad::Var elbo_frozen(const net::Model& model, const ad::Var& x, const NoisePack& noise);

// Per-datum IWAE values log (1/K) sum_k w_k. Worker threads split the K
// sample passes; pass streams are pre-split by sample index, so the result
// is bitwise independent of `workers`.
std::vector<double> iwae(const net::Model& model, const Tensor& x, int k,
                         RngState& rng, int workers = 1);

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 64;
    AdamConfig adam;
    int k_train = 1;
    int k_eval = 500;
    std::uint64_t seed = 1;
    std::string metrics_csv;  // per-epoch append when non-empty
    int eval_workers = 1;
};

struct TrainReport {
    std::vector<double> epoch_elbo;
    std::vector<double> epoch_wall_ms;
    double test_neg_iwae = 0.0;
    double test_neg_iwae_se = 0.0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
    int epochs_completed = 0;
    bool unstable = false;
    std::string instability_note;

    std::string to_json() const;
};

TrainReport train(net::Model& model, const Tensor& train_x, const Tensor& test_x,
                  const TrainConfig& cfg);

double mean_of(const std::vector<double>& v);
double se_of(const std::vector<double>& v);

}  // namespace pvae::vae
