#include "pvae/vae.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pvae/graphgeo.hpp"
#include "pvae/special.hpp"

namespace pvae::vae {

using ad::Var;
using net::Likelihood;

void adam_step(Tensor& w, const Tensor& g, Tensor& m, Tensor& v, std::uint64_t t,
               const AdamConfig& cfg) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        w[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
    }
}

Adam::Adam(const std::vector<net::Model::NamedParam>& params, AdamConfig cfg)
    : cfg_(cfg) {
    for (const auto& p : params) {
        m_.push_back(Tensor::zeros_like(p.value.val()));
        v_.push_back(Tensor::zeros_like(p.value.val()));
    }
}

void Adam::step(const std::vector<net::Model::NamedParam>& params) {
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Node& n = *params[i].value.node();
        if (!n.grad_ready) continue;  // parameter not touched by this graph
        adam_step(n.value, n.grad, m_[i], v_[i], t_, cfg_);
    }
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Radius draw node for the riemannian family: values are per-row radii,
// the sigma-adjoint is the implicit reparametrisation dr/dsigma.
Var radius_node(const Var& sigma, double c, int d, RngState& rng,
                NoisePack* record, const NoisePack* frozen) {
    const std::size_t b = sigma.rows();
    Tensor r({b, 1});
    Tensor drds({b, 1});
    for (std::size_t i = 0; i < b; ++i) {
        const double s = sigma.val()[i];
        if (frozen) {
            r[i] = riemannian_radius_quantile(frozen->quantile[i], s, c, d);
        } else {
            r[i] = sample_radius_ars(s, c, d, rng);
        }
        if (record) record->quantile[i] = riemannian_radius_cdf(r[i], s, c, d);
        drds[i] = riemannian_radius_drdsigma(r[i], s, c, d);
    }
    auto sn = sigma.node();
    return ad::custom(std::move(r), {sigma}, [sn, drds](ad::Node& self) {
        Tensor& g = sn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * drds[i];
    });
}

// log Z_r^R(sigma) per row with its analytic sigma-derivative.
Var log_zr_node(const Var& sigma, double c, int d) {
    const std::size_t b = sigma.rows();
    Tensor v({b, 1});
    Tensor dv({b, 1});
    for (std::size_t i = 0; i < b; ++i) {
        v[i] = riemannian_log_Zr(sigma.val()[i], c, d);
        dv[i] = dlog_Zr_dsigma(sigma.val()[i], c, d);
    }
    auto sn = sigma.node();
    return ad::custom(std::move(v), {sigma}, [sn, dv](ad::Node& self) {
        Tensor& g = sn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dv[i];
    });
}

}  // namespace

PosteriorSample sample_posterior(const net::Model& model, const net::EncoderOut& enc,
                                 RngState& rng, NoisePack* record,
                                 const NoisePack* frozen) {
    const net::ModelSpec& spec = model.spec();
    const double c = spec.curvature;
    const int d = spec.latent_dim;
    const std::size_t b = enc.mu.rows();

    if (record) {
        record->eps = Tensor({b, static_cast<std::size_t>(d)});
        record->quantile = Tensor({b, 1});
    }

    if (c == 0.0 || spec.family == Family::wrapped) {
        Tensor eps({b, static_cast<std::size_t>(d)});
        if (frozen) {
            eps = frozen->eps;
        } else {
            for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
        }
        if (record) record->eps = eps;
        Var epsv = Var::constant(std::move(eps));
        Var v = ad::mul(enc.sigma, epsv);  // {B,1} or {B,d} times {B,d}
        Var z = geo::expmap_pre_rows(enc.mu, v, c);

        // log N(v | 0, sigma^2): the quadratic term is constant in the
        // reparametrised noise.
        Var log_sig_sum = spec.sigma_per_dim
                              ? ad::row_sum(ad::log_(enc.sigma))
                              : ad::scale(ad::log_(enc.sigma), static_cast<double>(d));
        Var eps_sq_rows = ad::row_sum(ad::square(epsv));  // constant node
        Var logq = ad::neg(ad::add(ad::add_const(log_sig_sum, 0.5 * d * kLog2Pi),
                                   ad::scale(eps_sq_rows, 0.5)));
        if (c != 0.0) {
            Var r = ad::row_norm(v);
            logq = ad::sub(logq, ad::scale(ad::log_sinhc(ad::scale(r, std::sqrt(c))),
                                           static_cast<double>(d - 1)));
        }
        return {z, logq};
    }

    // Riemannian family, c > 0: direction uniform on the sphere, radius by
    // rejection with the implicit sigma-gradient.
    Tensor alpha({b, static_cast<std::size_t>(d)});
    if (frozen) {
        alpha = frozen->eps;
    } else {
        for (std::size_t i = 0; i < b; ++i) {
            const auto a = sample_sphere(d, rng);
            for (int j = 0; j < d; ++j) alpha[i * d + j] = a[j];
        }
    }
    if (record) record->eps = alpha;
    Var r = radius_node(enc.sigma, c, d, rng, record, frozen);
    Var v = ad::mul(r, Var::constant(std::move(alpha)));
    Var z = geo::expmap_pre_rows(enc.mu, v, c);

    Var logq = ad::neg(ad::div(ad::square(r), ad::scale(ad::square(enc.sigma), 2.0)));
    logq = ad::sub(logq, log_zr_node(enc.sigma, c, d));
    logq = ad::add_const(logq, -log_sphere_area(d));
    return {z, logq};
}

Var log_prior(const net::Model& model, const Var& z) {
    const net::ModelSpec& spec = model.spec();
    const double c = spec.curvature;
    const int d = spec.latent_dim;
    const double s0 = spec.prior_sigma;
    if (c == 0.0) {
        Var sq = ad::row_sum(ad::square(z));
        return ad::add_const(ad::scale(sq, -0.5 / (s0 * s0)),
                             -0.5 * d * (kLog2Pi + 2.0 * std::log(s0)));
    }
    Var t = geo::dist0_rows(z, c);
    if (spec.family == Family::riemannian) {
        return ad::add_const(ad::scale(ad::square(t), -0.5 / (s0 * s0)),
                             -riemannian_log_Z(s0, c, d));
    }
    Var base = ad::add_const(ad::scale(ad::square(t), -0.5 / (s0 * s0)),
                             -0.5 * d * (kLog2Pi + 2.0 * std::log(s0)));
    return ad::sub(base, ad::scale(ad::log_sinhc(ad::scale(t, std::sqrt(c))),
                                   static_cast<double>(d - 1)));
}

Var log_likelihood(const net::Model& model, const Var& x, const Var& decoded) {
    const std::size_t n = x.cols();
    if (model.spec().likelihood == Likelihood::gaussian_unit) {
        Var sq = ad::row_sum(ad::square(ad::sub(x, decoded)));
        return ad::add_const(ad::scale(sq, -0.5), -0.5 * n * kLog2Pi);
    }
    // Bernoulli on logits L: sum_j x L - softplus(L)
    return ad::row_sum(ad::sub(ad::mul(x, decoded), ad::softplus(decoded)));
}

namespace {

Var elbo_one_pass(const net::Model& model, const Var& x, RngState& rng,
                  const NoisePack* frozen) {
    const net::EncoderOut enc = model.encode(x);
    const PosteriorSample ps = sample_posterior(model, enc, rng, nullptr, frozen);
    const Var decoded = model.decode(ps.z);
    const Var ll = log_likelihood(model, x, decoded);
    const Var lp = log_prior(model, ps.z);
    return ad::mean(ad::sub(ad::add(ll, lp), ps.logq));
}

}  // namespace

Var elbo_mc(const net::Model& model, const Var& x, int k, RngState& rng) {
    if (k < 1) throw std::invalid_argument("elbo_mc: k must be >= 1");
    const std::uint64_t base = rng.next_u64();
    Var acc;
    for (int i = 0; i < k; ++i) {
        RngState pass = RngState::indexed(base, static_cast<std::uint64_t>(i));
        Var e = elbo_one_pass(model, x, pass, nullptr);
        acc = acc.defined() ? ad::add(acc, e) : e;
    }
    return k == 1 ? acc : ad::scale(acc, 1.0 / k);
}

Var elbo_frozen(const net::Model& model, const Var& x, const NoisePack& noise) {
    RngState unused(0);
    return elbo_one_pass(model, x, unused, &noise);
}

std::vector<double> iwae(const net::Model& model, const Tensor& x, int k,
                         RngState& rng, int workers) {
    if (k < 1) throw std::invalid_argument("iwae: k must be >= 1");
    const std::size_t b = x.rows();
    const std::uint64_t base = rng.next_u64();
    std::vector<std::vector<double>> logw(k, std::vector<double>(b));

    auto run_pass = [&](int pass_idx) {
        ad::NoGradGuard no_grad;
        RngState pass = RngState::indexed(base, static_cast<std::uint64_t>(pass_idx));
        const Var xv = Var::constant(x);
        const net::EncoderOut enc = model.encode(xv);
        const PosteriorSample ps = sample_posterior(model, enc, pass);
        const Var decoded = model.decode(ps.z);
        const Var ll = log_likelihood(model, xv, decoded);
        const Var lp = log_prior(model, ps.z);
        for (std::size_t i = 0; i < b; ++i)
            logw[pass_idx][i] = ll.val()[i] + lp.val()[i] - ps.logq.val()[i];
    };

    workers = std::max(1, std::min<int>(workers, k));
    if (workers == 1) {
        for (int i = 0; i < k; ++i) run_pass(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < k; i = next.fetch_add(1)) run_pass(i);
            });
        for (auto& t : pool) t.join();
    }

    // Deterministic reduction order: log-mean-exp over passes per datum.
    std::vector<double> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        double m = kNegInf;
        for (int p = 0; p < k; ++p) m = std::max(m, logw[p][i]);
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += std::exp(logw[p][i] - m);
        out[i] = m + std::log(s) - std::log(static_cast<double>(k));
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= static_cast<double>(v.size() - 1);
    return std::sqrt(s2 / static_cast<double>(v.size()));
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["epoch_elbo"] = epoch_elbo;
    j["epoch_wall_ms"] = epoch_wall_ms;
    j["test_neg_iwae"] = test_neg_iwae;
    j["test_neg_iwae_se"] = test_neg_iwae_se;
    j["wall_ms"] = wall_ms;
    j["seed"] = seed;
    j["epochs_completed"] = epochs_completed;
    j["unstable"] = unstable;
    j["instability_note"] = instability_note;
    return j.dump(2);
}

namespace {

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& idx,
                 std::size_t i0, std::size_t i1) {
    const std::size_t n = x.cols();
    Tensor out({i1 - i0, n});
    for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[(i - i0) * n + j] = x[idx[i] * n + j];
    return out;
}

}  // namespace

TrainReport train(net::Model& model, const Tensor& train_x, const Tensor& test_x,
                  const TrainConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    TrainReport report;
    report.seed = cfg.seed;

    RngState rng(cfg.seed);
    Adam opt(model.params(), cfg.adam);
    const std::size_t n = train_x.rows();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);

    std::ofstream metrics;
    if (!cfg.metrics_csv.empty()) {
        metrics.open(cfg.metrics_csv, std::ios::app);
        metrics << "epoch,train_elbo,wall_ms\n";
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto e0 = clock::now();
        // Fisher-Yates with our stream for reproducibility
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform() * i);
            std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
        }
        double epoch_sum = 0.0;
        for (std::size_t i0 = 0; i0 < n; i0 += cfg.batch_size) {
            const std::size_t i1 = std::min(n, i0 + cfg.batch_size);
            Var xb = Var::constant(take_rows(train_x, idx, i0, i1));
            Var elbo = elbo_mc(model, xb, cfg.k_train, rng);
            const double val = elbo.item();
            if (!std::isfinite(val)) {
                std::ostringstream note;
                note << "non-finite ELBO at epoch " << epoch << " (c="
                     << model.spec().curvature << ", prior_sigma="
                     << model.spec().prior_sigma << ")";
                report.unstable = true;
                report.instability_note = note.str();
                report.epochs_completed = epoch;
                report.wall_ms = std::chrono::duration<double, std::milli>(
                                     clock::now() - t0).count();
                return report;
            }
            model.zero_grad();
            ad::backward(ad::neg(elbo));
            opt.step(model.params());
            epoch_sum += val * static_cast<double>(i1 - i0);
        }
        const double epoch_ms =
            std::chrono::duration<double, std::milli>(clock::now() - e0).count();
        report.epoch_elbo.push_back(epoch_sum / static_cast<double>(n));
        report.epoch_wall_ms.push_back(epoch_ms);
        if (metrics.is_open())
            metrics << epoch << ',' << report.epoch_elbo.back() << ',' << epoch_ms << '\n';
    }
    report.epochs_completed = cfg.epochs;

    if (cfg.k_eval > 0 && test_x.rows() > 0) {
        RngState eval_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        const auto vals = iwae(model, test_x, cfg.k_eval, eval_rng, cfg.eval_workers);
        std::vector<double> neg(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) neg[i] = -vals[i];
        report.test_neg_iwae = mean_of(neg);
        report.test_neg_iwae_se = se_of(neg);
    }
    report.wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    return report;
}

}  // namespace pvae::vae
