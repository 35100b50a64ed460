#include "toolife/nn.hpp"

#include <cmath>

#include "toolife/error.hpp"

namespace toolife::nn {

namespace {

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
using Map = Eigen::Map<Eigen::MatrixXd>;

}  // namespace

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("network needs at least an input and an output layer");
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw ConfigError("layer widths must be positive");
        n += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    theta_ = Eigen::VectorXd::Zero(n);
}

void Mlp::init(std::mt19937_64& rng) {
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(out) * in; ++i) theta_[off + i] = u(rng);
        off += static_cast<Eigen::Index>(out) * in;
        theta_.segment(off, out).setZero();
        off += out;
    }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
    if (x.rows() != input_dim()) throw ContractError("network input has the wrong dimension");
    if (cache) {
        cache->activations.clear();
        cache->activations.push_back(x);
    }
    Eigen::MatrixXd h = x;
    Eigen::Index off = 0;
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        ConstMap W(theta_.data() + off, out, in);
        off += static_cast<Eigen::Index>(out) * in;
        const auto b = theta_.segment(off, out);
        off += out;
        Eigen::MatrixXd z = W * h;
        z.colwise() += b;
        if (l + 1 < layers) z = z.cwiseMax(0.0);
        h = std::move(z);
        if (cache && l + 1 < layers) cache->activations.push_back(h);
    }
    return h;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const {
    const std::size_t layers = sizes_.size() - 1;
    if (cache.activations.size() != layers) throw ContractError("backward needs the cache of a forward pass");
    if (grad.size() != theta_.size()) throw ContractError("gradient buffer has the wrong size");

    std::vector<Eigen::Index> offsets(layers);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        offsets[l] = off;
        off += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }

    Eigen::MatrixXd delta = d_out;
    for (std::size_t l = layers; l-- > 0;) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const Eigen::MatrixXd& a = cache.activations[l];
        Map gW(grad.data() + offsets[l], out, in);
        gW.noalias() += delta * a.transpose();
        grad.segment(offsets[l] + static_cast<Eigen::Index>(out) * in, out) += delta.rowwise().sum();
        ConstMap W(theta_.data() + offsets[l], out, in);
        Eigen::MatrixXd prev = W.transpose() * delta;
        if (l > 0) prev = prev.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
        delta = std::move(prev);
    }
    return delta;
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw ContractError("optimizer state does not match the parameter vector");
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void Adam::restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v, long t) {
    if (m.size() != m_.size() || v.size() != v_.size()) {
        throw VersionError("optimizer state size mismatch");
    }
    m_ = m;
    v_ = v;
    t_ = t;
}

}  // namespace toolife::nn
