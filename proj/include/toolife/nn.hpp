#pragma once

// Small dense networks with hand-written backprop, and the Adam optimizer.

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace toolife::nn {

/// Fully connected ReLU network with a linear output layer. Parameters are
/// stored in one flat vector, layer by layer: W (out x in, column-major)
/// followed by b (out). Inputs and outputs are column-per-sample.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> sizes);

    /// Weights uniform in +-1/sqrt(fan_in), biases zero.
    void init(std::mt19937_64& rng);

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }

    Eigen::VectorXd& params() { return theta_; }
    const Eigen::VectorXd& params() const { return theta_; }

    struct Cache {
        std::vector<Eigen::MatrixXd> activations;  // [0] is the input
    };

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

    /// Adds dL/dtheta to `grad` and returns dL/dx, given dL/d(output).
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_out, Eigen::VectorXd& grad) const;

private:
    std::vector<int> sizes_;
    Eigen::VectorXd theta_;
};

class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, double lr) : lr_(lr), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

    double lr() const { return lr_; }
    long steps() const { return t_; }
    const Eigen::VectorXd& first_moment() const { return m_; }
    const Eigen::VectorXd& second_moment() const { return v_; }
    void restore(const Eigen::VectorXd& m, const Eigen::VectorXd& v, long t);

private:
    double lr_ = 3e-4;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

}  // namespace toolife::nn
