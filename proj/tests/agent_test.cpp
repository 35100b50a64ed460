#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "toolife/agent.hpp"
#include "toolife/error.hpp"

using namespace toolife;
using namespace toolife::agent;

namespace {

SacParams small_params() {
    SacParams p;
    p.hidden = {8, 8};
    return p;
}

Batch random_batch(int n, std::uint64_t seed, double action_scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Batch b;
    b.obs.resize(kObsDim, n);
    b.next_obs.resize(kObsDim, n);
    b.actions.resize(kActDim, n);
    b.rewards.resize(n);
    b.done.resize(n);
    for (int k = 0; k < n; ++k) {
        for (int d = 0; d < kObsDim; ++d) {
            b.obs(d, k) = 0.3 * u(rng);
            b.next_obs(d, k) = 0.3 * u(rng);
        }
        for (int d = 0; d < kActDim; ++d) b.actions(d, k) = 0.9 * action_scale * u(rng);
        b.rewards[k] = u(rng);
        b.done[k] = k % 4 == 0 ? 1.0 : 0.0;
    }
    return b;
}

// Per-component central differences; returns the worst relative mismatch,
// measured against max(|analytic|, |numeric|, floor).
template <typename Loss>
double fd_mismatch(Eigen::VectorXd& params, const Eigen::VectorXd& grad, Loss loss, double floor = 1e-6) {
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = loss();
        params[i] = keep - h;
        const double down = loss();
        params[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(fd), std::abs(grad[i]), floor});
        worst = std::max(worst, std::abs(fd - grad[i]) / scale);
    }
    return worst;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST(Mlp, BackwardMatchesFiniteDifferences) {
    nn::Mlp net({3, 8, 8, 2});
    std::mt19937_64 rng(1);
    net.init(rng);
    // Nonzero biases so that the check covers them.
    std::normal_distribution<double> n(0.0, 0.1);
    for (Eigen::Index i = 0; i < net.params().size(); ++i) net.params()[i] += n(rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Random(2, 5);
    auto loss = [&] { return net.forward(x).cwiseProduct(w).sum(); };
    nn::Mlp::Cache cache;
    net.forward(x, &cache);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.params().size());
    const Eigen::MatrixXd dx = net.backward(cache, w, grad);
    EXPECT_LT(fd_mismatch(net.params(), grad, loss), 1e-6);

    Eigen::MatrixXd xp = x;
    const double h = 1e-6;
    xp(1, 2) += h;
    const double up = net.forward(xp).cwiseProduct(w).sum();
    xp(1, 2) -= 2 * h;
    const double down = net.forward(xp).cwiseProduct(w).sum();
    EXPECT_NEAR(dx(1, 2), (up - down) / (2 * h), 1e-7);
}

TEST(Mlp, InitHasZeroBiases) {
    nn::Mlp net({4, 8, 3});
    std::mt19937_64 rng(2);
    net.init(rng);
    EXPECT_TRUE(net.forward(Eigen::MatrixXd::Zero(4, 1)).isZero(0.0));
}

TEST(SacGradient, CriticMatchesFiniteDifferences) {
    SacParams p = small_params();
    Sac sac(p, 3);
    sac.set_alpha(0.3);
    const Batch b = random_batch(6, 4, p.action_scale);
    const Eigen::MatrixXd eps = sac.noise(b.size());
    Eigen::VectorXd g1, g2;
    sac.critic_loss(b, eps, &g1, &g2);
    auto loss = [&] { return sac.critic_loss(b, eps, nullptr, nullptr); };
    EXPECT_LT(fd_mismatch(sac.q1().params(), g1, loss), 1e-4);
    EXPECT_LT(fd_mismatch(sac.q2().params(), g2, loss), 1e-4);
}

TEST(SacGradient, ActorMatchesFiniteDifferences) {
    SacParams p = small_params();
    Sac sac(p, 5);
    sac.set_alpha(0.3);
    // Move the policy away from its symmetric start so every term is active.
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n(0.0, 0.2);
    for (Eigen::Index i = 0; i < sac.actor().params().size(); ++i) sac.actor().params()[i] += n(rng);
    const Batch b = random_batch(6, 7, p.action_scale);
    const Eigen::MatrixXd eps = sac.noise(b.size());
    Eigen::VectorXd g;
    sac.actor_loss(b, eps, &g);
    auto loss = [&] { return sac.actor_loss(b, eps, nullptr); };
    EXPECT_LT(fd_mismatch(sac.actor().params(), g, loss), 1e-4);
}

TEST(SacCritic, ImmediateRewardWithoutDiscountOrEntropy) {
    SacParams p = small_params();
    p.gamma = 0.0;
    p.auto_alpha = false;
    p.initial_alpha = 0.0;
    p.critic_lr = 1e-3;
    Sac sac(p, 8);
    Batch one = random_batch(1, 9, p.action_scale);
    one.rewards[0] = 0.7;
    Batch b;
    b.obs = one.obs.replicate(1, 32);
    b.next_obs = one.next_obs.replicate(1, 32);
    b.actions = one.actions.replicate(1, 32);
    b.rewards = Eigen::VectorXd::Constant(32, 0.7);
    b.done = Eigen::VectorXd::Zero(32);
    for (int i = 0; i < 3000; ++i) sac.critic_update(b);
    Eigen::MatrixXd in(kObsDim + kActDim, 1);
    in << one.obs, one.actions / p.action_scale;
    EXPECT_NEAR(sac.q1().forward(in)(0, 0), 0.7, 1e-3);
    EXPECT_NEAR(sac.q2().forward(in)(0, 0), 0.7, 1e-3);
}

TEST(SacUpdate, ZeroLearningRateLeavesParameters) {
    SacParams p = small_params();
    p.actor_lr = p.critic_lr = p.alpha_lr = 0.0;
    Sac sac(p, 10);
    const Eigen::VectorXd a = sac.actor().params(), q1 = sac.q1().params(), q2 = sac.q2().params();
    const Eigen::VectorXd t1 = sac.q1_target().params(), t2 = sac.q2_target().params();
    const double alpha = sac.alpha();
    const Batch b = random_batch(32, 11, p.action_scale);
    sac.update(b);
    sac.update(b);
    EXPECT_EQ(sac.actor().params(), a);
    EXPECT_EQ(sac.q1().params(), q1);
    EXPECT_EQ(sac.q2().params(), q2);
    EXPECT_EQ(sac.q1_target().params(), t1);
    EXPECT_EQ(sac.q2_target().params(), t2);
    EXPECT_EQ(sac.alpha(), alpha);
}

TEST(SacActor, FlatCriticGivesZeroGradient) {
    SacParams p = small_params();
    p.auto_alpha = false;
    p.initial_alpha = 0.0;
    Sac sac(p, 12);
    // First-layer weights on the action inputs (columns 4 and 5).
    const int h = p.hidden.front();
    for (nn::Mlp* q : {&sac.q1(), &sac.q2()}) q->params().segment(kObsDim * h, kActDim * h).setZero();
    const Batch b = random_batch(32, 13, p.action_scale);
    Eigen::VectorXd g;
    sac.actor_loss(b, sac.noise(b.size()), &g);
    EXPECT_LT(g.norm(), 1e-8);
}

TEST(SacActor, EntropyRisesUnderPureEntropyObjective) {
    SacParams p = small_params();
    p.auto_alpha = false;
    p.initial_alpha = 5.0;
    p.actor_lr = 1e-3;
    Sac sac(p, 14);
    sac.q1().params().setZero();
    sac.q2().params().setZero();
    const Batch b = random_batch(32, 15, p.action_scale);
    const Eigen::MatrixXd eps = sac.noise(4096);
    const Eigen::MatrixXd probe = b.obs.replicate(1, 128);
    auto entropy = [&] {
        Batch big;
        big.obs = probe;
        big.rewards.resize(probe.cols());
        Eigen::RowVectorXd lp;
        sac.actor_loss(big, eps, nullptr, &lp);
        return -lp.mean();
    };
    const double before = entropy();
    for (int i = 0; i < 200; ++i) sac.actor_update(b);
    EXPECT_GT(entropy(), before + 0.1);
}

TEST(SquashedGaussian, DensityIntegratesToOne) {
    for (auto [mean, log_std] : {std::pair{0.0, 0.0}, {0.4, -1.0}, {-1.2, -0.3}, {0.2, -2.5}}) {
        constexpr int kCells = 400000;
        const double da = 2.0 / kCells;
        double mass = 0.0;
        std::vector<double> cdf_at;
        for (int i = 0; i < kCells; ++i) {
            const double a = -1.0 + (i + 0.5) * da;
            mass += std::exp(squashed_log_density(a, mean, log_std)) * da;
            if ((i + 1) % (kCells / 8) == 0 && i + 1 < kCells) {
                const double x = -1.0 + (i + 1) * da;
                EXPECT_NEAR(mass, normal_cdf((std::atanh(x) - mean) / std::exp(log_std)), 1e-3)
                    << "mean " << mean << " log_std " << log_std << " x " << x;
            }
        }
        EXPECT_NEAR(mass, 1.0, 1e-3);
    }
}

TEST(SquashedGaussian, PolicyLogProbIsSumOfMarginals) {
    Sac sac(small_params(), 16);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 0.3);
    for (Eigen::Index i = 0; i < sac.actor().params().size(); ++i) sac.actor().params()[i] += n(rng);
    const Eigen::MatrixXd obs = 0.3 * Eigen::MatrixXd::Random(kObsDim, 50);
    Eigen::MatrixXd actions;
    const Eigen::RowVectorXd lp = sac.sample_log_prob(obs, &actions);
    const Eigen::MatrixXd out = sac.actor().forward(obs);
    for (Eigen::Index k = 0; k < obs.cols(); ++k) {
        double sum = 0.0;
        for (int j = 0; j < kActDim; ++j) {
            const double ls = kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(out(kActDim + j, k)) + 1.0);
            sum += squashed_log_density(actions(j, k), out(j, k), ls);
        }
        if (actions.col(k).cwiseAbs().maxCoeff() < 0.999) EXPECT_NEAR(lp[k], sum, 1e-6);
    }
}

TEST(SacAct, DeterministicAndBounded) {
    SacParams p;
    Sac sac(p, 18);
    const Obs s{0.1, -0.2, 0.3, 0.05};
    EXPECT_EQ(sac.act(s, true), sac.act(s, true));
    double mean[2] = {0.0, 0.0};
    for (int i = 0; i < 10000; ++i) {
        const Act a = sac.act({0, 0, 0, 0}, false);
        for (int j = 0; j < 2; ++j) {
            ASSERT_LE(std::abs(a[static_cast<std::size_t>(j)]), p.action_scale);
            mean[j] += a[static_cast<std::size_t>(j)] / 10000.0;
        }
        const Act b = sac.act(s, false);
        ASSERT_LE(std::abs(b[0]), p.action_scale);
        ASSERT_LE(std::abs(b[1]), p.action_scale);
    }
    EXPECT_LT(std::abs(mean[0]), 0.1 * p.action_scale);
    EXPECT_LT(std::abs(mean[1]), 0.1 * p.action_scale);
}

TEST(SacAct, NonFiniteParametersFault) {
    Sac sac(small_params(), 19);
    sac.actor().params()[0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(sac.act({0.1, 0.1, 0.1, 0.1}, true), NumericalFault);
}

TEST(SacTargets, PolyakIsExact) {
    SacParams p = small_params();
    p.tau = 0.25;
    Sac sac(p, 20);
    sac.q1().params().array() += 1.0;
    const Eigen::VectorXd online = sac.q1().params();
    const Eigen::VectorXd target = sac.q1_target().params();
    sac.soft_update();
    EXPECT_EQ(sac.q1_target().params(), target + 0.25 * (online - target));
    EXPECT_LT((sac.q1_target().params() - (0.25 * online + 0.75 * target)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(sac.q1().params(), online);
}

TEST(SacTargets, BootstrapUsesSmallerTarget) {
    SacParams p = small_params();
    p.gamma = 1.0;
    p.auto_alpha = false;
    p.initial_alpha = 0.0;
    Sac sac(p, 21);
    const Eigen::Index last = sac.q1_target().params().size() - 1;  // output bias
    sac.q1_target().params()[last] = 5.0;
    sac.q2_target().params()[last] = -5.0;
    Batch b = random_batch(4, 22, p.action_scale);
    b.done.setZero();
    const Eigen::MatrixXd eps = sac.noise(4);
    Eigen::VectorXd g1;
    sac.critic_loss(b, eps, &g1, nullptr);

    // Rebuild the expected loss from the pieces.
    const Eigen::MatrixXd out = sac.actor().forward(b.next_obs);
    Eigen::MatrixXd u(kActDim, 4);
    for (int k = 0; k < 4; ++k) {
        for (int j = 0; j < kActDim; ++j) {
            const double ls = kLogStdMin + 0.5 * (kLogStdMax - kLogStdMin) * (std::tanh(out(kActDim + j, k)) + 1.0);
            u(j, k) = std::tanh(out(j, k) + std::exp(ls) * eps(j, k));
        }
    }
    Eigen::MatrixXd next_in(kObsDim + kActDim, 4), in(kObsDim + kActDim, 4);
    next_in << b.next_obs, u;
    in << b.obs, b.actions / p.action_scale;
    const Eigen::RowVectorXd t1 = sac.q1_target().forward(next_in).row(0);
    const Eigen::RowVectorXd t2 = sac.q2_target().forward(next_in).row(0);
    ASSERT_TRUE((t2.array() < t1.array()).all());
    const Eigen::RowVectorXd y = b.rewards.transpose() + t2;
    const Eigen::RowVectorXd e1 = sac.q1().forward(in).row(0) - y;
    const Eigen::RowVectorXd e2 = sac.q2().forward(in).row(0) - y;
    EXPECT_NEAR(sac.critic_loss(b, eps, nullptr, nullptr), 0.5 * (e1.squaredNorm() + e2.squaredNorm()) / 4, 1e-12);
}

TEST(SacUpdate, SameSeedSameTrajectory) {
    auto run = [] {
        SacParams p = small_params();
        Sac sac(p, 23);
        const Batch b = random_batch(32, 24, p.action_scale);
        for (int i = 0; i < 20; ++i) sac.update(b);
        return std::pair{sac.actor().params(), sac.q1().params()};
    };
    EXPECT_EQ(run(), run());
}

TEST(SacCheckpoint, RoundTripRestoresState) {
    SacParams p = small_params();
    Sac a(p, 25);
    const Batch b = random_batch(32, 26, p.action_scale);
    for (int i = 0; i < 5; ++i) a.update(b);
    checkpoint::Checkpoint ckpt;
    a.save(ckpt);
    std::stringstream ss;
    checkpoint::write(ss, ckpt);

    Sac c(p, 999);
    c.load(checkpoint::read(ss));
    EXPECT_EQ(c.actor().params(), a.actor().params());
    EXPECT_EQ(c.q2_target().params(), a.q2_target().params());
    EXPECT_EQ(c.alpha(), a.alpha());
    // Same optimizer and RNG state: the next updates agree bit for bit.
    a.update(b);
    c.update(b);
    EXPECT_EQ(c.actor().params(), a.actor().params());
    EXPECT_EQ(c.act({0.1, 0, 0, 0}, false), a.act({0.1, 0, 0, 0}, false));
}

TEST(SacCheckpoint, ShapeMismatchIsVersionError) {
    Sac a(small_params(), 27);
    checkpoint::Checkpoint ckpt;
    a.save(ckpt);
    Sac big(SacParams{}, 27);
    EXPECT_THROW(big.load(ckpt), VersionError);
}

TEST(Checkpoint, RejectsForeignOrTruncatedData) {
    std::stringstream junk("definitely not a checkpoint");
    EXPECT_THROW(checkpoint::read(junk), VersionError);

    checkpoint::Checkpoint ckpt;
    ckpt.tensors["w"] = Eigen::MatrixXd::Random(3, 2);
    ckpt.meta["k"] = "v";
    std::stringstream ss;
    checkpoint::write(ss, ckpt);
    const std::string bytes = ss.str();

    std::stringstream ok(bytes);
    const auto back = checkpoint::read(ok);
    EXPECT_EQ(back.tensor("w"), ckpt.tensors["w"]);
    EXPECT_EQ(back.value("k"), "v");
    EXPECT_THROW(back.tensor("missing"), VersionError);

    std::stringstream cut(bytes.substr(0, bytes.size() - 5));
    EXPECT_THROW(checkpoint::read(cut), VersionError);

    std::string bumped = bytes;
    bumped[8] = 2;
    std::stringstream newer(bumped);
    EXPECT_THROW(checkpoint::read(newer), VersionError);
}

// ---------------------------------------------------------------- replay

namespace {

Transition transition(long episode, int t, double r) {
    Transition tr;
    tr.state = {0.01 * t, 0.0, 0.0, 0.0};
    tr.next_state = {0.01 * (t + 1), 0.0, 0.0, 0.0};
    tr.action = {0.01, -0.01};
    tr.task_reward = r;
    tr.t = t;
    tr.episode_id = episode;
    return tr;
}

double task_only(const Transition& tr, const reward::EpisodeSummary&) { return tr.task_reward; }

}  // namespace

TEST(ReplayBuffer, OneShortEpisodeIsNotReady) {
    ReplayBuffer buf(1000);
    for (int t = 0; t < 20; ++t) buf.add(transition(0, t, -0.1));
    buf.finalize_episode(0, {false, 10.0, 0.0, 20});
    std::mt19937_64 rng(1);
    EXPECT_FALSE(buf.sample_ready_batch(32, rng, task_only).has_value());
    EXPECT_TRUE(buf.sample_ready_batch(20, rng, task_only).has_value());
}

TEST(ReplayBuffer, UnfinalizedTransitionsAreNeverSampled) {
    ReplayBuffer buf(1000);
    for (int t = 0; t < 20; ++t) buf.add(transition(0, t, -0.1));
    for (int t = 0; t < 20; ++t) buf.add(transition(1, t, -0.2));
    buf.finalize_episode(0, {false, 10.0, 0.0, 20});
    std::mt19937_64 rng(2);
    EXPECT_EQ(buf.ready_count(), 20u);
    for (int i = 0; i < 100; ++i) {
        const auto b = buf.sample_ready_batch(16, rng, task_only);
        ASSERT_TRUE(b);
        for (std::size_t idx : b->indices) EXPECT_EQ(buf.at(idx).episode_id, 0);
    }
}

TEST(ReplayBuffer, FailedEpisodesGiveTaskRewardOnly) {
    ReplayBuffer buf(1000);
    for (long e = 0; e < 3; ++e) {
        for (int t = 0; t < 20; ++t) buf.add(transition(e, t, -0.05 * (t + 1)));
        buf.finalize_episode(e, {false, 1e4 * (e + 1), 3.0, 20});
    }
    const reward::ArnConfig arn;
    const reward::NormBounds bounds{2e4, 1e3, 0};
    auto ours = [&](const Transition& tr, const reward::EpisodeSummary& ep) {
        return reward::shaped_reward(reward::Variant::kOurs, tr.task_reward, tr.t + 1, ep, bounds, arn, -10.0);
    };
    std::mt19937_64 rng(3);
    const auto b = buf.sample_ready_batch(32, rng, ours);
    ASSERT_TRUE(b);
    for (int k = 0; k < 32; ++k) EXPECT_EQ(b->rewards[k], buf.at(b->indices[static_cast<std::size_t>(k)]).task_reward);
}

TEST(ReplayBuffer, RewardsFollowTheEpisodeTable) {
    ReplayBuffer buf(100);
    for (int t = 0; t < 20; ++t) buf.add(transition(0, t, 0.0));
    buf.finalize_episode(0, {true, 7.0, 0.0, 20});
    std::mt19937_64 rng(4);
    const auto b = buf.sample_ready_batch(8, rng, [](const Transition& tr, const reward::EpisodeSummary& ep) {
        return ep.tool_rul + tr.t;
    });
    ASSERT_TRUE(b);
    for (int k = 0; k < 8; ++k) EXPECT_EQ(b->rewards[k], 7.0 + buf.at(b->indices[static_cast<std::size_t>(k)]).t);
}

TEST(ReplayBuffer, SamplingIsUniformByChiSquare) {
    constexpr int kSlots = 50;
    ReplayBuffer buf(kSlots + 10);
    for (int t = 0; t < kSlots; ++t) buf.add(transition(0, t, 0.0));
    buf.finalize_episode(0, {false, 1.0, 0.0, kSlots});
    for (int t = 0; t < 10; ++t) buf.add(transition(1, t, 0.0));  // open episode, excluded
    std::vector<int> counts(kSlots + 10, 0);
    std::mt19937_64 rng(5);
    constexpr int kBatches = 3125;  // 10^5 draws
    for (int i = 0; i < kBatches; ++i) {
        const auto b = buf.sample_ready_batch(32, rng, task_only);
        for (std::size_t idx : b->indices) ++counts[idx];
    }
    const double expected = 32.0 * kBatches / kSlots;
    double chi2 = 0.0;
    for (int i = 0; i < kSlots; ++i) chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
    for (int i = kSlots; i < kSlots + 10; ++i) EXPECT_EQ(counts[i], 0);
    // 95th percentile of chi-square with 49 degrees of freedom.
    EXPECT_LT(chi2, 66.339);
}

TEST(ReplayBuffer, FifoEvictionKeepsCountsConsistent) {
    ReplayBuffer buf(30);
    for (long e = 0; e < 5; ++e) {
        for (int t = 0; t < 10; ++t) buf.add(transition(e, t, 0.0));
        buf.finalize_episode(e, {false, 1.0, 0.0, 10});
    }
    EXPECT_EQ(buf.size(), 30u);
    EXPECT_EQ(buf.ready_count(), 30u);
    EXPECT_FALSE(buf.is_finalized(0));
    EXPECT_FALSE(buf.is_finalized(1));
    EXPECT_TRUE(buf.is_finalized(2));
    for (int t = 0; t < 5; ++t) buf.add(transition(5, t, 0.0));
    EXPECT_EQ(buf.ready_count(), 25u);
}

TEST(ReplayBuffer, RejectsBadTransitions) {
    ReplayBuffer buf(10);
    Transition tr = transition(0, 0, 0.0);
    tr.state[2] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(buf.add(tr), DataError);
    buf.add(transition(0, 0, 0.0));
    buf.finalize_episode(0, {false, 1.0, 0.0, 1});
    EXPECT_THROW(buf.add(transition(0, 1, 0.0)), ContractError);
    EXPECT_THROW(buf.finalize_episode(0, {false, 1.0, 0.0, 1}), ContractError);
}

TEST(ReplayBuffer, CheckpointRoundTrip) {
    ReplayBuffer buf(25);
    for (long e = 0; e < 4; ++e) {
        for (int t = 0; t < 8; ++t) buf.add(transition(e, t, -0.01 * t - e));
        if (e < 3) buf.finalize_episode(e, {e % 2 == 0, 100.0 * e, 0.5 * e, 8});
    }
    checkpoint::Checkpoint ckpt;
    buf.save(ckpt);
    ReplayBuffer back(25);
    back.load(ckpt);
    EXPECT_EQ(back.size(), buf.size());
    EXPECT_EQ(back.ready_count(), buf.ready_count());
    std::mt19937_64 r1(6), r2(6);
    const auto a = buf.sample_ready_batch(16, r1, task_only);
    const auto b = back.sample_ready_batch(16, r2, task_only);
    EXPECT_EQ(a->indices, b->indices);
    EXPECT_EQ(a->rewards, b->rewards);
    // The ring keeps overwriting from the same slot.
    buf.add(transition(3, 8, 0.0));
    back.add(transition(3, 8, 0.0));
    for (std::size_t i = 0; i < buf.size(); ++i) EXPECT_EQ(back.at(i).episode_id, buf.at(i).episode_id);
}
