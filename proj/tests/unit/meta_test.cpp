#include <gtest/gtest.h>

#include <cmath>

#include "common/random_graphs.hpp"
#include "metabug/meta/meta.hpp"

using namespace metabug;
using namespace metabug::meta;
using nn::ModelConfig;
using nn::Tape;

namespace {

ModelParams params_with(int d, int steps, int k, std::uint64_t seed = 3) {
  ModelConfig c;
  c.d = d;
  c.steps = steps;
  c.read_steps = k;
  c.seed = seed;
  return ModelParams::init(c);
}

Tensor random_vector(util::Rng& rng, std::size_t d, double scale = 1.0) {
  Tensor t({d});
  for (double& x : t.data) x = scale * rng.normal();
  return t;
}

Tensor rows_of(const std::vector<Tensor>& rows) {
  Tensor t({rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.at(i, j) = rows[i][j];
  return t;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One read step for x against peers, written out with scalar loops.
std::vector<double> hand_read_step(const ModelParams& p, const Tensor& x, const std::vector<Tensor>& peers) {
  std::size_t d = x.size();
  std::vector<double> score(peers.size()), alpha(peers.size());
  double mx = -1e300, z = 0;
  for (std::size_t j = 0; j < peers.size(); ++j) {
    score[j] = 0;
    for (std::size_t t = 0; t < d; ++t) score[j] += x[t] * peers[j][t];
    mx = std::max(mx, score[j]);
  }
  for (std::size_t j = 0; j < peers.size(); ++j) z += std::exp(score[j] - mx);
  for (std::size_t j = 0; j < peers.size(); ++j) alpha[j] = std::exp(score[j] - mx) / z;
  std::vector<double> hidden(2 * d, 0.0);
  for (std::size_t t = 0; t < d; ++t) {
    hidden[t] = x[t];
    for (std::size_t j = 0; j < peers.size(); ++j) hidden[d + t] += alpha[j] * peers[j][t];
  }
  auto gate = [&](const std::string& g, std::size_t r) {
    const Tensor& W = p.at("lstm.W" + g);
    const Tensor& U = p.at("lstm.U" + g);
    double s = p.at("lstm.b" + g)[r];
    for (std::size_t t = 0; t < d; ++t) s += W.at(r, t) * x[t];
    for (std::size_t t = 0; t < 2 * d; ++t) s += U.at(r, t) * hidden[t];
    return s;
  };
  std::vector<double> out(2 * d);
  for (std::size_t r = 0; r < 2 * d; ++r) {
    double c = sig(gate("f", r)) * p.at("meta.c0")[r] + sig(gate("i", r)) * std::tanh(gate("g", r));
    out[r] = sig(gate("o", r)) * std::tanh(c);
  }
  std::vector<double> delta(d);
  for (std::size_t t = 0; t < d; ++t) {
    double s = p.at("proj.b")[t] + x[t];
    for (std::size_t r = 0; r < 2 * d; ++r) s += p.at("proj.W").at(t, r) * out[r];
    delta[t] = s;
  }
  return delta;
}

}  // namespace

TEST(Relational, ZeroReadStepsIsIdentity) {
  util::Rng rng(1);
  ModelParams p = params_with(3, 1, 0);
  Tensor x = random_vector(rng, 3);
  EXPECT_EQ(relational_embed(x, rows_of({random_vector(rng, 3)}), p, 0), x);
}

TEST(Relational, SinglePeerGetsAllWeight) {
  util::Rng rng(2);
  ModelParams p = params_with(2, 1, 1);
  Tensor x = random_vector(rng, 2), y = random_vector(rng, 2);
  Tensor got = relational_embed(x, rows_of({y}), p, 1);
  auto want = hand_read_step(p, x, {y});
  for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(got[t], want[t], 1e-14);
}

TEST(Relational, TwoPeersMatchHandComputation) {
  util::Rng rng(3);
  ModelParams p = params_with(2, 1, 1);
  for (auto& [name, t] : p.tensors)
    if (name.rfind("lstm.", 0) == 0 || name.rfind("proj.", 0) == 0)
      for (double& v : t.data) v = 0.5 * rng.normal();
  Tensor x = random_vector(rng, 2), y1 = random_vector(rng, 2), y2 = random_vector(rng, 2);
  Tensor got = relational_embed(x, rows_of({y1, y2}), p, 1);
  auto want = hand_read_step(p, x, {y1, y2});
  for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(got[t], want[t], 1e-14);
}

TEST(Relational, EmptyPeerSetThrows) {
  ModelParams p = params_with(2, 1, 1);
  Tape t;
  nn::BoundParams bp(t, p, false);
  EXPECT_THROW(relational_embed_all(t.constant(Tensor({1, 2})), bp, 1), EmptyRelationSet);
}

TEST(Loss, TripletExamples) {
  auto v = [](std::vector<double> x) { return Tensor::vector(std::move(x)); };
  EXPECT_EQ(triplet_loss(v({0, 0}), v({0, 0}), v({1, 1})), 0.0);
  EXPECT_EQ(triplet_loss(v({2, 2}), v({2, 2}), v({2, 2})), 1.0);
  EXPECT_EQ(triplet_loss(v({0, 0}), v({1, 0}), v({3, 0})), 0.0);
  EXPECT_EQ(triplet_loss(v({0, 0}), v({2, 0}), v({1, 0})), 4.0);
}

TEST(Loss, GroupLossMatchesBruteForce) {
  util::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t d = 1 + rng.below(5);
    std::vector<Tensor> P, Q;
    for (std::uint64_t i = 0, n = 1 + rng.below(3); i < n; ++i) P.push_back(random_vector(rng, d));
    for (std::uint64_t i = 0, n = 1 + rng.below(4); i < n; ++i) Q.push_back(random_vector(rng, d));
    Tensor r = random_vector(rng, d, 0.3);
    double brute = 0;
    for (const auto& q : Q)
      for (const auto& p : P) {
        double dq = 0, dp = 0;
        for (std::size_t t = 0; t < d; ++t) {
          dq += (r[t] - q[t]) * (r[t] - q[t]);
          dp += (r[t] - p[t]) * (r[t] - p[t]);
        }
        brute += std::max(dq - dp + 1.0, 0.0);
      }
    EXPECT_EQ(group_loss(r, P, Q), brute);
    Tape t;
    std::vector<Var> pv, qv;
    for (const auto& p : P) pv.push_back(t.constant(p));
    for (const auto& q : Q) qv.push_back(t.constant(q));
    EXPECT_EQ(group_loss(t.constant(r), pv, qv).value().item(), brute);
  }
}

TEST(Loss, GroupLossZeroIffMarginHolds) {
  util::Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tensor> P = {random_vector(rng, 2, 2)}, Q = {random_vector(rng, 2, 2), random_vector(rng, 2, 2)};
    Tensor r({2});
    bool margin = true;
    for (const auto& q : Q)
      for (const auto& p : P) {
        double dq = q[0] * q[0] + q[1] * q[1], dp = p[0] * p[0] + p[1] * p[1];
        margin = margin && dp >= dq + 1.0;
      }
    EXPECT_EQ(group_loss(r, P, Q) == 0.0, margin);
  }
  Tensor r({1});
  EXPECT_EQ(group_loss(r, {Tensor::vector({5})}, {Tensor::vector({1}), Tensor::vector({-1})}), 0.0);
  EXPECT_EQ(group_loss(r, {Tensor::vector({1})}, {Tensor::vector({1})}), 1.0);
}

TEST(Loss, TotalLossIsAdditive) {
  util::Rng rng(7);
  ModelParams p = params_with(4, 2, 1);
  auto group = [&](const std::string& id) {
    TrainingGroup g{id, {}, {}};
    g.buggy.push_back(testutil::random_graph(rng, 4));
    for (int i = 0; i < 3; ++i) g.correct.push_back(testutil::random_graph(rng, 5));
    return g;
  };
  TrainingGroup a = group("a"), b = group("b");
  EXPECT_EQ(total_loss({}, p), 0.0);
  double la = total_loss({a}, p), lb = total_loss({b}, p);
  Tape t;
  nn::BoundParams bp(t, p, false);
  EXPECT_EQ(la, group_objective(a, bp, 1.0).value().item());
  EXPECT_NEAR(total_loss({a, b}, p), la + lb, 1e-12);
}

namespace {

// Buggy graphs are chains of one token, correct graphs chains of another.
std::vector<TrainingGroup> separable_corpus(util::Rng& rng) {
  std::vector<TrainingGroup> groups;
  for (int gi = 0; gi < 2; ++gi) {
    TrainingGroup g{"g" + std::to_string(gi), {}, {}};
    auto chain = [&](int token, std::size_t n) {
      nn::GraphInput in;
      for (std::size_t i = 0; i < n; ++i) {
        in.tokens.push_back(token);
        in.node_ids.push_back(static_cast<graph::NodeId>(i));
        in.stmt_of.push_back(static_cast<graph::NodeId>(i));
        if (i) in.edges[2].emplace_back(static_cast<int>(i), static_cast<int>(i - 1));
      }
      return in;
    };
    for (int i = 0; i < 2; ++i) g.buggy.push_back(chain(10 + gi, 3 + rng.below(3)));
    for (int i = 0; i < 8; ++i) g.correct.push_back(chain(20, 3 + rng.below(3)));
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialParams) {
  util::Rng rng(8);
  ModelParams p = params_with(4, 2, 1);
  TrainConfig c;
  c.epochs = 0;
  EXPECT_EQ(train(separable_corpus(rng), p, c).tensors, p.tensors);
}

TEST(Train, DeterministicUnderSeed) {
  TrainConfig c;
  c.epochs = 3;
  c.learning_rate = 0.01;
  util::Rng r1(9), r2(9);
  ModelParams a = train(separable_corpus(r1), params_with(4, 2, 1), c);
  ModelParams b = train(separable_corpus(r2), params_with(4, 2, 1), c);
  EXPECT_EQ(a.tensors, b.tensors);
}

TEST(Train, ResumeMatchesUninterrupted) {
  TrainConfig c;
  c.epochs = 4;
  c.learning_rate = 0.01;
  util::Rng rng(10);
  auto corpus = separable_corpus(rng);
  ModelParams full = train(corpus, params_with(4, 2, 1), c);
  ModelParams half;
  TrainHooks hooks;
  hooks.on_epoch = [&](int epoch, const ModelParams& p) {
    if (epoch == 2) half = p;
  };
  train(corpus, params_with(4, 2, 1), c, hooks);
  EXPECT_EQ(train(corpus, half, c, {}, 2).tensors, full.tensors);
}

TEST(Train, SeparableCorpusReachesZeroLossAndSeparates) {
  util::Rng rng(11);
  auto corpus = separable_corpus(rng);
  ModelParams p = params_with(8, 2, 1);
  TrainConfig c;
  c.epochs = 150;
  c.learning_rate = 0.01;
  double initial = total_loss(corpus, p);
  ModelParams trained = train(corpus, p, c);
  EXPECT_GT(initial, 0.0);
  EXPECT_EQ(total_loss(corpus, trained), 0.0);
  for (const auto& g : corpus) {
    Tape t;
    nn::BoundParams bp(t, trained, false);
    std::vector<Var> raw;
    for (const auto& x : g.buggy) raw.push_back(nn::graph_embed(x, bp));
    for (const auto& x : g.correct) raw.push_back(nn::graph_embed(x, bp));
    Var stacked = nn::stack_rows(raw);
    Tensor rbar = nn::mean_rows(stacked).value();
    Tensor delta = relational_embed_all(stacked, bp, 1).value();
    auto dist = [&](std::size_t i) {
      double s = 0;
      for (std::size_t j = 0; j < delta.cols(); ++j) s += std::pow(delta.at(i, j) - rbar[j], 2);
      return s;
    };
    int good = 0, total = 0;
    for (std::size_t q = g.buggy.size(); q < raw.size(); ++q)
      for (std::size_t b = 0; b < g.buggy.size(); ++b, ++total) good += dist(b) > dist(q);
    EXPECT_GE(good, 0.95 * total);
  }
}

TEST(Rank, IdenticalProgramsTieById) {
  ModelParams p = params_with(4, 2, 1);
  util::Rng rng(12);
  nn::GraphInput g = testutil::random_graph(rng, 4);
  auto r = rank({"b", "a"}, {g, g}, p);
  EXPECT_EQ(r[0].id, "a");
  EXPECT_EQ(r[0].distance, r[1].distance);
  EXPECT_EQ(r[0].rank, 1);
  EXPECT_EQ(r[1].rank, 2);
  EXPECT_THROW(rank({"a"}, {g}, p), TooFewPrograms);
}

TEST(Rank, PlantedOutlierRanksFirst) {
  ModelParams p = params_with(4, 2, 2);
  util::Rng rng(13);
  std::vector<Tensor> rows;
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) {
    rows.push_back(random_vector(rng, 4, 0.05));
    ids.push_back("p" + std::to_string(i));
  }
  rows[7] = Tensor::vector({6, -6, 6, -6});
  auto r = rank_embeddings(ids, rows_of(rows), p);
  EXPECT_EQ(r[0].id, "p7");
}

TEST(Rank, DistancesIgnoreInputOrder) {
  ModelParams p = params_with(4, 2, 2);
  util::Rng rng(14);
  std::vector<nn::GraphInput> graphs;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    graphs.push_back(testutil::random_graph(rng, 3 + rng.below(5)));
    ids.push_back("s" + std::to_string(i));
  }
  auto a = rank(ids, graphs, p);
  std::reverse(graphs.begin(), graphs.end());
  std::reverse(ids.begin(), ids.end());
  auto b = rank(ids, graphs, p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_NEAR(a[i].distance, b[i].distance, 1e-12);
    EXPECT_GE(a[i].distance, 0.0);
  }
}

TEST(Rank, AblatedRelationalUsesRawEmbeddings) {
  ModelParams p = params_with(4, 2, 2);
  p.config.relational = false;
  util::Rng rng(15);
  std::vector<Tensor> rows = {random_vector(rng, 4), random_vector(rng, 4), random_vector(rng, 4)};
  auto r = rank_embeddings({"a", "b", "c"}, rows_of(rows), p);
  Tensor mean({4});
  for (const auto& x : rows)
    for (std::size_t j = 0; j < 4; ++j) mean[j] += x[j] / 3;
  for (const auto& e : r) {
    const Tensor& x = rows[static_cast<std::size_t>(e.id[0] - 'a')];
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += (x[j] - mean[j]) * (x[j] - mean[j]);
    EXPECT_NEAR(e.distance, std::sqrt(s), 1e-12);
  }
}
