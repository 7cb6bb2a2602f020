#include "tlr/logic_network.hpp"

#include "tlr/extraction.hpp"
#include "tlr/semantics.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tlr;
using namespace tlr::testing;

namespace {

SignalMatrix matrix_from_signals(const std::vector<std::vector<double>>& rows) {
  SignalMatrix sig;
  sig.n = rows.size();
  sig.steps = rows[0].size();
  for (const auto& r : rows) sig.values.insert(sig.values.end(), r.begin(), r.end());
  sig.param_offsets.assign(sig.n, 0);
  sig.param_counts.assign(sig.n, 0);
  return sig;
}

SignalMatrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t steps) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(steps));
  for (auto& r : rows)
    for (auto& x : r) x = dist(rng);
  return matrix_from_signals(rows);
}

SignalMap signal_map_of(const SignalMatrix& sig, const std::vector<std::string>& ids) {
  SignalMap m;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto row = sig.value_row(i);
    m[ids[i]] = std::vector<double>(row.begin(), row.end());
  }
  return m;
}

} // namespace

TEST_CASE("build: counts, determinism, guards") {
  auto s = build_structure({"A", "B", "C"}, 1, 7);
  CHECK(s.cluster_count() == 3);
  CHECK(s.temporal.size() == 9);
  CHECK(s.cluster_neg.size() == 6);
  CHECK(s.agg_op.size() == 4);

  auto s5 = build_structure({"A", "B", "C", "D", "E"}, 2, 7);
  CHECK(s5.cluster_count() == 10);

  auto s2 = build_structure({"A", "B", "C"}, 1, 7);
  CHECK(s.temporal == s2.temporal);
  CHECK(s.cluster_neg == s2.cluster_neg);

  CHECK_THROWS_AS(build_structure({"A"}, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_structure({"A", "B"}, 0, 0), std::invalid_argument);
  for (double w : s.cluster_neg) CHECK(std::abs(w) >= 0.05);
}

TEST_CASE("forward: uniform gates average their operator values") {
  auto s = build_structure({"A", "B"}, 1, 1);
  // one cluster, no aggregation; zero all weights -> every gate blends evenly
  std::fill(s.temporal.begin(), s.temporal.end(), 0.0);
  std::fill(s.cluster_neg.begin(), s.cluster_neg.end(), 0.0);
  std::fill(s.cluster_op.begin(), s.cluster_op.end(), 0.0);
  EnsembleStructure ens = make_ensemble({s}, 0);

  auto sig = matrix_from_signals({{0.8, 0.2, 0.5}, {0.1, 0.4, -0.3}});
  // negation gates at 0 zero out the inputs entirely: score = mean(min,max) = 0
  CHECK(forward_hard(ens, sig) == doctest::Approx(0.0));

  // temporal gate blend check: set negations to +sat so inputs pass through
  s.cluster_neg = {20.0, 20.0};
  ens = make_ensemble({s}, 0);
  double gmin = 0.2, gmax = 0.8, id0 = 0.8; // suffix extrema of row A at t=0
  double a_blend = (gmin + gmax + id0) / 3.0;
  double bmin = -0.3, bmax = 0.4, b0 = 0.1;
  double b_blend = (bmin + bmax + b0) / 3.0;
  double ta = std::tanh(20.0);
  double expect = 0.5 * (std::min(ta * a_blend, ta * b_blend) + std::max(ta * a_blend, ta * b_blend));
  CHECK(forward_hard(ens, sig) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("forward: saturated gate equals the selected operator") {
  auto s = build_structure({"A", "B"}, 1, 3);
  s.temporal = {1e6, 0, 0, 0, 0, 1e6}; // A: G, B: id
  s.cluster_neg = {25.0, 25.0};
  s.cluster_op = {1e6, 0.0}; // AND
  EnsembleStructure ens = make_ensemble({s}, 0);
  auto sig = matrix_from_signals({{0.8, 0.2, 0.5}, {0.1, 0.4, -0.3}});
  double expect = std::min(std::tanh(25.0) * 0.2, std::tanh(25.0) * 0.1);
  CHECK(forward_hard(ens, sig) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("forward: score stays in [-1, 1] over random sweeps") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wdist(-30.0, 30.0);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = 2 + trial % 4;
    auto ens = build_ensemble(std::vector<std::string>(n, "x"), 1 + trial % 2, 1 + trial % 3, trial);
    for (std::size_t i = 0; i < ens.members.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) ens.members[i].predicate_ids[j] = "p" + std::to_string(j);
    std::vector<double> w = weights_flat(ens);
    for (auto& x : w) x = wdist(rng);
    set_weights_flat(ens, w);
    auto sig = random_matrix(rng, n, 10);
    double soft = forward(ens, sig, 10.0);
    double hard = forward_hard(ens, sig);
    CHECK(soft >= -1.0);
    CHECK(soft <= 1.0);
    CHECK(hard >= -1.0);
    CHECK(hard <= 1.0);
  }
}

TEST_CASE("figure-style wiring: saturated structure equals its concretized formula") {
  // depth 1, N = 3: temporal G on P1, id on P2, F on P3;
  // clusters (order (0,1), (0,2), (1,2)):
  //   (G P1 | !P2), (!G P1 & F P3), (!P2 & F P3); aggregation: OR, OR
  auto s = build_structure({"P1", "P2", "P3"}, 1, 0);
  s.temporal = {30, -30, -30, -30, -30, 30, -30, 30, -30};
  s.cluster_neg = {12, -12, -12, 12, -12, 12};
  s.cluster_op = {-30, 30, 30, -30, 30, -30};
  s.agg_op = {-30, 30, -30, 30};
  EnsembleStructure ens = make_ensemble({s}, 0);

  auto conc = concretize(ens);
  CHECK(format_formula(conc.formula) ==
        "(((G P1 | !P2) | (!G P1 & F P3)) | (!P2 & F P3))");
  CHECK(conc.ties == 0);

  std::mt19937_64 rng(9);
  std::vector<std::string> ids{"P1", "P2", "P3"};
  for (int trial = 0; trial < 100; ++trial) {
    auto sig = random_matrix(rng, 3, 8);
    double net = forward_hard(ens, sig);
    double formula = eval_hard(conc.formula, signal_map_of(sig, ids), 0);
    CHECK(net == doctest::Approx(formula).epsilon(1e-6));
  }
}

TEST_CASE("saturation-extraction consistency on random structures") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> sat(20.5, 40.0);
  std::uniform_real_distribution<double> neg(10.0, 15.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 2 + trial % 3;
    int depth = 1 + trial % 2;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    auto ens = build_ensemble(ids, depth, 1 + trial % 2, trial);
    for (auto& member : ens.members) {
      for (std::size_t g = 0; g < member.temporal.size() / 3; ++g) {
        int pick = static_cast<int>(rng() % 3);
        for (int k = 0; k < 3; ++k) member.temporal[g * 3 + k] = k == pick ? sat(rng) : -sat(rng);
      }
      for (auto& w : member.cluster_neg) w = (coin(rng) ? 1.0 : -1.0) * neg(rng);
      for (std::size_t g = 0; g < member.cluster_op.size() / 2; ++g) {
        int pick = static_cast<int>(rng() % 2);
        for (int k = 0; k < 2; ++k) member.cluster_op[g * 2 + k] = k == pick ? sat(rng) : -sat(rng);
      }
      for (std::size_t g = 0; g < member.agg_op.size() / 2; ++g) {
        int pick = static_cast<int>(rng() % 2);
        for (int k = 0; k < 2; ++k) member.agg_op[g * 2 + k] = k == pick ? sat(rng) : -sat(rng);
      }
    }
    for (std::size_t g = 0; g < ens.outer_op.size() / 2; ++g) {
      int pick = static_cast<int>(rng() % 2);
      for (int k = 0; k < 2; ++k) ens.outer_op[g * 2 + k] = k == pick ? sat(rng) : -sat(rng);
    }

    auto conc = concretize(ens);
    auto sig = random_matrix(rng, n, 6);
    double net = forward_hard(ens, sig);
    double formula = eval_hard(conc.formula, signal_map_of(sig, ids), 0);
    CHECK(net == doctest::Approx(formula).epsilon(1e-6));
  }
}

TEST_CASE("stacking monotonicity: depth-1 formulas survive at depth 2 via identity") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<std::string> ids{"a", "b", "c"};
    auto s1 = build_structure(ids, 1, trial);
    auto f1 = concretize(s1).formula;

    auto s2 = build_structure(ids, 2, trial);
    // copy layer-1 gates, saturate layer 2 on identity
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        s2.temporal_w(0, i, k) = s1.temporal_w(0, i, k);
        s2.temporal_w(1, i, k) = k == 2 ? 30.0 : -30.0;
      }
    }
    s2.cluster_neg = s1.cluster_neg;
    s2.cluster_op = s1.cluster_op;
    s2.agg_op = s1.agg_op;
    CHECK(structurally_equal(concretize(s2).formula, f1));
  }
}

TEST_CASE("forward_batch equals the per-trace loop") {
  std::mt19937_64 rng(41);
  std::vector<std::string> ids{"a", "b", "c"};
  auto ens = build_ensemble(ids, 2, 3, 11);
  std::vector<SignalMatrix> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(random_matrix(rng, 3, 12));

  auto scores = forward_batch(ens, batch, 10.0, 2);
  REQUIRE(scores.size() == 32);
  for (std::size_t i = 0; i < batch.size(); ++i)
    CHECK(scores[i] == forward(ens, batch[i], 10.0));

  auto one = forward_batch(ens, {batch[0]}, 10.0, 1);
  CHECK(one[0] == forward(ens, batch[0], 10.0));
}

TEST_CASE("ensemble: k=1 reduces to the member; saturated outer AND takes the min") {
  std::vector<std::string> ids{"a", "b"};
  auto m1 = build_structure(ids, 1, 1);
  auto m2 = build_structure(ids, 1, 2);
  std::mt19937_64 rng(5);
  auto sig = random_matrix(rng, 2, 6);

  auto solo = make_ensemble({m1}, 0);
  EnsembleStructure single_as_member = make_ensemble({m1}, 99);
  CHECK(forward_hard(solo, sig) == forward_hard(single_as_member, sig));

  auto both = make_ensemble({m1, m2}, 0);
  both.outer_op = {30.0, -30.0};
  double s1 = forward_hard(make_ensemble({m1}, 0), sig);
  double s2 = forward_hard(make_ensemble({m2}, 0), sig);
  CHECK(forward_hard(both, sig) == doctest::Approx(std::min(s1, s2)).epsilon(1e-6));

  CHECK_THROWS_AS(make_ensemble({}, 0), std::invalid_argument);

  // the default experiment configuration builds and evaluates
  auto big = build_ensemble({"a", "b", "c", "d"}, 2, 10, 3);
  CHECK(big.k() == 10);
  CHECK(std::isfinite(forward(big, random_matrix(rng, 4, 8), 10.0)));
}

TEST_CASE("network gradient: saturated gates, zero-negation slope, finite differences") {
  std::vector<std::string> ids{"a", "b", "c"};
  std::mt19937_64 rng(777);

  // saturated selection gate: dominated weights get vanishing gradients
  {
    auto s = build_structure(ids, 1, 5);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int k = 0; k < 3; ++k) s.temporal_w(0, i, k) = k == 0 ? 40.0 : -40.0;
    auto ens = make_ensemble({s}, 0);
    auto sig = random_matrix(rng, 3, 8);
    auto grad = network_gradient(ens, sig, 10.0);
    std::size_t idx = 0;
    for_each_weight(ens, [&](double, const WeightTag& tag) {
      if (tag.kind == WeightTag::Kind::Temporal && tag.slot != 0)
        CHECK(std::abs(grad.gate[idx]) < 1e-6);
      ++idx;
    });
  }

  // w_neg = 0: d(cluster input)/d(w_neg) passes the raw input through (tanh'(0)=1)
  {
    auto s = build_structure({"a", "b"}, 1, 5);
    std::fill(s.temporal.begin(), s.temporal.end(), 0.0);
    s.temporal = {40, -40, -40, 40, -40, -40}; // both G: deterministic path
    s.cluster_neg = {0.0, 0.0};
    s.cluster_op = {40.0, -40.0}; // AND
    auto ens = make_ensemble({s}, 0);
    auto sig = random_matrix(rng, 2, 6);
    auto grad = network_gradient(ens, sig, 10.0);
    // with both inputs zeroed, softmin(0,0) = 0 and d/d(a) = 1/2
    double u0 = soft_suffix_scan(sig.value_row(0), 10.0, true).out[0];
    std::size_t idx = 0;
    for_each_weight(ens, [&](double, const WeightTag& tag) {
      if (tag.kind == WeightTag::Kind::ClusterNeg && tag.slot == 0)
        CHECK(grad.gate[idx] == doctest::Approx(0.5 * u0).epsilon(1e-9));
      ++idx;
    });
  }
}

TEST_CASE("network gradient matches finite differences on full random structures") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> wdist(-1.5, 1.5);
  for (int trial = 0; trial < 6; ++trial) {
    std::size_t n = 4;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    auto ens = build_ensemble(ids, 2, trial % 2 + 1, trial);
    std::vector<double> w = weights_flat(ens);
    for (auto& x : w) x = wdist(rng);
    set_weights_flat(ens, w);

    auto sig = random_matrix(rng, n, 20);
    auto grad = network_gradient(ens, sig, 10.0);
    CHECK(grad.score == doctest::Approx(forward(ens, sig, 10.0)));

    // gate weights
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto up = w, dn = w;
      up[i] += h;
      dn[i] -= h;
      set_weights_flat(ens, up);
      double f_up = forward(ens, sig, 10.0);
      set_weights_flat(ens, dn);
      double f_dn = forward(ens, sig, 10.0);
      set_weights_flat(ens, w);
      double fd = (f_up - f_dn) / (2 * h);
      if (std::abs(fd) < 1e-10) {
        CHECK(std::abs(grad.gate[i]) < 1e-8);
      } else {
        CHECK(grad.gate[i] == doctest::Approx(fd).epsilon(1e-4));
      }
    }

    // signal values (every 3rd to keep runtime sane)
    for (std::size_t k = 0; k < sig.values.size(); k += 3) {
      auto mod = sig;
      mod.values[k] += h;
      double f_up = forward(ens, mod, 10.0);
      mod.values[k] -= 2 * h;
      double f_dn = forward(ens, mod, 10.0);
      double fd = (f_up - f_dn) / (2 * h);
      if (std::abs(fd) < 1e-10) {
        CHECK(std::abs(grad.signal[k]) < 1e-8);
      } else {
        CHECK(grad.signal[k] == doctest::Approx(fd).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("checkpoint round trip preserves weights and theta") {
  PredicateRegistry reg = builtin_registry();
  std::vector<std::string> ids{"SafeTTC", "Comfortable", "InDrivable"};
  Checkpoint ck;
  ck.structure = build_ensemble(ids, 2, 3, 42);
  ck.theta = ThetaMap(reg, ids);
  ck.theta.values_for(1)[0] = 1.5;
  ck.registry_hash = reg.hash();
  ck.kappa = 12.0;

  auto text = checkpoint_to_json(ck);
  Checkpoint back = checkpoint_from_json(text);
  CHECK(back.registry_hash == ck.registry_hash);
  CHECK(back.kappa == 12.0);
  CHECK(weights_flat(back.structure) == weights_flat(ck.structure));
  CHECK(back.theta.values_for(1)[0] == 1.5);
  CHECK(checkpoint_to_json(back) == text); // deterministic serialization
}
