// Acceptance driver: one PASS/FAIL line per criterion.
//
//   acceptance [fast] [matrix] [predprey]     (no argument runs all groups)
//
// fast: operator suite (3), exploration (4), mixer/IGM (5), gradients (6)
// matrix: matrix-game reproductions (1, 2)
// predprey: predator-prey comparison (7)

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "optmarl/envs/matrix_game.hpp"
#include "optmarl/exploration/policy.hpp"
#include "optmarl/networks/joint_critic.hpp"
#include "optmarl/networks/mixer.hpp"
#include "optmarl/networks/recurrent_net.hpp"
#include "optmarl/optimistic/operator.hpp"
#include "optmarl/optimistic/probe.hpp"
#include "optmarl/training/trainer.hpp"
#include "support.hpp"

using namespace optmarl;
using diffcore::Graph;
using diffcore::Matrix;
using diffcore::ParameterStore;
using diffcore::Var;
using testsupport::random_matrix;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---- 3: optimistic operator -------------------------------------------------

void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long long invariant_violations = 0;
  for (int trial = 0; trial < 1000000; ++trial) {
    const int support = 2 + static_cast<int>(rng() % 4);
    std::array<double, 5> values{};
    double r_max = -1e300;
    for (int k = 0; k < support; ++k) {
      values[static_cast<std::size_t>(k)] = std::round(40.0 * u(rng) - 20.0);
      r_max = std::max(r_max, values[static_cast<std::size_t>(k)]);
    }
    const double alpha = u(rng), f0 = r_max - 25.0 * u(rng);
    optimistic::OptimisticScalar f{f0, alpha};
    optimistic::LowerBoundScalar lo{f0, alpha, r_max};
    for (int t = 0; t < 30; ++t) {
      const double r = values[rng() % static_cast<std::size_t>(support)];
      const double before = f.value;
      f = optimistic::opt_update(f, r);
      lo = optimistic::lower_bound_update(lo, r);
      if (f.value < before || f.value > r_max || f.value < lo.value) ++invariant_violations;
    }
  }

  double closed_err = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const double alpha = u(rng), r_max = 40.0 * u(rng) - 20.0, f0 = r_max - 30.0 * u(rng);
    optimistic::LowerBoundScalar lo{f0, alpha, r_max};
    for (int n = 1; n <= 60; ++n) {
      lo = optimistic::lower_bound_update(lo, r_max);
      closed_err = std::max(closed_err, std::abs(lo.value - optimistic::closed_form_after_n(f0, r_max, alpha, n)));
    }
  }

  optimistic::ConvergenceProbeConfig cfg;
  cfg.seed = 103;
  cfg.horizon = 40;
  int mean_misses = 0, tail_misses = 0, probed = 0;
  double worst_z = 0.0;
  for (double eps_tol : {0.5, 1.0, 2.0}) {
    for (const auto& row : optimistic::convergence_probe(cfg, eps_tol)) {
      ++probed;
      if (row.empirical_tail > optimistic::tail_allowance(row.markov_bound, cfg.trials)) ++tail_misses;
      if (eps_tol != 1.0) continue;
      if (row.lower_std_error == 0.0) {
        if (row.mean_lower != row.expected_f) ++mean_misses;
        continue;
      }
      const double z = std::abs(row.mean_lower - row.expected_f) / row.lower_std_error;
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ++mean_misses;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = invariant_violations == 0 && closed_err <= 1e-12 && mean_misses == 0 && tail_misses == 0 && secs < 60.0;
  report(3, ok,
         "invariant violations (monotone, <= r_max, >= lower bound) " + std::to_string(invariant_violations) +
             " over 1e6 streams; closed-form max err " +
             fmt("%.2e", closed_err) + "; mean misses " + std::to_string(mean_misses) + " (worst z " +
             fmt("%.2f", worst_z) + "); tail misses " + std::to_string(tail_misses) + "/" + std::to_string(probed) +
             "; " + fmt("%.1f s", secs));
}

// ---- 4: optimistic exploration never hurts a* ------------------------------

void criterion4() {
  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 3.0);
  long long violations = 0;
  for (int trial = 0; trial < 100000; ++trial) {
    const std::size_t A = 1 + rng() % 10;
    std::vector<double> q(A), f(A);
    for (auto& v : q) v = n(rng);
    for (auto& v : f) v = n(rng);
    if (trial % 7 == 0) f.assign(A, f[0]);
    const double eps = u(rng);
    const auto a_star = static_cast<std::size_t>(exploration::argmax(f));
    if (exploration::optimistic_epsilon_greedy_dist(q, f, eps)[a_star] < exploration::epsilon_greedy_dist(q, eps)[a_star])
      ++violations;
  }
  report(4, violations == 0, std::to_string(violations) + " violations over 1e5 draws");
}

// ---- 5: monotone mixing and argmax consistency -----------------------------

void criterion5() {
  std::mt19937_64 r(109);
  std::uniform_real_distribution<double> delta(1e-3, 2.0);
  long long mono = 0, igm = 0;
  double min_grad = INFINITY;
  for (int trial = 0; trial < 1000; ++trial) {
    for (auto kind : {networks::MixerKind::Qmix, networks::MixerKind::Vdn}) {
      ParameterStore s;
      networks::Mixer m(kind, 2, 3, 8);
      diffcore::Rng rng(r());
      m.declare(s, rng);
      const Eigen::VectorXd state = random_matrix(3, 1, r);
      const Matrix q = random_matrix(2, 3, r, 3.0);
      double best = -INFINITY;
      int ba = -1, bb = -1;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const std::array<double, 2> pair{q(0, a), q(1, b)};
          const double v = networks::mix_value(m, s, pair, state);
          if (v > best) best = v, ba = a, bb = b;
          if (kind != networks::MixerKind::Qmix) continue;
          for (std::size_t i = 0; i < 2; ++i) {
            auto up = pair;
            up[i] += delta(r);
            if (networks::mix_value(m, s, up, state) < v) ++mono;
          }
        }
      const Eigen::RowVectorXd q0 = q.row(0), q1 = q.row(1);
      if (ba != exploration::argmax(std::span<const double>(q0.data(), 3)) ||
          bb != exploration::argmax(std::span<const double>(q1.data(), 3)))
        ++igm;
      if (kind == networks::MixerKind::Qmix) {
        s.add("q", 1, 2).value = q.col(0).transpose();
        Graph g;
        g.backward(m.mix(g, s, g.parameter(s.at("q")), g.constant(state.transpose())));
        min_grad = std::min(min_grad, s.at("q").grad.minCoeff());
        if (s.at("q").grad.minCoeff() < -1e-9) ++mono;
      }
    }
  }
  report(5, mono == 0 && igm == 0,
         "monotonicity violations " + std::to_string(mono) + " (min dQtot/dq " + fmt("%.3g", min_grad) +
             "), argmax mismatches " + std::to_string(igm) + " over 1000 trials");
}

// ---- 6: finite-difference gradients ----------------------------------------

struct FamilyResult {
  std::string name;
  int passed = 0;
  int total = 0;
  double worst = 0.0;
};

template <typename MakeLoss>
FamilyResult fd_family(const std::string& name, int trials, std::uint64_t seed, MakeLoss make) {
  FamilyResult out{name};
  std::mt19937_64 r(seed);
  for (int t = 0; t < trials; ++t) {
    ParameterStore s;
    const testsupport::LossFn loss = make(s, r);
    const auto check = testsupport::finite_difference_check(s, loss);
    out.worst = std::max(out.worst, check.rel_error);
    ++out.total;
    if (check.rel_error < 1e-4) ++out.passed;
  }
  return out;
}

void criterion6() {
  using namespace diffcore;
  std::vector<FamilyResult> fams;
  fams.push_back(fd_family("mlp", 100, 201, [](ParameterStore& s, std::mt19937_64& r) -> testsupport::LossFn {
    auto l1 = std::make_shared<DenseLayer>(DenseLayer{"l1", 4, 6});
    auto l2 = std::make_shared<DenseLayer>(DenseLayer{"l2", 6, 2});
    l1->declare(s, r);
    l2->declare(s, r);
    const Matrix x = random_matrix(5, 4, r), y = random_matrix(5, 2, r);
    return [=](Graph& g, ParameterStore& st) {
      Var h = relu(l1->bind(g, st)(g.constant(x)));
      return sum_all(square(sub(l2->bind(g, st)(h), g.constant(y))));
    };
  }));
  fams.push_back(fd_family("gru", 100, 202, [](ParameterStore& s, std::mt19937_64& r) -> testsupport::LossFn {
    auto gru = std::make_shared<GruLayer>(GruLayer{"gru", 3, 4});
    gru->declare(s, r);
    s.add("h0", 2, 4).value = random_matrix(2, 4, r, 0.5);
    const Matrix x1 = random_matrix(2, 3, r), x2 = random_matrix(2, 3, r), w = random_matrix(2, 4, r);
    return [=](Graph& g, ParameterStore& st) {
      auto cell = gru->bind(g, st);
      Var h = cell(g.constant(x2), cell(g.constant(x1), g.parameter(st.at("h0"))));
      return sum_all(mul(h, g.constant(w)));
    };
  }));
  for (const char* prefix : {"agent", "opt"}) {
    fams.push_back(fd_family(std::string(prefix) + "-net", 100, 203,
                             [prefix](ParameterStore& s, std::mt19937_64& r) -> testsupport::LossFn {
                               auto net = std::make_shared<networks::RecurrentNet>(prefix, 4, 5, 3);
                               diffcore::Rng rng(r());
                               net->declare(s, rng);
                               const Matrix in = random_matrix(3 * 2, 4, r), w = random_matrix(3 * 2, 3, r);
                               return [=](Graph& g, ParameterStore& st) {
                                 auto seq = net->unroll(g, net->bind(g, st), g.constant(in), 2);
                                 return sum_all(mul(seq.outputs, g.constant(w)));
                               };
                             }));
  }
  for (auto kind : {networks::MixerKind::Qmix, networks::MixerKind::Vdn}) {
    fams.push_back(fd_family(kind == networks::MixerKind::Qmix ? "qmix-mixer" : "vdn-mixer", 100, 205,
                             [kind](ParameterStore& s, std::mt19937_64& r) -> testsupport::LossFn {
                               auto m = std::make_shared<networks::Mixer>(kind, 3, 4, 5);
                               diffcore::Rng rng(r());
                               m->declare(s, rng);
                               s.add("q", 4, 3).value = random_matrix(4, 3, r);
                               const Matrix state = random_matrix(4, 4, r), y = random_matrix(4, 1, r);
                               return [=](Graph& g, ParameterStore& st) {
                                 Var q = g.parameter(st.at("q"));
                                 return sum_all(square(sub(m->mix(g, st, q, g.constant(state)), g.constant(y))));
                               };
                             }));
  }
  fams.push_back(fd_family("joint-critic", 100, 207, [](ParameterStore& s, std::mt19937_64& r) -> testsupport::LossFn {
    auto c = std::make_shared<networks::JointCritic>(2, 3, 4, 5, 6, 3);
    diffcore::Rng rng(r());
    c->declare(s, rng);
    const Eigen::Index B = 3, steps = 2;
    Matrix in = Matrix::Zero(steps * B * 2, c->features().input_dim());
    for (Eigen::Index k = 0; k < in.rows(); ++k)
      in.row(k) = c->feature_input(random_matrix(4, 1, r), static_cast<int>(r() % 3), static_cast<int>(k % 2));
    const Matrix state = random_matrix(steps * B, 5, r), y = random_matrix(steps * B, 1, r);
    return [=](Graph& g, ParameterStore& st) {
      auto seq = c->features().unroll(g, c->features().bind(g, st), g.constant(in), B * 2);
      return sum_all(square(sub(c->head(g, st, seq.outputs, g.constant(state)), g.constant(y))));
    };
  }));

  bool ok = true;
  std::string detail;
  for (const auto& f : fams) {
    ok = ok && f.passed == f.total && f.total >= 100;
    detail += f.name + " " + std::to_string(f.passed) + "/" + std::to_string(f.total) + " (worst " +
              fmt("%.1e", f.worst) + ") ";
  }
  report(6, ok, detail);
}

// ---- 1, 2: matrix game -----------------------------------------------------

struct MatrixOutcome {
  int a0 = -1, a1 = -1;
  double q11 = 0.0;
};

MatrixOutcome matrix_run(const std::string& algo, std::uint64_t seed) {
  training::RunConfig cfg = training::RunConfig::preset("matrix");
  cfg.algo = algo;
  cfg.seed = seed;
  training::TrainingRun run(cfg);
  run.run();
  envs::MatrixGame env;
  const Matrix table = training::joint_value_table(env, run.bundle());
  const auto& s = env.reset(0);
  const Matrix hidden = Matrix::Zero(2, run.bundle().agent().hidden_dim());
  const Matrix q =
      networks::agent_forward(run.bundle().agent(), run.bundle().live(), run.bundle().agent_inputs(s.obs), hidden).first;
  MatrixOutcome out;
  Eigen::Index best = 0;
  q.row(0).maxCoeff(&best);
  out.a0 = static_cast<int>(best);
  q.row(1).maxCoeff(&best);
  out.a1 = static_cast<int>(best);
  out.q11 = table(0, 0);
  std::fprintf(stderr, "  matrix %-8s seed %llu: greedy (a%d,a%d) Qtot(a1,a1) %.3f\n", algo.c_str(),
               static_cast<unsigned long long>(seed), out.a0 + 1, out.a1 + 1, out.q11);
  return out;
}

void criteria1and2() {
  int opt_hits = 0, qmix_hits = 0, vdn_hits = 0;
  std::string opt_vals, qmix_vals;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto o = matrix_run("opt-qmix", seed);
    if (o.a0 == 0 && o.a1 == 0 && std::abs(o.q11 - 8.0) <= 1.5) ++opt_hits;
    opt_vals += fmt("%.2f ", o.q11);
  }
  report(1, opt_hits >= 8,
         "opt-qmix optimal with Qtot(a1,a1) in 8+-1.5 in " + std::to_string(opt_hits) + "/10 seeds; Qtot(a1,a1): " +
             opt_vals);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto q = matrix_run("qmix", seed);
    if (!(q.a0 == 0 && q.a1 == 0) && q.q11 < 0.0) ++qmix_hits;
    qmix_vals += fmt("%.2f ", q.q11);
    const auto v = matrix_run("vdn", seed);
    if (!(v.a0 == 0 && v.a1 == 0)) ++vdn_hits;
  }
  report(2, qmix_hits >= 8 && vdn_hits >= 8,
         "qmix suboptimal with Qtot(a1,a1) < 0 in " + std::to_string(qmix_hits) + "/10 seeds; vdn suboptimal in " +
             std::to_string(vdn_hits) + "/10; qmix Qtot(a1,a1): " + qmix_vals);
}

// ---- 7: predator-prey ------------------------------------------------------

double predprey_final(const std::string& algo, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  training::RunConfig cfg = training::RunConfig::preset("predprey");
  cfg.algo = algo;
  cfg.seed = seed;
  const auto rows = training::train_run(cfg);
  const double ret = rows.back().eval_mean_return;
  std::fprintf(stderr, "  predprey %-8s seed %llu: final greedy return %.3f (%.0f s)\n", algo.c_str(),
               static_cast<unsigned long long>(seed), ret, seconds_since(t0));
  return ret;
}

void criterion7() {
  int wins = 0;
  bool qmix_collapsed = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double o = predprey_final("opt-qmix", seed);
    const double q = predprey_final("qmix", seed);
    if (o > 0.0 && o > q) ++wins;
    if (q > 1.0) qmix_collapsed = false;
    detail += fmt("s%.0f %.2f/%.2f ", static_cast<double>(seed), o, q);
  }
  report(7, wins >= 4 && qmix_collapsed,
         "opt-qmix > max(0, qmix) in " + std::to_string(wins) + "/5 seeds; qmix <= 1 in all seeds: " +
             (qmix_collapsed ? "yes" : "no") + "; final opt/qmix: " + detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> groups(argv + 1, argv + argc);
  if (groups.empty()) groups = {"fast", "matrix", "predprey"};
  for (const auto& g : groups)
    if (g != "fast" && g != "matrix" && g != "predprey") {
      std::fprintf(stderr, "unknown group '%s' (expected fast, matrix or predprey)\n", g.c_str());
      return 2;
    }
  if (groups.count("matrix")) criteria1and2();
  if (groups.count("fast")) {
    criterion3();
    criterion4();
    criterion5();
    criterion6();
  }
  if (groups.count("predprey")) criterion7();
  return failures == 0 ? 0 : 1;
}
