// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fixtures.hpp"
#include "idc/data_io.hpp"
#include "idc/infer.hpp"
#include "idc/select.hpp"
#include "idc/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using idc::Index;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Index> slots(1, 200);
  std::uniform_int_distribution<Index> nk(1, 16);
  std::uniform_int_distribution<Index> dim(2, 32);
  std::uniform_real_distribution<double> u(-1, 1);
  int mismatches = 0;
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index n = slots(rng);
    const Index d = dim(rng);
    idc::MemoryBank<double> bank(0, n, d);
    std::vector<Eigen::VectorXd> keys;
    std::vector<double> values;
    for (Index i = 0; i < n; ++i) {
      // Every fourth instance repeats keys so ties are exercised.
      Eigen::VectorXd k = (t % 4 == 0 && i > 0 && u(rng) < 0) ? keys[static_cast<std::size_t>(i / 2)]
                                                                : oracle::random_vector(rng, d);
      const double v = u(rng);
      bank.write(k, v, "p");
      keys.push_back(k);
      values.push_back(v);
    }
    const Eigen::VectorXd q = oracle::random_vector(rng, d);
    const Index k = nk(rng);
    const auto r = bank.read(q, k);
    const auto o = oracle::brute_force_read(keys, values, q, k);
    if (r.selected != o.selected) ++mismatches;
    worst = std::max(worst, std::abs(r.score - o.score));
  }
  const double secs = seconds_since(t0);
  report(mismatches == 0 && worst <= 1e-9 && secs < 5.0, "oracle-equivalence",
         fmt("1000 instances, index mismatches=%d, max |score diff|=%.3g, %.2fs", mismatches, worst, secs));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  double worst[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto e = fixture::check_gradients(fixture::make_gradient_instance(1000 + seed));
    worst[0] = std::max(worst[0], e.encoder);
    worst[1] = std::max(worst[1], e.fc_head);
    worst[2] = std::max(worst[2], e.discriminator);
    worst[3] = std::max(worst[3], e.values);
  }
  bool grl_exact = true;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(0, 1);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd up = oracle::random_vector(rng, 7);
    const double l = lam(rng);
    const Eigen::VectorXd expected = -l * up;
    grl_exact = grl_exact && idc::grl_backward(up, l) == expected;
  }
  bool isolation = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = fixture::make_gradient_instance(5000 + seed);
    const auto no_idc = idc::evaluate_batch(g.model, g.source, g.target, g.lambda, {1, 1, 0});
    for (const auto& v : no_idc.grads.values) isolation = isolation && v.isZero(0);
    const auto idc_only = idc::evaluate_batch(g.model, g.source, g.target, g.lambda, {0, 0, 1});
    isolation = isolation && idc_only.grads.encoder.isZero(0);
  }
  const double secs = seconds_since(t0);
  const bool fd_ok = worst[0] <= 1e-4 && worst[1] <= 1e-4 && worst[2] <= 1e-4 && worst[3] <= 1e-4;
  report(fd_ok && grl_exact && isolation && secs < 30.0, "gradient-suite",
         fmt("60 instances, max rel err encoder=%.2g fc=%.2g disc=%.2g values=%.2g; GRL exact=%s; "
             "isolation=%s; %.2fs",
             worst[0], worst[1], worst[2], worst[3], grl_exact ? "yes" : "no", isolation ? "yes" : "no", secs));
}

void memory_lifecycle() {
  const auto t0 = Clock::now();
  const int classes = 3;
  const Index cap = 16;
  const Index dim = 5;
  const Index nk = 3;
  std::mt19937_64 rng(77);
  idc::MemoryBankSet<double> set(classes, cap, dim, nk);
  std::vector<oracle::ReplayBank> replay(classes);
  for (auto& r : replay) r.capacity = cap;
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::uniform_real_distribution<double> u(0, 1);
  bool size_ok = true;
  bool victims_ok = true;
  bool selections_ok = true;
  int evictions = 0;
  for (int e = 0; e < 10000; ++e) {
    const int c = cls(rng);
    auto& bank = set.bank(c);
    const Eigen::VectorXd v = oracle::random_vector(rng, dim);
    switch (kind(rng)) {
      case 0: {
        std::vector<unsigned long long> ages;
        for (const auto& s : bank.slots()) ages.push_back(s.age);
        const double value = u(rng);
        const auto w = bank.write(v, value, "e" + std::to_string(e));
        replay[c].write(v, value, "e" + std::to_string(e));
        if (w.kind == idc::WriteOutcome::Kind::evicted) {
          ++evictions;
          const auto max_age = *std::max_element(ages.begin(), ages.end());
          victims_ok = victims_ok && ages[static_cast<std::size_t>(w.slot_index)] == max_age;
        } else {
          victims_ok = victims_ok && static_cast<Index>(ages.size()) < cap;
        }
        break;
      }
      case 1: {
        if (bank.empty()) break;
        const auto r = bank.read(v, nk, false);
        const auto o = replay[c].read(v, nk);
        selections_ok = selections_ok && r.selected == o.selected;
        bank.touch(r.selected);
        replay[c].touch(o.selected);
        break;
      }
      default:
        set.refresh_with_target(v);
        for (auto& r : replay) {
          if (!r.slots.empty()) r.touch(r.read(v, nk).selected);
        }
    }
    for (const auto& b : set.banks()) size_ok = size_ok && b.size() <= cap;
  }
  bool state_ok = true;
  for (int c = 0; c < classes; ++c) {
    const auto& b = set.bank(c);
    state_ok = state_ok && static_cast<std::size_t>(b.size()) == replay[c].slots.size();
    for (Index i = 0; state_ok && i < b.size(); ++i) {
      const auto& s = b.slot(i);
      const auto& o = replay[c].slots[static_cast<std::size_t>(i)];
      state_ok = s.key == o.key && s.value == o.value && s.age == o.age && s.provenance == o.provenance;
    }
  }
  report(state_ok && size_ok && victims_ok && selections_ok, "memory-lifecycle",
         fmt("10000 events, %d evictions, final state %s, size<=N_m %s, victims max-age %s, %.2fs", evictions,
             state_ok ? "exact" : "DIFFERS", size_ok ? "yes" : "no", victims_ok ? "yes" : "no",
             seconds_since(t0)));
}

struct SeedRun {
  idc::Dataset data;
  idc::TrainResult trained;
};

std::vector<SeedRun> benchmark_runs(const std::vector<std::uint64_t>& seeds) {
  std::vector<SeedRun> runs;
  for (auto seed : seeds) {
    idc::SyntheticShiftSpec spec;
    spec.seed = seed;
    SeedRun r{idc::generate(spec), {}};
    idc::TrainConfig cfg;
    cfg.seed = seed;
    r.trained = idc::train(cfg, r.data.training_view());
    runs.push_back(std::move(r));
  }
  return runs;
}

void parity(const std::vector<SeedRun>& runs, double train_secs) {
  const auto t0 = Clock::now();
  double idc_sum = 0, fc_sum = 0;
  std::string per_seed;
  for (const auto& r : runs) {
    const auto rep = idc::evaluate_targets(r.trained.model, r.data);
    idc_sum += rep.idc.accuracy;
    fc_sum += rep.fc.accuracy;
    per_seed += fmt(" %.4f/%.4f", rep.idc.accuracy, rep.fc.accuracy);
  }
  const double n = static_cast<double>(runs.size());
  const double gap = std::abs(idc_sum / n - fc_sum / n);
  const double secs = train_secs + seconds_since(t0);
  report(gap <= 0.02 && secs < 600, "parity",
         fmt("mean target acc IDC=%.4f FC=%.4f |gap|=%.2fpp over %zu seeds (idc/fc:%s), %.1fs", idc_sum / n,
             fc_sum / n, 100 * gap, runs.size(), per_seed.c_str(), secs));
}

void rejection(const std::vector<SeedRun>& runs) {
  std::vector<double> rates;
  for (int k = 0; k <= 9; ++k) rates.push_back(k / 10.0);
  double at0 = 0, at90 = 0;
  bool prefix_ok = true;
  for (const auto& r : runs) {
    const auto scored = idc::score_targets(r.trained.model, r.data, false);
    const auto curve = idc::rejection_curve(scored, rates);
    at0 += curve.front().accuracy;
    at90 += curve.back().accuracy;
    // Retained sets are prefixes of one ranking: each is contained in the previous one
    // and the reported accuracy is that prefix's accuracy.
    const auto order = idc::confidence_ranking(scored);
    for (std::size_t k = 0; k < curve.size(); ++k) {
      const Index keep = curve[k].retained;
      prefix_ok = prefix_ok && keep == idc::retained_count(rates[k], static_cast<Index>(scored.size()));
      if (k > 0) prefix_ok = prefix_ok && keep <= curve[k - 1].retained;
      Index correct = 0;
      for (Index i = 0; i < keep; ++i) {
        const auto& p = scored[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        correct += p.predicted == p.truth;
        if (i + 1 < keep) {
          const auto& q = scored[static_cast<std::size_t>(order[static_cast<std::size_t>(i + 1)])];
          prefix_ok = prefix_ok && p.confidence >= q.confidence;
        }
      }
      const double acc = keep ? static_cast<double>(correct) / keep : 1.0;
      prefix_ok = prefix_ok && acc == curve[k].accuracy;
    }
  }
  const double n = static_cast<double>(runs.size());
  const double gain = (at90 - at0) / n;
  report(gain >= 0.05 && prefix_ok, "rejection",
         fmt("mean IDC acc at 0%%=%.4f, at 90%%=%.4f, gain=%.2fpp; prefix property %s", at0 / n, at90 / n,
             100 * gain, prefix_ok ? "exact" : "VIOLATED"));
}

void selection(const std::vector<SeedRun>& runs) {
  const auto t0 = Clock::now();
  const double ratio = 0.1;
  double random_s = 0, idc_s = 0, idc_m = 0;
  std::string per_seed;
  for (const auto& r : runs) {
    const auto view = r.data.training_view();
    const auto& cfg = r.trained.model.config;
    const auto run = [&](idc::ImportanceMethod m, idc::Strategy s) {
      const auto table = idc::importance_table(m, &r.trained.model, view, cfg.seed);
      auto plan = idc::apply_strategy(table, s, ratio, r.data.num_classes);
      plan.method = m;
      return idc::retrain_on_selection(plan, table, r.data, cfg).accuracy;
    };
    const double a = run(idc::ImportanceMethod::random, idc::Strategy::S);
    const double b = run(idc::ImportanceMethod::idc, idc::Strategy::S);
    const double c = run(idc::ImportanceMethod::idc, idc::Strategy::M);
    random_s += a;
    idc_s += b;
    idc_m += c;
    per_seed += fmt(" %.3f/%.3f/%.3f", a, b, c);
  }
  const double n = static_cast<double>(runs.size());
  const double secs = seconds_since(t0);
  report(idc_m >= random_s && idc_m >= idc_s && secs < 900, "selection",
         fmt("ratio 0.1 mean acc Random=%.4f IDC-S=%.4f IDC-M=%.4f over %zu seeds (rand/idc-s/idc-m:%s), %.1fs",
             random_s / n, idc_s / n, idc_m / n, runs.size(), per_seed.c_str(), secs));
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return status;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism() {
  const auto t0 = Clock::now();
  const auto root = fs::temp_directory_path() / ("idc_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string cli = IDC_CLI_PATH;
  bool ran = true;
  for (const char* run : {"a", "b"}) {
    const auto dir = (root / run).string();
    ran = ran && shell(cli + " gen-data --seed 13 --out " + dir) == 0;
    ran = ran && shell(cli + " train --seed 13 --data " + dir + "/embeddings.csv --out " + dir) == 0;
    ran = ran && shell(cli + " eval --data " + dir + "/embeddings.csv --labels " + dir +
                       "/target_labels.csv --model " + dir + "/model.json --out " + dir) == 0;
  }
  const auto a = slurp(root / "a" / "metrics.json");
  const auto b = slurp(root / "b" / "metrics.json");
  const bool same = ran && !a.empty() && a == b;
  fs::remove_all(root);
  report(same, "determinism",
         fmt("two CLI pipelines (gen-data, train, eval; seed 13): metrics.json %s (%zu bytes), %.1fs",
             same ? "byte-identical" : "DIFFERS", a.size(), seconds_since(t0)));
}

}  // namespace

int main() {
  oracle_equivalence();
  gradient_suite();
  memory_lifecycle();

  const auto t0 = Clock::now();
  const auto runs = benchmark_runs({0, 1, 2, 3, 4});
  const double train_secs = seconds_since(t0);
  parity(runs, train_secs);
  rejection(runs);
  selection(runs);
  determinism();

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
