#include "idc/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "idc/random.hpp"

namespace idc {

const char* to_string(ImportanceMethod m) {
  switch (m) {
    case ImportanceMethod::random: return "random";
    case ImportanceMethod::in: return "in";
    case ImportanceMethod::adv: return "adv";
    case ImportanceMethod::idc: return "idc";
  }
  return "?";
}

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::S: return "s";
    case Strategy::P: return "p";
    case Strategy::M: return "m";
  }
  return "?";
}

const char* to_string(SelectedBy s) {
  switch (s) {
    case SelectedBy::none: return "none";
    case SelectedBy::class_quota: return "class";
    case SelectedBy::global: return "global";
  }
  return "?";
}

ImportanceMethod importance_method_from_string(const std::string& s) {
  if (s == "random") return ImportanceMethod::random;
  if (s == "in") return ImportanceMethod::in;
  if (s == "adv") return ImportanceMethod::adv;
  if (s == "idc") return ImportanceMethod::idc;
  throw Error(Errc::UsageError, "unknown importance method '" + s + "'");
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "s" || s == "S") return Strategy::S;
  if (s == "p" || s == "P") return Strategy::P;
  if (s == "m" || s == "M") return Strategy::M;
  throw Error(Errc::UsageError, "unknown selection strategy '" + s + "'");
}

std::vector<double> importance_similarity(std::span<const Eigen::VectorXd> source_features,
                                          std::span<const Eigen::VectorXd> target_features) {
  if (target_features.empty()) throw Error(Errc::EmptyTargetSet, "no target features");
  std::vector<double> tnorm;
  tnorm.reserve(target_features.size());
  for (const auto& t : target_features) {
    tnorm.push_back(t.norm());
    if (!(tnorm.back() > 0)) throw Error(Errc::ZeroNormVector, "target feature has zero norm");
  }
  std::vector<double> out;
  out.reserve(source_features.size());
  for (const auto& s : source_features) {
    if (s.size() != target_features.front().size()) {
      throw Error(Errc::DimensionMismatch, "source and target feature dimensions differ");
    }
    const double sn = s.norm();
    if (!(sn > 0)) throw Error(Errc::ZeroNormVector, "source feature has zero norm");
    double acc = 0;
    for (std::size_t j = 0; j < target_features.size(); ++j) {
      acc += normalized_similarity(s, sn, target_features[j], tnorm[j]);
    }
    out.push_back(acc / static_cast<double>(target_features.size()));
  }
  return out;
}

double representative_score(const Model& model, const LabeledSample& sample,
                            const Eigen::VectorXd& feature) {
  const auto& bank = model.banks.bank(sample.label);
  const Index slot = bank.find_latest(sample.id);
  if (slot >= 0) return bank.slot(slot).value;
  return model.banks.read(sample.label, feature, false).score;
}

namespace {

std::vector<Eigen::VectorXd> encode_all(const Model& model, auto samples) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(model.encode(s.x));
  return out;
}

}  // namespace

std::vector<double> importance_idc(const Model& model, std::span<const LabeledSample> sources,
                                   std::span<const UnlabeledSample> targets) {
  if (targets.empty()) throw Error(Errc::EmptyTargetSet, "no target samples");
  const auto fs = encode_all(model, sources);
  const auto ft = encode_all(model, targets);
  std::vector<double> out = importance_similarity(fs, ft);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out[i] *= representative_score(model, sources[i], fs[i]);
  }
  return out;
}

ImportanceTable importance_table(ImportanceMethod method, const Model* model,
                                 const TrainingView& data, std::uint64_t seed) {
  if (data.target.empty()) throw Error(Errc::EmptyTargetSet, "no target samples");
  if ((method == ImportanceMethod::adv || method == ImportanceMethod::idc) && !model) {
    throw Error(Errc::ConfigInvalid, std::string(to_string(method)) + " importance needs a model");
  }
  std::vector<double> scores;
  switch (method) {
    case ImportanceMethod::random: {
      auto rng = make_stream(seed, "select-random");
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t i = 0; i < data.source.size(); ++i) scores.push_back(u(rng));
      break;
    }
    case ImportanceMethod::in: {
      std::vector<Eigen::VectorXd> fs, ft;
      for (const auto& s : data.source) fs.push_back(s.x);
      for (const auto& t : data.target) ft.push_back(t.x);
      scores = importance_similarity(fs, ft);
      break;
    }
    case ImportanceMethod::adv:
      scores = importance_similarity(encode_all(*model, data.source), encode_all(*model, data.target));
      break;
    case ImportanceMethod::idc:
      scores = importance_idc(*model, data.source, data.target);
      break;
  }
  ImportanceTable table;
  table.reserve(data.source.size());
  for (std::size_t i = 0; i < data.source.size(); ++i) {
    table.push_back({data.source[i].id, data.source[i].label, scores[i]});
  }
  return table;
}

Index selection_quota(double ratio, Index n) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "selection ratio must be in (0,1]");
  }
  const auto q = static_cast<Index>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  return std::clamp<Index>(q, 1, std::max<Index>(n, 1));
}

std::vector<Index> largest_remainder(std::span<const Index> class_sizes, Index total) {
  const Index n = std::accumulate(class_sizes.begin(), class_sizes.end(), Index{0});
  std::vector<Index> alloc(class_sizes.size(), 0);
  if (n == 0) return alloc;
  std::vector<Index> remainder(class_sizes.size(), 0);
  Index assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    alloc[c] = total * class_sizes[c] / n;
    remainder[c] = total * class_sizes[c] % n;
    assigned += alloc[c];
  }
  std::vector<std::size_t> order(class_sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; k < order.size() && assigned < total; ++k, ++assigned) {
    ++alloc[order[k]];
  }
  return alloc;
}

SelectionPlan apply_strategy(const ImportanceTable& table, Strategy strategy, double ratio,
                             int num_classes, double mixture_split) {
  if (table.empty()) throw Error(Errc::EmptyInput, "empty importance table");
  if (!(mixture_split >= 0.0 && mixture_split <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "mixture split must be in [0,1]");
  }
  const auto n = static_cast<Index>(table.size());
  SelectionPlan plan;
  plan.strategy = strategy;
  plan.ratio = ratio;
  plan.quota = selection_quota(ratio, n);
  plan.selected_by.assign(table.size(), SelectedBy::none);

  // Rows by importance, highest first, lower row first on ties.
  std::vector<Index> ranked(table.size());
  std::iota(ranked.begin(), ranked.end(), Index{0});
  std::stable_sort(ranked.begin(), ranked.end(), [&](Index a, Index b) {
    return table[static_cast<std::size_t>(a)].importance > table[static_cast<std::size_t>(b)].importance;
  });
  std::vector<std::vector<Index>> ranked_by_class(static_cast<std::size_t>(num_classes));
  for (Index r : ranked) {
    const int label = table[static_cast<std::size_t>(r)].label;
    if (label < 0 || label >= num_classes) throw Error(Errc::LabelOutOfRange, "label out of range");
    ranked_by_class[static_cast<std::size_t>(label)].push_back(r);
  }

  auto take = [&](Index row, SelectedBy how) {
    plan.selected_by[static_cast<std::size_t>(row)] = how;
    plan.selected.push_back(row);
  };
  auto take_per_class = [&](const std::vector<Index>& want) {
    for (std::size_t c = 0; c < want.size(); ++c) {
      const auto& rows = ranked_by_class[c];
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(want[c]), rows.size());
      for (std::size_t j = 0; j < k; ++j) take(rows[j], SelectedBy::class_quota);
    }
  };

  if (strategy == Strategy::P) {
    std::vector<Index> sizes;
    for (const auto& rows : ranked_by_class) sizes.push_back(static_cast<Index>(rows.size()));
    take_per_class(largest_remainder(sizes, plan.quota));
  } else if (strategy == Strategy::M) {
    const auto even = static_cast<Index>(std::floor(mixture_split * plan.quota + 1e-9));
    std::vector<Index> want(static_cast<std::size_t>(num_classes), even / num_classes);
    for (Index c = 0; c < even % num_classes; ++c) ++want[static_cast<std::size_t>(c)];
    take_per_class(want);
  }
  for (Index r : ranked) {
    if (static_cast<Index>(plan.selected.size()) >= plan.quota) break;
    if (plan.selected_by[static_cast<std::size_t>(r)] == SelectedBy::none) take(r, SelectedBy::global);
  }

  plan.per_class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (Index r : plan.selected) ++plan.per_class_counts[static_cast<std::size_t>(table[static_cast<std::size_t>(r)].label)];
  return plan;
}

Dataset subset_sources(const Dataset& data, const ImportanceTable& table,
                       const SelectionPlan& plan) {
  if (table.size() != data.source.size()) {
    throw Error(Errc::ShapeMismatch, "importance table does not match the source set");
  }
  Dataset out;
  out.num_classes = data.num_classes;
  out.dim = data.dim;
  out.target = data.target;
  out.target_labels = data.target_labels;
  for (std::size_t i = 0; i < data.source.size(); ++i) {
    if (table[i].id != data.source[i].id) {
      throw Error(Errc::ShapeMismatch, "importance table row order differs from the source set");
    }
    if (plan.selected_by[i] != SelectedBy::none) out.source.push_back(data.source[i]);
  }
  return out;
}

RetrainResult retrain_on_selection(const SelectionPlan& plan, const ImportanceTable& table,
                                   const Dataset& data, const TrainConfig& config) {
  if (plan.selected.empty()) throw Error(Errc::EmptyInput, "selection is empty");
  const Dataset subset = subset_sources(data, table, plan);
  const TrainResult trained = train(config, subset.training_view(), /*require_every_class=*/false);
  RetrainResult r;
  const auto fc = score_targets(trained.model, subset, true);
  r.report.fc = classification_metrics(fc, data.num_classes);
  bool banks_ready = true;
  for (const auto& b : trained.model.banks.banks()) banks_ready = banks_ready && !b.empty();
  if (banks_ready) {
    const auto idc = score_targets(trained.model, subset, false);
    r.report.idc = classification_metrics(idc, data.num_classes);
  }
  r.accuracy = r.report.fc.accuracy;
  return r;
}

std::vector<SweepCell> run_sweep(const Dataset& data, const TrainConfig& config,
                                 const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  for (auto m : spec.methods)
    for (auto s : spec.strategies)
      for (double r : spec.ratios) cells.push_back({m, s, r, {}, 0, 0});

  for (std::uint64_t seed : spec.seeds) {
    TrainConfig cfg = config;
    cfg.seed = seed;
    const TrainResult interpreter = train(cfg, data.training_view());
    std::size_t k = 0;
    for (auto m : spec.methods) {
      const auto table = importance_table(m, &interpreter.model, data.training_view(), seed);
      for (auto s : spec.strategies) {
        for (double r : spec.ratios) {
          const auto plan = apply_strategy(table, s, r, data.num_classes, spec.mixture_split);
          cells[k++].accuracies.push_back(retrain_on_selection(plan, table, data, cfg).accuracy);
        }
      }
    }
  }
  for (auto& c : cells) {
    const auto n = static_cast<double>(c.accuracies.size());
    if (n == 0) continue;
    c.mean = std::accumulate(c.accuracies.begin(), c.accuracies.end(), 0.0) / n;
    double ss = 0;
    for (double a : c.accuracies) ss += (a - c.mean) * (a - c.mean);
    c.stddev = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  }
  return cells;
}

}  // namespace idc
