#include "idc/infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace idc {

Prediction predict_feature(const MemoryBankSet<double>& banks, const Eigen::VectorXd& feature) {
  Prediction p;
  p.scores.resize(banks.num_classes());
  for (int c = 0; c < banks.num_classes(); ++c) {
    if (banks.bank(c).empty()) {
      throw Error(Errc::EmptyBank, "memory bank " + std::to_string(c) + " is empty");
    }
  }
  for (int c = 0; c < banks.num_classes(); ++c) {
    auto r = banks.read(c, feature);
    p.scores(c) = r.score;
    p.evidence.push_back(std::move(r.evidence));
  }
  p.predicted_class = static_cast<int>(argmax(p.scores));
  p.confidence = p.scores(p.predicted_class);
  return p;
}

Prediction predict(const Model& model, const Eigen::VectorXd& x) {
  return predict_feature(model.banks, model.encode(x));
}

FcPrediction fc_predict(const Model& model, const Eigen::VectorXd& x) {
  FcPrediction p;
  p.probs = model.fc_probabilities(model.encode(x));
  p.predicted_class = static_cast<int>(argmax(p.probs));
  p.confidence = p.probs(p.predicted_class);
  return p;
}

Explanation explain(const Model& model, const Eigen::VectorXd& x, Index top_n,
                    std::string sample_id) {
  if (top_n < 1) throw Error(Errc::ConfigInvalid, "explain needs top_n >= 1");
  Prediction p = predict(model, x);
  Explanation e;
  e.sample_id = std::move(sample_id);
  e.predicted_class = p.predicted_class;
  e.scores = p.scores;
  auto items = std::move(p.evidence[static_cast<std::size_t>(p.predicted_class)]);
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.contribution > b.contribution; });
  const auto n = std::min(static_cast<std::size_t>(top_n), items.size());
  e.most.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n));
  e.least.assign(items.rbegin(), items.rbegin() + static_cast<std::ptrdiff_t>(n));
  return e;
}

std::vector<Index> confidence_ranking(std::span<const ScoredPrediction> predictions) {
  std::vector<Index> order(predictions.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return predictions[static_cast<std::size_t>(a)].confidence >
           predictions[static_cast<std::size_t>(b)].confidence;
  });
  return order;
}

Index retained_count(double rate, Index n) {
  const double keep = (1.0 - rate) * static_cast<double>(n);
  const auto count = static_cast<Index>(std::ceil(keep - 1e-9));
  return std::clamp<Index>(count, 0, n);
}

RejectionCurve rejection_curve(std::span<const ScoredPrediction> predictions,
                               std::span<const double> rates) {
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0 && rates[i] <= 1.0)) {
      throw Error(Errc::ConfigInvalid, "rejection rate outside [0,1]");
    }
    if (i > 0 && !(rates[i] > rates[i - 1])) {
      throw Error(Errc::ConfigInvalid, "rejection rates must be strictly increasing");
    }
  }
  const auto order = confidence_ranking(predictions);
  const auto n = static_cast<Index>(predictions.size());
  // correct_prefix[k] = number correct among the k most confident samples.
  std::vector<Index> correct_prefix(order.size() + 1, 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& p = predictions[static_cast<std::size_t>(order[k])];
    correct_prefix[k + 1] = correct_prefix[k] + (p.predicted == p.truth ? 1 : 0);
  }
  RejectionCurve curve;
  for (double r : rates) {
    const Index keep = retained_count(r, n);
    const double acc =
        keep == 0 ? 1.0
                  : static_cast<double>(correct_prefix[static_cast<std::size_t>(keep)]) / keep;
    curve.push_back({r, acc, keep});
  }
  return curve;
}

std::vector<ScoredPrediction> score_targets(const Model& model, const Dataset& data,
                                            bool use_fc) {
  if (data.target_labels.size() != data.target.size()) {
    throw Error(Errc::ConfigInvalid, "target ground-truth labels unavailable");
  }
  std::vector<ScoredPrediction> out;
  out.reserve(data.target.size());
  for (std::size_t i = 0; i < data.target.size(); ++i) {
    if (use_fc) {
      const auto p = fc_predict(model, data.target[i].x);
      out.push_back({p.confidence, p.predicted_class, data.target_labels[i]});
    } else {
      const Eigen::VectorXd f = model.encode(data.target[i].x);
      const auto& banks = model.banks;
      Eigen::VectorXd scores(banks.num_classes());
      for (int c = 0; c < banks.num_classes(); ++c) scores(c) = banks.read(c, f, false).score;
      const auto cls = static_cast<int>(argmax(scores));
      out.push_back({scores(cls), cls, data.target_labels[i]});
    }
  }
  return out;
}

ClassificationMetrics classification_metrics(std::span<const ScoredPrediction> predictions,
                                             int num_classes) {
  ClassificationMetrics m;
  m.count = static_cast<Index>(predictions.size());
  std::vector<Index> hits(static_cast<std::size_t>(num_classes), 0);
  std::vector<Index> totals(static_cast<std::size_t>(num_classes), 0);
  Index correct = 0;
  for (const auto& p : predictions) {
    if (p.truth < 0 || p.truth >= num_classes) {
      throw Error(Errc::LabelOutOfRange, "ground-truth label out of range");
    }
    ++totals[static_cast<std::size_t>(p.truth)];
    if (p.predicted == p.truth) {
      ++correct;
      ++hits[static_cast<std::size_t>(p.truth)];
    }
  }
  m.accuracy = m.count ? static_cast<double>(correct) / m.count : 0.0;
  double sum = 0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto t = totals[static_cast<std::size_t>(c)];
    const double acc = t ? static_cast<double>(hits[static_cast<std::size_t>(c)]) / t : 0.0;
    m.per_class_accuracy.push_back(acc);
    if (t) {
      sum += acc;
      ++present;
    }
  }
  m.mean_class_accuracy = present ? sum / present : 0.0;
  return m;
}

EvalReport evaluate_targets(const Model& model, const Dataset& data) {
  const auto idc = score_targets(model, data, false);
  const auto fc = score_targets(model, data, true);
  return {classification_metrics(idc, data.num_classes),
          classification_metrics(fc, data.num_classes)};
}

}  // namespace idc
