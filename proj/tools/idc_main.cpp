// idc: command-line driver for memory-bank classification under domain shift.
//
//   idc gen-data --out DIR [--config FILE] [--seed N]
//   idc train    --data FILE --out DIR [--config FILE] [--seed N] [--iterations N]
//   idc eval     --data FILE --labels FILE --model FILE --out DIR
//   idc explain  --data FILE --model FILE --sample-id ID [--top N] --out DIR
//   idc reject   --data FILE --labels FILE --model FILE [--rates R,...] --out DIR
//   idc select   --data FILE --model FILE --method M --strategy S --ratio R
//                [--retrain --labels FILE] --out DIR
//   idc sweep    --data FILE --labels FILE --out DIR [--methods ..] [--strategies ..]
//                [--ratios ..] [--seeds ..]

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "idc/data_io.hpp"
#include "idc/infer.hpp"
#include "idc/run_config.hpp"
#include "idc/select.hpp"
#include "idc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string data_path;
  std::string labels_path;
  std::string model_path;
  std::optional<int> iterations;
  std::string sample_id;
  int top = 3;
  std::string rates = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  std::string classifier = "idc";
  std::string method;
  std::string strategy;
  std::optional<double> ratio;
  std::optional<double> mixture_split;
  bool retrain = false;
  std::string methods = "random,in,adv,idc";
  std::string strategies = "s,p,m";
  std::string ratios = "0.05,0.1,0.5";
  std::string seeds = "0,1,2,3,4";
};

std::string fmt_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* flag) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw idc::Error(idc::Errc::UsageError, std::string("bad number '") + item + "' in " + flag);
    }
  }
  return out;
}

idc::RunConfig load_run_config(const Options& o) {
  idc::RunConfig rc = o.config_path.empty() ? idc::RunConfig{} : idc::RunConfig::load(o.config_path);
  if (o.seed) rc.seed = *o.seed;
  return rc;
}

/// Commands that start from a trained model inherit its training config and seed.
void adopt_model_config(idc::RunConfig& rc, const idc::Model& model, const Options& o) {
  rc.train = model.config;
  rc.seed = o.seed ? *o.seed : model.config.seed;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw idc::Error(idc::Errc::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

void echo_config(const std::string& command, const idc::RunConfig& rc, const Options& o) {
  ordered_json inputs;
  if (!o.config_path.empty()) inputs["config"] = o.config_path;
  if (!o.data_path.empty()) inputs["data"] = o.data_path;
  if (!o.labels_path.empty()) inputs["labels"] = o.labels_path;
  if (!o.model_path.empty()) inputs["model"] = o.model_path;
  ordered_json j{{"command", command},
                 {"config_hash", rc.hash()},
                 {"config", rc.to_json()},
                 {"inputs", inputs}};
  write_text(fs::path(o.out_dir) / "config.json", j.dump(2) + "\n");
}

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw idc::Error(idc::Errc::IoError, "cannot create '" + o.out_dir + "': " + ec.message());
  return dir;
}

idc::Dataset load_data(const Options& o, bool with_labels) {
  idc::Dataset d = idc::from_embedding_file(idc::load_embeddings(o.data_path));
  if (with_labels) idc::attach_target_labels(d, o.labels_path);
  return d;
}

ordered_json metrics_json(const idc::ClassificationMetrics& m) {
  return {{"count", m.count},
          {"accuracy", m.accuracy},
          {"mean_class_accuracy", m.mean_class_accuracy},
          {"per_class_accuracy", m.per_class_accuracy}};
}

ordered_json evidence_json(const std::vector<idc::EvidenceItem<double>>& items) {
  ordered_json a = ordered_json::array();
  for (const auto& e : items) {
    a.push_back({{"provenance", e.provenance},
                 {"slot_index", e.slot_index},
                 {"similarity", e.similarity},
                 {"value", e.value},
                 {"contribution", e.contribution}});
  }
  return a;
}

int cmd_gen_data(const Options& o) {
  auto rc = load_run_config(o);
  rc.resolve();
  const auto dir = prepare_out(o);
  const idc::Dataset d = idc::generate(rc.data);
  idc::save_embeddings(d, dir / "embeddings.csv");
  idc::save_target_labels(d, dir / "target_labels.csv");
  echo_config("gen-data", rc, o);
  return 0;
}

int cmd_train(const Options& o) {
  auto rc = load_run_config(o);
  const idc::Dataset d = load_data(o, false);
  rc.train.num_classes = d.num_classes;
  rc.train.input_dim = d.dim;
  if (o.iterations) rc.train.max_iterations = *o.iterations;
  rc.resolve();
  const auto dir = prepare_out(o);
  echo_config("train", rc, o);
  const idc::TrainResult r = idc::train(rc.train, d.training_view());
  idc::save_model(r.model, dir / "model.json");
  std::ostringstream os;
  os << "# config_hash=" << rc.hash() << "\n";
  os << "iteration,L_fc,L_adv,L_idc,src_acc\n";
  for (const auto& h : r.history) {
    os << h.iteration << ',' << fmt_double(h.fc) << ',' << fmt_double(h.adv) << ','
       << fmt_double(h.idc) << ',' << fmt_double(h.source_accuracy) << '\n';
  }
  write_text(dir / "losses.csv", os.str());
  return 0;
}

int cmd_eval(const Options& o) {
  auto rc = load_run_config(o);
  const idc::Dataset d = load_data(o, true);
  const idc::Model model = idc::load_model(o.model_path);
  adopt_model_config(rc, model, o);
  rc.resolve();
  const auto dir = prepare_out(o);
  echo_config("eval", rc, o);
  const auto report = idc::evaluate_targets(model, d);
  ordered_json j{{"config_hash", rc.hash()},
                 {"idc", metrics_json(report.idc)},
                 {"fc", metrics_json(report.fc)}};
  write_text(dir / "metrics.json", j.dump(2) + "\n");
  return 0;
}

int cmd_explain(const Options& o) {
  auto rc = load_run_config(o);
  const idc::Dataset d = load_data(o, false);
  const idc::Model model = idc::load_model(o.model_path);
  adopt_model_config(rc, model, o);
  rc.resolve();
  const Eigen::VectorXd* x = nullptr;
  std::string domain;
  for (const auto& t : d.target) {
    if (t.id == o.sample_id) x = &t.x, domain = "target";
  }
  for (const auto& s : d.source) {
    if (!x && s.id == o.sample_id) x = &s.x, domain = "source";
  }
  if (!x) throw idc::Error(idc::Errc::UsageError, "no sample with id '" + o.sample_id + "'");
  const auto dir = prepare_out(o);
  echo_config("explain", rc, o);
  const auto e = idc::explain(model, *x, o.top, o.sample_id);
  ordered_json j{{"config_hash", rc.hash()},
                 {"sample_id", e.sample_id},
                 {"domain", domain},
                 {"predicted_class", e.predicted_class},
                 {"scores", std::vector<double>(e.scores.data(), e.scores.data() + e.scores.size())},
                 {"most_contributing", evidence_json(e.most)},
                 {"least_contributing", evidence_json(e.least)}};
  write_text(dir / "evidence.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_reject(const Options& o) {
  auto rc = load_run_config(o);
  const auto rates = parse_doubles(o.rates, "--rates");
  const idc::Dataset d = load_data(o, true);
  const idc::Model model = idc::load_model(o.model_path);
  adopt_model_config(rc, model, o);
  rc.resolve();
  const auto dir = prepare_out(o);
  echo_config("reject", rc, o);
  const auto scored = idc::score_targets(model, d, o.classifier == "fc");
  const auto curve = idc::rejection_curve(scored, rates);
  std::ostringstream os;
  os << "# config_hash=" << rc.hash() << "\n";
  os << "rate,accuracy,retained\n";
  for (const auto& p : curve) {
    os << fmt_double(p.rate) << ',' << fmt_double(p.accuracy) << ',' << p.retained << '\n';
  }
  write_text(dir / "rejection.csv", os.str());
  return 0;
}

int cmd_select(const Options& o) {
  auto rc = load_run_config(o);
  const idc::Dataset d = load_data(o, o.retrain);
  const idc::Model model = idc::load_model(o.model_path);
  adopt_model_config(rc, model, o);
  if (!o.method.empty()) rc.select.method = idc::importance_method_from_string(o.method);
  if (!o.strategy.empty()) rc.select.strategy = idc::strategy_from_string(o.strategy);
  if (o.ratio) rc.select.ratio = *o.ratio;
  if (o.mixture_split) rc.select.mixture_split = *o.mixture_split;
  rc.resolve();
  const auto dir = prepare_out(o);
  echo_config("select", rc, o);

  const auto table = idc::importance_table(rc.select.method, &model, d.training_view(), rc.seed);
  auto plan = idc::apply_strategy(table, rc.select.strategy, rc.select.ratio, d.num_classes,
                                  rc.select.mixture_split);
  plan.method = rc.select.method;

  std::ostringstream os;
  os << "# config_hash=" << rc.hash() << "\n";
  os << "sample_id,label,importance,selected_by\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    os << table[i].id << ',' << table[i].label << ',' << fmt_double(table[i].importance) << ','
       << idc::to_string(plan.selected_by[i]) << '\n';
  }
  write_text(dir / "selection.csv", os.str());

  ordered_json j{{"config_hash", rc.hash()},
                 {"method", idc::to_string(plan.method)},
                 {"strategy", idc::to_string(plan.strategy)},
                 {"ratio", plan.ratio},
                 {"quota", plan.quota},
                 {"selected", plan.selected.size()},
                 {"per_class_counts", plan.per_class_counts}};
  if (o.retrain) {
    idc::TrainConfig cfg = rc.train;
    const auto r = idc::retrain_on_selection(plan, table, d, cfg);
    j["retrain"] = {{"accuracy", r.accuracy},
                    {"fc", metrics_json(r.report.fc)},
                    {"idc", metrics_json(r.report.idc)}};
  }
  write_text(dir / "selection.json", j.dump(2) + "\n");
  return 0;
}

int cmd_sweep(const Options& o) {
  auto rc = load_run_config(o);
  const idc::Dataset d = load_data(o, true);
  rc.train.num_classes = d.num_classes;
  rc.train.input_dim = d.dim;
  if (o.iterations) rc.train.max_iterations = *o.iterations;
  rc.resolve();
  idc::SweepSpec spec;
  for (const auto& m : split_list(o.methods)) spec.methods.push_back(idc::importance_method_from_string(m));
  for (const auto& s : split_list(o.strategies)) spec.strategies.push_back(idc::strategy_from_string(s));
  spec.ratios = parse_doubles(o.ratios, "--ratios");
  for (double r : spec.ratios) {
    if (!(r > 0 && r <= 1)) throw idc::Error(idc::Errc::UsageError, "--ratios entries must be in (0,1]");
  }
  for (double s : parse_doubles(o.seeds, "--seeds")) spec.seeds.push_back(static_cast<std::uint64_t>(s));
  spec.mixture_split = rc.select.mixture_split;
  const auto dir = prepare_out(o);
  echo_config("sweep", rc, o);
  const auto cells = idc::run_sweep(d, rc.train, spec);
  std::ostringstream os;
  os << "# config_hash=" << rc.hash() << "\n";
  os << "method,strategy,ratio,accuracy_mean,accuracy_std,runs\n";
  for (const auto& c : cells) {
    os << idc::to_string(c.method) << ',' << idc::to_string(c.strategy) << ','
       << fmt_double(c.ratio) << ',' << fmt_double(c.mean) << ',' << fmt_double(c.stddev) << ','
       << c.accuracies.size() << '\n';
  }
  write_text(dir / "sweep.csv", os.str());
  return 0;
}

void print_error(const char* code, const std::string& message, std::size_t line = 0) {
  nlohmann::json j{{"error", code}, {"message", message}};
  if (line) j["line"] = line;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-bank classifier with source evidence under domain shift"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config_path, "JSON run config")->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "master seed (data, init, sampling, selection streams)");
    c->add_option("--out", o.out_dir, "output directory")->required();
  };
  auto data = [&](CLI::App* c, bool labels) {
    c->add_option("--data", o.data_path, "embedding CSV")->required()->check(CLI::ExistingFile);
    if (labels) {
      c->add_option("--labels", o.labels_path, "target ground-truth CSV")->required()->check(CLI::ExistingFile);
    }
  };
  auto model = [&](CLI::App* c) {
    c->add_option("--model", o.model_path, "model JSON")->required()->check(CLI::ExistingFile);
  };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic shifted dataset");
  common(gen);

  auto* tr = app.add_subcommand("train", "train encoder, heads and memory banks");
  common(tr);
  data(tr, false);
  tr->add_option("--iterations", o.iterations, "override max_iterations")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "target accuracy of the memory classifier and FC head");
  common(ev);
  data(ev, true);
  model(ev);

  auto* ex = app.add_subcommand("explain", "evidence report for one sample");
  common(ex);
  data(ex, false);
  model(ex);
  ex->add_option("--sample-id", o.sample_id, "sample id in the data file")->required();
  ex->add_option("--top", o.top, "evidence items to list")->check(CLI::PositiveNumber);

  auto* rj = app.add_subcommand("reject", "accuracy versus rejection rate");
  common(rj);
  data(rj, true);
  model(rj);
  rj->add_option("--rates", o.rates, "comma-separated increasing rates in [0,1]");
  rj->add_option("--classifier", o.classifier, "idc or fc")->check(CLI::IsMember({"idc", "fc"}));

  auto ratio_check = CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double r = std::stod(s);
          if (r > 0.0 && r <= 1.0) return {};
        } catch (const std::exception&) {
        }
        return "ratio must be in (0,1], got " + s;
      },
      "RATIO in (0,1]");

  auto* sel = app.add_subcommand("select", "rank and select source samples");
  common(sel);
  data(sel, false);
  model(sel);
  sel->add_option("--method", o.method, "random, in, adv or idc")
      ->required()
      ->check(CLI::IsMember({"random", "in", "adv", "idc"}));
  sel->add_option("--strategy", o.strategy, "s, p or m")->required()->check(CLI::IsMember({"s", "p", "m"}));
  sel->add_option("--ratio", o.ratio, "fraction of sources to keep")->required()->check(ratio_check);
  sel->add_option("--mixture-split", o.mixture_split, "class-balanced share for -m")->check(CLI::Range(0.0, 1.0));
  sel->add_flag("--retrain", o.retrain, "retrain on the selection and report target accuracy");
  sel->add_option("--labels", o.labels_path, "target ground truth (with --retrain)")->check(CLI::ExistingFile);

  auto* sw = app.add_subcommand("sweep", "method x strategy x ratio retraining table");
  common(sw);
  data(sw, true);
  sw->add_option("--methods", o.methods);
  sw->add_option("--strategies", o.strategies);
  sw->add_option("--ratios", o.ratios);
  sw->add_option("--seeds", o.seeds);
  sw->add_option("--iterations", o.iterations, "override max_iterations")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (o.retrain && o.labels_path.empty()) {
      throw CLI::ValidationError("--labels", "--retrain requires --labels");
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o);
    if (tr->parsed()) return cmd_train(o);
    if (ev->parsed()) return cmd_eval(o);
    if (ex->parsed()) return cmd_explain(o);
    if (rj->parsed()) return cmd_reject(o);
    if (sel->parsed()) return cmd_select(o);
    if (sw->parsed()) return cmd_sweep(o);
  } catch (const idc::Error& e) {
    print_error(idc::to_string(e.code()), e.what(), e.line());
    return e.code() == idc::Errc::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 1;
  }
  return 0;
}
