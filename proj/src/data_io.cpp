#include "idc/data_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "idc/random.hpp"
#include "idc/run_config.hpp"

namespace idc {

using nlohmann::json;
using nlohmann::ordered_json;

void SyntheticShiftSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::InvalidSpec, what);
  };
  require(num_classes >= 2, "num_classes must be >= 2");
  require(input_dim >= 2, "input_dim must be >= 2");
  require(source_per_class >= 1 && target_per_class >= 1, "per-class counts must be >= 1");
  require(radius > 0 && std::isfinite(radius), "radius must be positive");
  require(sigma > 0 && std::isfinite(sigma), "sigma must be positive");
  require(rotation >= 0 && rotation < 2 * std::numbers::pi, "rotation must be in [0, 2pi)");
  require(translation.empty() || static_cast<Index>(translation.size()) == input_dim,
          "translation must be empty or have input_dim entries");
  for (double t : translation) require(std::isfinite(t), "translation must be finite");
  require(scale > 0 && std::isfinite(scale), "scale must be positive");
  require(overlap >= 0 && overlap <= 1, "overlap must be in [0,1]");
}

namespace {

std::string numbered_id(const char* prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, n);
  return buf;
}

}  // namespace

Dataset generate(const SyntheticShiftSpec& spec) {
  spec.validate();
  auto rng = make_stream(spec.seed, "data");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution overlapped(spec.overlap);

  const Index d = spec.input_dim;
  const int nc = spec.num_classes;
  std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(nc), Eigen::VectorXd::Zero(d));
  for (int c = 0; c < nc; ++c) {
    const double phi = 2.0 * std::numbers::pi * c / nc;
    means[static_cast<std::size_t>(c)](0) = spec.radius * std::cos(phi);
    means[static_cast<std::size_t>(c)](1) = spec.radius * std::sin(phi);
  }
  const Index axis_a = 0;
  const Index axis_b = d >= 3 ? 2 : 1;
  const double cs = std::cos(spec.rotation);
  const double sn = std::sin(spec.rotation);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < spec.translation.size(); ++i) shift(static_cast<Index>(i)) = spec.translation[i];

  auto draw = [&](int c) {
    const auto& own = means[static_cast<std::size_t>(c)];
    Eigen::VectorXd center = own;
    if (overlapped(rng)) center = 0.5 * (own + means[static_cast<std::size_t>((c + 1) % nc)]);
    Eigen::VectorXd x(d);
    for (Index k = 0; k < d; ++k) x(k) = center(k) + spec.sigma * normal(rng);
    return x;
  };

  Dataset data;
  data.num_classes = nc;
  data.dim = d;
  for (int c = 0; c < nc; ++c) {
    for (Index i = 0; i < spec.source_per_class; ++i) {
      data.source.push_back({numbered_id("src", data.source.size()), c, draw(c)});
    }
  }
  for (int c = 0; c < nc; ++c) {
    for (Index i = 0; i < spec.target_per_class; ++i) {
      Eigen::VectorXd x = draw(c);
      const double a = x(axis_a);
      const double b = x(axis_b);
      x(axis_a) = cs * a - sn * b;
      x(axis_b) = sn * a + cs * b;
      x = spec.scale * x + shift;
      data.target.push_back({numbered_id("tgt", data.target.size()), std::move(x)});
      data.target_labels.push_back(c);
    }
  }
  return data;
}

EmbeddingFile to_embedding_file(const Dataset& data) {
  EmbeddingFile f;
  f.num_classes = data.num_classes;
  f.dim = data.dim;
  for (const auto& s : data.source) f.records.push_back({s.id, Domain::source, s.label, s.x});
  for (const auto& t : data.target) f.records.push_back({t.id, Domain::target, -1, t.x});
  return f;
}

Dataset from_embedding_file(const EmbeddingFile& file) {
  Dataset d;
  d.num_classes = file.num_classes;
  d.dim = file.dim;
  for (const auto& r : file.records) {
    if (r.domain == Domain::source) {
      d.source.push_back({r.id, r.label, r.feature});
    } else {
      d.target.push_back({r.id, r.feature});
    }
  }
  return d;
}

namespace {

std::string column_header(Index dim) {
  std::string h = "id,domain,label";
  for (Index k = 0; k < dim; ++k) h += ",f" + std::to_string(k);
  return h;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.find_first_of(",\r\n") == std::string::npos;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open '" + path.string() + "' for writing");
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

void save_embeddings(const EmbeddingFile& file, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "idc-embeddings,v1,C=" << file.num_classes << ",D=" << file.dim << '\n';
  os << column_header(file.dim) << '\n';
  char buf[40];
  for (const auto& r : file.records) {
    if (!valid_id(r.id)) throw Error(Errc::FormatError, "sample id '" + r.id + "' not writable");
    if (r.feature.size() != file.dim) {
      throw Error(Errc::DimensionMismatch, "sample '" + r.id + "' has wrong feature dimension");
    }
    if (!r.feature.allFinite()) throw Error(Errc::FormatError, "sample '" + r.id + "' not finite");
    os << r.id << ',' << (r.domain == Domain::source ? "source" : "target") << ','
       << (r.domain == Domain::source ? r.label : -1);
    for (Index k = 0; k < file.dim; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", r.feature(k));
      os << ',' << buf;
    }
    os << '\n';
  }
  auto out = open_for_write(path);
  out << os.str();
}

EmbeddingFile load_embeddings(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::string line;
  EmbeddingFile f;
  if (!next_line(in, line)) throw Error(Errc::FormatError, "missing header", 1);
  {
    const auto parts = split_commas(line);
    if (parts.size() != 4 || parts[0] != "idc-embeddings") {
      throw Error(Errc::FormatError, "bad embedding header", 1);
    }
    if (parts[1] != "v1") {
      throw Error(Errc::VersionMismatch, "unsupported embedding version " + std::string(parts[1]), 1);
    }
    long long d = 0;
    if (parts[2].substr(0, 2) != "C=" || parts[3].substr(0, 2) != "D=" ||
        !parse_number(parts[2].substr(2), f.num_classes) || !parse_number(parts[3].substr(2), d) ||
        f.num_classes < 1 || d < 1) {
      throw Error(Errc::FormatError, "bad C/D in embedding header", 1);
    }
    f.dim = static_cast<Index>(d);
  }
  if (!next_line(in, line)) throw Error(Errc::FormatError, "missing column header", 2);
  if (line != column_header(f.dim)) {
    throw Error(Errc::DimensionMismatch, "column header does not match D=" + std::to_string(f.dim), 2);
  }
  std::unordered_set<std::string> seen;
  const auto expected = static_cast<std::size_t>(f.dim) + 3;
  std::size_t lineno = 2;
  while (next_line(in, line)) {
    ++lineno;
    const auto parts = split_commas(line);
    if (parts.size() < expected) throw Error(Errc::FormatError, "truncated row", lineno);
    if (parts.size() > expected) {
      throw Error(Errc::DimensionMismatch, "row has more than D features", lineno);
    }
    SampleRecord r;
    r.id = std::string(parts[0]);
    if (!valid_id(r.id)) throw Error(Errc::FormatError, "empty sample id", lineno);
    if (parts[1] == "source") {
      r.domain = Domain::source;
    } else if (parts[1] == "target") {
      r.domain = Domain::target;
    } else {
      throw Error(Errc::FormatError, "domain must be source or target", lineno);
    }
    if (!parse_number(parts[2], r.label)) throw Error(Errc::FormatError, "bad label", lineno);
    if (r.domain == Domain::source && (r.label < 0 || r.label >= f.num_classes)) {
      throw Error(Errc::LabelOutOfRange,
                  "label " + std::to_string(r.label) + " outside [0," + std::to_string(f.num_classes) + ")",
                  lineno);
    }
    if (r.domain == Domain::target && r.label != -1) {
      throw Error(Errc::LabelOutOfRange, "target rows must carry label -1", lineno);
    }
    r.feature.resize(f.dim);
    for (Index k = 0; k < f.dim; ++k) {
      double v = 0;
      if (!parse_number(parts[static_cast<std::size_t>(k) + 3], v) || !std::isfinite(v)) {
        throw Error(Errc::FormatError, "bad feature value in column f" + std::to_string(k), lineno);
      }
      r.feature(k) = v;
    }
    if (!seen.insert(r.id).second) throw Error(Errc::DuplicateId, "duplicate id '" + r.id + "'", lineno);
    f.records.push_back(std::move(r));
  }
  return f;
}

void save_target_labels(const Dataset& data, const std::filesystem::path& path) {
  if (data.target_labels.size() != data.target.size()) {
    throw Error(Errc::ConfigInvalid, "dataset carries no target ground truth");
  }
  std::ostringstream os;
  os << "id,label\n";
  for (std::size_t i = 0; i < data.target.size(); ++i) {
    os << data.target[i].id << ',' << data.target_labels[i] << '\n';
  }
  auto out = open_for_write(path);
  out << os.str();
}

void attach_target_labels(Dataset& data, const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::string line;
  if (!next_line(in, line) || line != "id,label") {
    throw Error(Errc::FormatError, "label file must start with 'id,label'", 1);
  }
  std::unordered_map<std::string, int> labels;
  std::size_t lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    const auto parts = split_commas(line);
    int label = 0;
    if (parts.size() != 2 || !parse_number(parts[1], label)) {
      throw Error(Errc::FormatError, "expected id,label", lineno);
    }
    if (label < 0 || label >= data.num_classes) {
      throw Error(Errc::LabelOutOfRange, "label out of range", lineno);
    }
    if (!labels.emplace(std::string(parts[0]), label).second) {
      throw Error(Errc::DuplicateId, "duplicate id in label file", lineno);
    }
  }
  data.target_labels.clear();
  for (const auto& t : data.target) {
    const auto it = labels.find(t.id);
    if (it == labels.end()) throw Error(Errc::FormatError, "no label for target '" + t.id + "'");
    data.target_labels.push_back(it->second);
  }
}

namespace {

ordered_json network_to_json(const Mlp<double>& net) {
  ordered_json layers = ordered_json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"in", l.in}, {"out", l.out}, {"activation", to_string(l.activation)}});
  }
  const auto& p = net.params();
  return {{"layers", layers}, {"params", std::vector<double>(p.data(), p.data() + p.size())}};
}

void network_from_json(const json& j, Mlp<double>& net, const char* name) {
  std::vector<LayerShape> shapes;
  for (const auto& l : j.at("layers")) {
    shapes.push_back({l.at("in").get<Index>(), l.at("out").get<Index>(),
                      activation_from_string(l.at("activation").get<std::string>())});
  }
  if (shapes != net.layers()) {
    throw Error(Errc::CorruptFile, std::string(name) + " layer shapes do not match config");
  }
  const auto params = j.at("params").get<std::vector<double>>();
  if (static_cast<Index>(params.size()) != net.num_params()) {
    throw Error(Errc::CorruptFile, std::string(name) + " parameter count mismatch");
  }
  net.params() = Eigen::Map<const Eigen::VectorXd>(params.data(), net.num_params());
}

}  // namespace

std::string model_to_json_string(const Model& model) {
  ordered_json banks = ordered_json::array();
  for (const auto& b : model.banks.banks()) {
    ordered_json slots = ordered_json::array();
    for (const auto& s : b.slots()) {
      slots.push_back({{"provenance", s.provenance},
                       {"age", s.age},
                       {"value", s.value},
                       {"write_seq", s.write_seq},
                       {"key", std::vector<double>(s.key.data(), s.key.data() + s.key.size())}});
    }
    banks.push_back({{"class_id", b.class_id()},
                     {"write_counter", b.write_counter()},
                     {"slots", std::move(slots)}});
  }
  ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["config"] = to_json(model.config);
  j["encoder"] = network_to_json(model.encoder);
  j["fc_head"] = network_to_json(model.fc_head);
  j["discriminator"] = network_to_json(model.discriminator);
  j["memory"] = {{"read_k", model.banks.read_k()},
                 {"capacity", model.config.memory_slots},
                 {"dim", model.config.feature_dim},
                 {"banks", std::move(banks)}};
  return j.dump(1);
}

Model model_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("format_version")) {
      throw Error(Errc::CorruptFile, "model file has no format_version");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(Errc::VersionMismatch, "model format_version " + std::to_string(version) +
                                             ", expected " + std::to_string(kModelFormatVersion));
    }
    TrainConfig cfg;
    merge_json(j.at("config"), cfg);
    Model m = Model::create(cfg);
    network_from_json(j.at("encoder"), m.encoder, "encoder");
    network_from_json(j.at("fc_head"), m.fc_head, "fc_head");
    network_from_json(j.at("discriminator"), m.discriminator, "discriminator");
    const auto& mem = j.at("memory");
    if (mem.at("read_k").get<Index>() != cfg.read_k ||
        mem.at("capacity").get<Index>() != cfg.memory_slots ||
        mem.at("dim").get<Index>() != cfg.feature_dim) {
      throw Error(Errc::CorruptFile, "memory header disagrees with config");
    }
    const auto& banks = mem.at("banks");
    if (banks.size() != static_cast<std::size_t>(cfg.num_classes)) {
      throw Error(Errc::CorruptFile, "memory bank count differs from num_classes");
    }
    for (int c = 0; c < cfg.num_classes; ++c) {
      const auto& bj = banks.at(static_cast<std::size_t>(c));
      if (bj.at("class_id").get<int>() != c) throw Error(Errc::CorruptFile, "banks out of order");
      auto& bank = m.banks.bank(c);
      for (const auto& sj : bj.at("slots")) {
        MemorySlot<double> s;
        s.provenance = sj.at("provenance").get<std::string>();
        s.age = sj.at("age").get<std::uint64_t>();
        s.value = sj.at("value").get<double>();
        s.write_seq = sj.at("write_seq").get<std::uint64_t>();
        const auto key = sj.at("key").get<std::vector<double>>();
        s.key = Eigen::Map<const Eigen::VectorXd>(key.data(), static_cast<Index>(key.size()));
        bank.restore_slot(std::move(s));
      }
      bank.set_write_counter(bj.at("write_counter").get<std::uint64_t>());
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, std::string("model file malformed: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) throw Error(Errc::CorruptFile, e.what());
    throw;
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << model_to_json_string(model) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json_string(ss.str());
}

}  // namespace idc
