#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "idc/dataset.hpp"
#include "idc/trainer.hpp"

namespace idc {

/// Gaussian classes with means evenly spaced on a circle of `radius` in the
/// (x0, x1) plane. Each sample is drawn around its class mean, or with
/// probability `overlap` around the midpoint between its class mean and the
/// next class's mean (label kept). Target samples then go through
///   x -> scale * R(rotation) x + translation,
/// where R rotates the (x0, x2) plane, or (x0, x1) when input_dim == 2.
struct SyntheticShiftSpec {
  int num_classes = 8;
  Index input_dim = 16;
  Index source_per_class = 200;
  Index target_per_class = 200;
  double radius = 4.0;
  double sigma = 1.0;
  double rotation = std::numbers::pi / 6.0;
  /// Empty means zero translation; otherwise input_dim entries.
  std::vector<double> translation;
  double scale = 1.2;
  double overlap = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic per seed. Target ground truth goes to Dataset::target_labels only.
Dataset generate(const SyntheticShiftSpec& spec);

enum class Domain { source, target };

/// One row of the embedding file. Target rows carry label -1.
struct SampleRecord {
  std::string id;
  Domain domain = Domain::source;
  int label = -1;
  Eigen::VectorXd feature;
};

struct EmbeddingFile {
  int num_classes = 0;
  Index dim = 0;
  std::vector<SampleRecord> records;
};

/// Source rows first, then target rows, each in dataset order.
EmbeddingFile to_embedding_file(const Dataset& data);
/// Splits records by domain, preserving relative order. Target labels stay empty.
Dataset from_embedding_file(const EmbeddingFile& file);

/// Format:
///   idc-embeddings,v1,C=<int>,D=<int>
///   id,domain,label,f0,...,f{D-1}
///   <id>,source|target,<label or -1>,<D values, 17 significant digits>
void save_embeddings(const EmbeddingFile& file, const std::filesystem::path& path);
EmbeddingFile load_embeddings(const std::filesystem::path& path);

inline void save_embeddings(const Dataset& data, const std::filesystem::path& path) {
  save_embeddings(to_embedding_file(data), path);
}

/// Evaluation-only ground truth for target rows: `id,label` with a header line.
void save_target_labels(const Dataset& data, const std::filesystem::path& path);
/// Fills data.target_labels by id; every target must be present.
void attach_target_labels(Dataset& data, const std::filesystem::path& path);

inline constexpr int kModelFormatVersion = 1;

/// JSON model file: config, network parameters (row-major weights then bias
/// per layer) and every memory slot.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::string model_to_json_string(const Model& model);
Model model_from_json_string(const std::string& text);

}  // namespace idc
