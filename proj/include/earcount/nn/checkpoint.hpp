#pragma once

// Binary checkpoint file, little-endian:
//
//   "EARCNN01"                      8-byte magic + version
//   u32 length, bytes               model config as JSON (UTF-8)
//   f64 best_val_r2, u32 epoch
//   u32 count, then per array:      u32 name length, name bytes,
//                                   u32 rank, u64 dims[rank], f32 data[]
//   u8 has_optimizer                if 1: u64 step, then m and v arrays in
//                                   parameter order (u64 length, f32 data[])

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "earcount/nn/model.hpp"
#include "earcount/nn/optim.hpp"

namespace earcount::nn {

inline constexpr char kCheckpointMagic[8] = {'E', 'A', 'R', 'C', 'N', 'N', '0', '1'};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> data;
  friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<NamedArray> arrays;  // parameters, then running statistics
  std::optional<AdamState<float>> optimizer;
  double best_val_r2 = 0.0;
  int epoch = 0;
};

Checkpoint make_checkpoint(const Model<float>& model, double best_val_r2, int epoch,
                           const AdamState<float>* optimizer = nullptr);

/// Restores parameters and running statistics. Throws CheckpointError when a
/// name is missing or a shape differs.
void load_into(Model<float>& model, const Checkpoint& ckpt);
Model<float> model_from(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a digest of the eval-mode outputs on a fixed seeded probe batch.
std::uint64_t probe_hash(Model<float>& model, int batch = 2);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace earcount::nn
