#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fedtwin/nn.hpp"
#include "fedtwin/rng.hpp"

namespace fedtwin::fed {

enum class TrainMode { kCentralized, kFederated };

struct Dataset {
  Eigen::MatrixXd inputs;   // dim x n, one column per example
  Eigen::MatrixXd targets;  // dim x n

  int size() const { return static_cast<int>(inputs.cols()); }
};

struct ClientShard {
  int client_id = 0;
  Dataset data;

  int cardinality() const { return data.size(); }
};

struct FedConfig {
  int clients = 10;      // K
  int local_epochs = 1;  // E
  int batch_size = 32;   // B
  double lr = 1e-3;      // alpha
  int rounds = 1;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;  // throws config_error naming the offending field
};

struct RoundLog {
  int round = 0;  // 0 is the pre-training state
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::int64_t wall_ms = 0;
};

// Deterministic shuffle + near-equal split; shard sizes differ by at most
// one, with the first (n mod K) shards taking the extra example.
std::vector<ClientShard> partition_iid(const Dataset& data, int clients,
                                       std::uint64_t seed);

// E local epochs of minibatch SGD starting from w; batch order is reshuffled
// each epoch from the client RNG stream, and a final partial batch is used
// as-is. Returns the updated parameter vector.
nn::ParamVector client_update(const std::vector<nn::LayerSpec>& specs,
                              const nn::ParamVector& w,
                              const ClientShard& shard, int local_epochs,
                              int batch_size, double lr, Rng& rng);

// Data-size weighted average sum_k (n_k / n) w_k, summed in list order.
// Callers pass updates pre-sorted by client id so the order is fixed.
nn::ParamVector aggregate(
    const std::vector<std::pair<int, nn::ParamVector>>& updates);

struct TrainResult {
  nn::Network model;
  std::vector<RoundLog> logs;
  std::vector<std::string> warnings;
};

// Invoked after each completed round/epoch (checkpointing hook).
using RoundObserver = std::function<void(int round, const nn::Network&)>;

// Synchronous federated averaging: broadcast, per-client update (optionally
// in parallel), weighted aggregate. A failure in any client aborts the round.
TrainResult run_federated(const std::vector<nn::LayerSpec>& specs,
                          const std::vector<ClientShard>& shards,
                          const FedConfig& config, const Dataset& validation,
                          const RoundObserver& on_round = {});

// Minibatch SGD on pooled data, one log entry per epoch. A batch size larger
// than the dataset is clamped with a warning.
TrainResult run_centralized(const std::vector<nn::LayerSpec>& specs,
                            const Dataset& data, int epochs, int batch_size,
                            double lr, std::uint64_t seed,
                            const Dataset& validation,
                            const RoundObserver& on_round = {});

// CSV with header round,train_loss,val_loss,wall_ms.
void write_round_logs(const std::filesystem::path& path,
                      const std::vector<RoundLog>& logs);

}  // namespace fedtwin::fed
