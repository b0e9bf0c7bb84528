#include "fedtwin/fed.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <thread>

#include "fedtwin/errors.hpp"

namespace fedtwin::fed {

namespace {

// Training is aborted once a loss exceeds this (diverged run).
constexpr double kDivergenceLoss = 1e6;

std::int64_t elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - start)
      .count();
}

void check_finite_loss(double train, double val, int round) {
  if (!std::isfinite(train) || !std::isfinite(val) ||
      train > kDivergenceLoss || val > kDivergenceLoss) {
    throw numeric_error("training diverged at round " + std::to_string(round) +
                        " (train_loss=" + std::to_string(train) +
                        ", val_loss=" + std::to_string(val) + ")");
  }
}

// One epoch of minibatch SGD over the dataset; order drawn from rng.
void run_epoch(nn::Network& net, const Dataset& data, int batch_size,
               double lr, Rng& rng, Eigen::MatrixXd& batch_x,
               Eigen::MatrixXd& batch_y) {
  const int n = data.size();
  std::vector<int> order = rng.permutation(n);
  for (int begin = 0; begin < n; begin += batch_size) {
    const int count = std::min(batch_size, n - begin);
    for (int i = 0; i < count; ++i) {
      batch_x.col(i) = data.inputs.col(order[static_cast<std::size_t>(begin + i)]);
      batch_y.col(i) = data.targets.col(order[static_cast<std::size_t>(begin + i)]);
    }
    nn::ParamVector grad =
        nn::backward(net, batch_x.leftCols(count), batch_y.leftCols(count));
    nn::sgd_step_inplace(net, grad, lr);
  }
}

double weighted_train_loss(const nn::Network& net,
                           const std::vector<const ClientShard*>& shards,
                           double total) {
  double loss = 0.0;
  for (const ClientShard* s : shards) {
    loss += (s->cardinality() / total) *
            nn::mean_loss(net, s->data.inputs, s->data.targets);
  }
  return loss;
}

}  // namespace

void FedConfig::validate() const {
  if (clients < 1) throw config_error("fed.K: must be >= 1");
  if (local_epochs < 1) throw config_error("fed.E: must be >= 1");
  if (batch_size < 1) throw config_error("fed.B: must be >= 1");
  // lr == 0 is allowed as an explicit no-op for parity smoke tests
  if (!(lr >= 0.0)) throw config_error("fed.lr: must be >= 0");
  if (rounds < 1) throw config_error("fed.rounds: must be >= 1");
  if (threads < 1) throw config_error("fed.threads: must be >= 1");
}

std::vector<ClientShard> partition_iid(const Dataset& data, int clients,
                                       std::uint64_t seed) {
  const int n = data.size();
  if (clients < 1) throw config_error("partition: client count must be >= 1");
  if (n < clients) {
    throw config_error("partition: dataset size " + std::to_string(n) +
                       " is smaller than client count " +
                       std::to_string(clients));
  }
  if (data.targets.cols() != n) {
    throw std::invalid_argument("partition: inputs/targets size mismatch");
  }
  Rng rng(stream_seed(seed, 0, 0));
  std::vector<int> order = rng.permutation(n);

  std::vector<ClientShard> shards(static_cast<std::size_t>(clients));
  const int base = n / clients;
  const int extra = n % clients;
  int pos = 0;
  for (int k = 0; k < clients; ++k) {
    const int size = base + (k < extra ? 1 : 0);
    ClientShard& shard = shards[static_cast<std::size_t>(k)];
    shard.client_id = k;
    shard.data.inputs.resize(data.inputs.rows(), size);
    shard.data.targets.resize(data.targets.rows(), size);
    for (int i = 0; i < size; ++i) {
      shard.data.inputs.col(i) = data.inputs.col(order[static_cast<std::size_t>(pos)]);
      shard.data.targets.col(i) = data.targets.col(order[static_cast<std::size_t>(pos)]);
      ++pos;
    }
  }
  return shards;
}

nn::ParamVector client_update(const std::vector<nn::LayerSpec>& specs,
                              const nn::ParamVector& w,
                              const ClientShard& shard, int local_epochs,
                              int batch_size, double lr, Rng& rng) {
  if (shard.cardinality() == 0) {
    throw std::invalid_argument("client_update: empty shard");
  }
  nn::Network net = nn::unflatten(w, specs);
  if (lr == 0.0) return w;  // no-op contract for parity experiments
  const int effective_batch = std::min(batch_size, shard.cardinality());
  Eigen::MatrixXd batch_x(shard.data.inputs.rows(), effective_batch);
  Eigen::MatrixXd batch_y(shard.data.targets.rows(), effective_batch);
  for (int e = 0; e < local_epochs; ++e) {
    run_epoch(net, shard.data, effective_batch, lr, rng, batch_x, batch_y);
  }
  return nn::flatten(net);
}

nn::ParamVector aggregate(
    const std::vector<std::pair<int, nn::ParamVector>>& updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  double total = 0.0;
  for (const auto& [n_k, w] : updates) {
    if (n_k < 1) throw std::invalid_argument("aggregate: n_k must be >= 1");
    if (w.size() != updates.front().second.size()) {
      throw std::invalid_argument("aggregate: parameter layout mismatch");
    }
    total += n_k;
  }
  // Kahan-summed weight check: the n_k/n must form a partition of unity.
  double weight_sum = 0.0, comp = 0.0;
  for (const auto& [n_k, w] : updates) {
    double y = n_k / total - comp;
    double t = weight_sum + y;
    comp = (t - weight_sum) - y;
    weight_sum = t;
  }
  if (std::abs(weight_sum - 1.0) >= 1e-15) {
    throw numeric_error("aggregate: weights sum to " +
                        std::to_string(weight_sum));
  }
  nn::ParamVector out = nn::ParamVector::Zero(updates.front().second.size());
  for (const auto& [n_k, w] : updates) {
    out.noalias() += (n_k / total) * w;
  }
  return out;
}

TrainResult run_federated(const std::vector<nn::LayerSpec>& specs,
                          const std::vector<ClientShard>& shards,
                          const FedConfig& config, const Dataset& validation,
                          const RoundObserver& on_round) {
  config.validate();
  if (shards.empty()) throw config_error("run_federated: no client shards");
  if (validation.size() == 0) {
    throw config_error("run_federated: empty validation set");
  }
  for (const auto& s : shards) {
    if (s.cardinality() == 0) {
      throw config_error("run_federated: client " +
                         std::to_string(s.client_id) + " has no data");
    }
  }

  // Fixed aggregation order: ascending client_id.
  std::vector<const ClientShard*> ordered;
  ordered.reserve(shards.size());
  for (const auto& s : shards) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientShard* a, const ClientShard* b) {
              return a->client_id < b->client_id;
            });
  double total = 0.0;
  for (const ClientShard* s : ordered) total += s->cardinality();

  TrainResult result;
  result.model = nn::build_network(specs, config.seed);
  nn::ParamVector w = nn::flatten(result.model);

  result.logs.push_back(
      {0, weighted_train_loss(result.model, ordered, total),
       nn::mean_loss(result.model, validation.inputs, validation.targets), 0});

  const int worker_count =
      std::min<int>(config.threads, static_cast<int>(ordered.size()));
  std::vector<nn::ParamVector> updates(ordered.size());
  std::vector<std::exception_ptr> failures(ordered.size());

  for (int round = 1; round <= config.rounds; ++round) {
    auto start = std::chrono::steady_clock::now();

    if (config.lr == 0.0) {
      // Exact no-op round: parameters are broadcast and returned unchanged.
      RoundLog log = result.logs.front();
      log.round = round;
      log.wall_ms = elapsed_ms(start);
      result.logs.push_back(log);
      if (on_round) on_round(round, result.model);
      continue;
    }

    auto run_client = [&](std::size_t i) {
      try {
        const ClientShard& shard = *ordered[i];
        Rng rng(stream_seed(config.seed,
                            static_cast<std::uint64_t>(shard.client_id) + 1,
                            static_cast<std::uint64_t>(round)));
        updates[i] = client_update(specs, w, shard, config.local_epochs,
                                   config.batch_size, config.lr, rng);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    };

    if (worker_count <= 1) {
      for (std::size_t i = 0; i < ordered.size(); ++i) run_client(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(worker_count));
      for (int t = 0; t < worker_count; ++t) {
        pool.emplace_back([&] {
          for (std::size_t i = next.fetch_add(1); i < ordered.size();
               i = next.fetch_add(1)) {
            run_client(i);
          }
        });
      }
      for (auto& th : pool) th.join();
    }

    // Fail fast: no partial aggregation if any client failed this round.
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      if (failures[i]) std::rethrow_exception(failures[i]);
    }

    std::vector<std::pair<int, nn::ParamVector>> weighted;
    weighted.reserve(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      weighted.emplace_back(ordered[i]->cardinality(), std::move(updates[i]));
    }
    w = aggregate(weighted);
    nn::unflatten_into(w, result.model);

    RoundLog log;
    log.round = round;
    log.train_loss = weighted_train_loss(result.model, ordered, total);
    log.val_loss =
        nn::mean_loss(result.model, validation.inputs, validation.targets);
    log.wall_ms = elapsed_ms(start);
    check_finite_loss(log.train_loss, log.val_loss, round);
    result.logs.push_back(log);
    if (on_round) on_round(round, result.model);
  }
  return result;
}

TrainResult run_centralized(const std::vector<nn::LayerSpec>& specs,
                            const Dataset& data, int epochs, int batch_size,
                            double lr, std::uint64_t seed,
                            const Dataset& validation,
                            const RoundObserver& on_round) {
  if (data.size() == 0) throw config_error("run_centralized: empty dataset");
  if (validation.size() == 0) {
    throw config_error("run_centralized: empty validation set");
  }
  if (epochs < 1) throw config_error("train.epochs: must be >= 1");
  if (batch_size < 1) throw config_error("train.B: must be >= 1");
  if (!(lr >= 0.0)) throw config_error("train.lr: must be >= 0");

  TrainResult result;
  int effective_batch = batch_size;
  if (batch_size > data.size()) {
    effective_batch = data.size();
    result.warnings.push_back("batch size " + std::to_string(batch_size) +
                              " exceeds dataset size " +
                              std::to_string(data.size()) + "; clamped");
  }

  result.model = nn::build_network(specs, seed);
  result.logs.push_back(
      {0, nn::mean_loss(result.model, data.inputs, data.targets),
       nn::mean_loss(result.model, validation.inputs, validation.targets), 0});

  Eigen::MatrixXd batch_x(data.inputs.rows(), effective_batch);
  Eigen::MatrixXd batch_y(data.targets.rows(), effective_batch);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    auto start = std::chrono::steady_clock::now();
    Rng rng(stream_seed(seed, 1, static_cast<std::uint64_t>(epoch)));
    if (lr > 0.0) {
      run_epoch(result.model, data, effective_batch, lr, rng, batch_x, batch_y);
    }
    RoundLog log;
    log.round = epoch;
    log.train_loss = nn::mean_loss(result.model, data.inputs, data.targets);
    log.val_loss =
        nn::mean_loss(result.model, validation.inputs, validation.targets);
    log.wall_ms = elapsed_ms(start);
    check_finite_loss(log.train_loss, log.val_loss, epoch);
    result.logs.push_back(log);
    if (on_round) on_round(epoch, result.model);
  }
  return result;
}

void write_round_logs(const std::filesystem::path& path,
                      const std::vector<RoundLog>& logs) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  os << "round,train_loss,val_loss,wall_ms\n";
  char line[160];
  for (const auto& log : logs) {
    std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%lld\n", log.round,
                  log.train_loss, log.val_loss,
                  static_cast<long long>(log.wall_ms));
    os << line;
  }
  if (!os) throw config_error("failed writing " + path.string());
}

}  // namespace fedtwin::fed
