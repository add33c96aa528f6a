#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graindeck {

/// Optimisation settings shared by both networks.
struct TrainHyper {
  double learning_rate = 0.05;
  int batch_size = 32;
  int epochs = 12;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  /// Multiply the learning rate by lr_gamma every lr_step epochs (0 = never).
  int lr_step = 0;
  double lr_gamma = 0.1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  /// Validation accuracy for the classifier, aggregate IoU for the segmenter.
  double val_metric = 0.0;
};

struct TrainHistory {
  TrainHyper hyper;
  std::string metric_name;
  std::vector<EpochRecord> records;
  int best_epoch = 0;
  double best_metric = 0.0;

  /// epoch,learning_rate,train_loss,val_loss,<metric_name>
  std::string to_csv() const;
};

}  // namespace graindeck
