#include "graindeck/training.hpp"

#include <cmath>
#include <sstream>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"

namespace graindeck {

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (lr_step < 0) throw ConfigError("lr_step must be non-negative");
  if (!(lr_gamma > 0.0) || lr_gamma > 1.0) throw ConfigError("lr_gamma must lie in (0, 1]");
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out.precision(6);
  out << "epoch,learning_rate,train_loss,val_loss," << metric_name << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << round_sig6(r.learning_rate) << ',' << round_sig6(r.train_loss) << ','
        << round_sig6(r.val_loss) << ',' << round_sig6(r.val_metric) << '\n';
  }
  return out.str();
}

}  // namespace graindeck
