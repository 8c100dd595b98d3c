#include "fastgrant/predict/history.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fastgrant::predict {

void TxHistory::observe(MtdId mtd, Millis t, int size_rbs, ObservationTag tag, Millis now) {
  if (t > now) {
    throw std::invalid_argument("observation at t=" + std::to_string(t) +
                                " is in the future (now=" + std::to_string(now) + ")");
  }
  auto& v = per_mtd_[mtd];
  auto pos = std::upper_bound(v.begin(), v.end(), t,
                              [](Millis x, const Observation& o) { return x < o.t; });
  v.insert(pos, Observation{t, size_rbs, tag});
}

std::span<const Observation> TxHistory::of(MtdId mtd) const {
  auto it = per_mtd_.find(mtd);
  if (it == per_mtd_.end()) return {};
  return it->second;
}

std::vector<MtdId> TxHistory::mtds() const {
  std::vector<MtdId> out;
  out.reserve(per_mtd_.size());
  for (const auto& [id, _] : per_mtd_) out.push_back(id);
  return out;
}

}  // namespace fastgrant::predict
