#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fastgrant/sim/types.hpp"

namespace fastgrant::predict {

using EpisodeId = std::uint32_t;

/// Tag carried by an observed transmission: nullopt marks a periodic report,
/// otherwise the event episode the packet was attributed to.
using ObservationTag = std::optional<EpisodeId>;

/// Event packets seen outside any open episode.
inline constexpr EpisodeId kUnattributedEpisode = 0xffffffffu;

struct Observation {
  Millis t = 0;
  int size_rbs = 1;
  ObservationTag tag;
};

/// Transmissions the base station has actually observed, per MTD.
class TxHistory {
 public:
  /// Inserts in time order (after any equal timestamps). Throws
  /// std::invalid_argument when t > now.
  void observe(MtdId mtd, Millis t, int size_rbs, ObservationTag tag, Millis now);

  std::span<const Observation> of(MtdId mtd) const;
  std::size_t size(MtdId mtd) const { return of(mtd).size(); }
  std::vector<MtdId> mtds() const;

 private:
  std::map<MtdId, std::vector<Observation>> per_mtd_;
};

}  // namespace fastgrant::predict
