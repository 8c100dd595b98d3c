#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>

#include "fastgrant/sim/types.hpp"

namespace fastgrant::sim {

enum class TraceLevel : std::uint8_t {
  kNone = 0,
  /// Access events, grant broadcasts and packet terminal events.
  kAccess = 1,
  /// Everything in kAccess plus packet arrivals and event onsets.
  kFull = 2,
};

std::string_view to_string(TraceLevel level);
std::optional<TraceLevel> parse_trace_level(std::string_view text);

/// Line-delimited JSON trace. Each record is
///   {"t_ms":T,"mtd_id":ID|null,"event_kind":"K","detail":{...}}
/// with keys always in that order so traces compare byte for byte.
class TraceSink {
 public:
  explicit TraceSink(TraceLevel level) : level_(level) {}
  virtual ~TraceSink() = default;

  TraceLevel level() const { return level_; }
  bool enabled(TraceLevel needed) const {
    return level_ != TraceLevel::kNone && level_ >= needed;
  }

  /// `detail_json` must be a JSON object literal, e.g. {"slot":3}.
  void record(Millis t, std::optional<MtdId> mtd, std::string_view event_kind,
              std::string_view detail_json);

  std::uint64_t records() const { return records_; }
  /// FNV-1a over every emitted byte.
  std::uint64_t digest() const { return digest_; }

 protected:
  virtual void write_line(std::string_view line) = 0;

 private:
  TraceLevel level_;
  std::uint64_t records_ = 0;
  std::uint64_t digest_ = 0xcbf29ce484222325ULL;
  std::string scratch_;
};

class StringTraceSink final : public TraceSink {
 public:
  using TraceSink::TraceSink;
  const std::string& text() const { return text_; }

 protected:
  void write_line(std::string_view line) override;

 private:
  std::string text_;
};

class FileTraceSink final : public TraceSink {
 public:
  /// Throws std::runtime_error naming the path when it cannot be opened.
  FileTraceSink(TraceLevel level, const std::string& path);

 protected:
  void write_line(std::string_view line) override;

 private:
  std::ofstream out_;
};

/// Counts and digests records without storing them.
class DigestTraceSink final : public TraceSink {
 public:
  using TraceSink::TraceSink;

 protected:
  void write_line(std::string_view) override {}
};

}  // namespace fastgrant::sim
