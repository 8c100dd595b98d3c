#include "fastgrant/sim/trace.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace fastgrant::sim {

std::string_view to_string(TraceLevel level) {
  switch (level) {
    case TraceLevel::kNone: return "none";
    case TraceLevel::kAccess: return "access";
    case TraceLevel::kFull: return "full";
  }
  return "none";
}

std::optional<TraceLevel> parse_trace_level(std::string_view text) {
  if (text == "none") return TraceLevel::kNone;
  if (text == "access") return TraceLevel::kAccess;
  if (text == "full") return TraceLevel::kFull;
  return std::nullopt;
}

void TraceSink::record(Millis t, std::optional<MtdId> mtd,
                       std::string_view event_kind,
                       std::string_view detail_json) {
  scratch_.clear();
  if (mtd) {
    fmt::format_to(std::back_inserter(scratch_),
                   R"({{"t_ms":{},"mtd_id":{},"event_kind":"{}","detail":{}}})",
                   t, *mtd, event_kind, detail_json);
  } else {
    fmt::format_to(std::back_inserter(scratch_),
                   R"({{"t_ms":{},"mtd_id":null,"event_kind":"{}","detail":{}}})",
                   t, event_kind, detail_json);
  }
  scratch_.push_back('\n');
  for (unsigned char c : scratch_) {
    digest_ ^= c;
    digest_ *= 0x100000001b3ULL;
  }
  ++records_;
  write_line(scratch_);
}

void StringTraceSink::write_line(std::string_view line) { text_.append(line); }

FileTraceSink::FileTraceSink(TraceLevel level, const std::string& path)
    : TraceSink(level), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open trace file: " + path);
}

void FileTraceSink::write_line(std::string_view line) {
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
}

}  // namespace fastgrant::sim
