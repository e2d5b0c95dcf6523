#pragma once

// Single-directory event store: an append-only JSON-lines log plus a
// snapshot holding the compacted prefix.

#include <filesystem>
#include <mutex>
#include <optional>
#include <vector>

#include "json.hpp"

namespace raisdr {

class EventStore {
 public:
  /// No directory keeps events in memory only.
  explicit EventStore(std::optional<std::filesystem::path> dir = std::nullopt);

  /// Snapshot events followed by log events. A torn final log line (crash
  /// mid-append) is ignored. Throws IoError / ParseError.
  std::vector<nlohmann::json> load() const;

  /// Stamps the next sequence number, writes and flushes one line, and
  /// returns the stored event. Throws IoError.
  nlohmann::json append(nlohmann::json event);

  /// Rewrites the snapshot with every event so far and empties the log.
  void compact();

  bool persistent() const noexcept { return dir_.has_value(); }

 private:
  std::filesystem::path snapshot_path() const { return *dir_ / "snapshot.jsonl"; }
  std::filesystem::path log_path() const { return *dir_ / "events.jsonl"; }

  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::vector<nlohmann::json> memory_;
};

}  // namespace raisdr
