#include "raisdr/store.hpp"

#include <cstdint>
#include <fstream>
#include <string>

#include "raisdr/error.hpp"

namespace raisdr {

namespace {

void read_lines(const std::filesystem::path& path,
                std::vector<nlohmann::json>& out, bool tolerate_torn_tail) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      if (tolerate_torn_tail && in.peek() == std::char_traits<char>::eof()) {
        return;
      }
      throw Error(ErrorCode::ParseError, path.string() + ":" +
                                             std::to_string(number) + ": " +
                                             e.what());
    }
  }
}

void write_all(const std::filesystem::path& path,
               const std::vector<nlohmann::json>& events) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& e : events) out << e.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace

EventStore::EventStore(std::optional<std::filesystem::path> dir)
    : dir_(std::move(dir)) {
  if (!dir_) return;
  std::error_code ec;
  std::filesystem::create_directories(*dir_, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create " + dir_->string() + ": " + ec.message());
  }
  memory_ = load();
}

std::vector<nlohmann::json> EventStore::load() const {
  std::lock_guard lock(mu_);
  if (!dir_) return memory_;
  std::vector<nlohmann::json> events;
  read_lines(snapshot_path(), events, false);
  const std::uint64_t compacted = events.empty() ? 0 : events.back().value("seq", 0ULL);
  std::vector<nlohmann::json> log;
  read_lines(log_path(), log, true);
  for (auto& e : log) {
    // A crash between snapshot rename and log truncation leaves duplicates.
    if (e.value("seq", 0ULL) > compacted) events.push_back(std::move(e));
  }
  return events;
}

nlohmann::json EventStore::append(nlohmann::json event) {
  std::lock_guard lock(mu_);
  event["seq"] = memory_.size() + 1;
  if (dir_) {
    std::ofstream out(log_path(), std::ios::app);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + log_path().string());
  }
  memory_.push_back(event);
  return event;
}

void EventStore::compact() {
  std::lock_guard lock(mu_);
  if (!dir_) return;
  const auto tmp = *dir_ / "snapshot.jsonl.tmp";
  write_all(tmp, memory_);
  std::filesystem::rename(tmp, snapshot_path());
  std::ofstream(log_path(), std::ios::trunc).flush();
}

}  // namespace raisdr
