#pragma once

#include <mutex>
#include <ostream>
#include <string_view>

#include "recrefine/jsonl.hpp"

namespace recrefine {

/// Line-oriented JSON event sink. One object per line:
/// {"event": <name>, ...fields}.
class EventLog {
 public:
  explicit EventLog(std::ostream* out = nullptr) : out_(out) {}

  void emit(std::string_view event, json fields = json::object());

 private:
  std::ostream* out_;
  std::mutex mu_;
};

}  // namespace recrefine
