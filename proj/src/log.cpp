#include "recrefine/log.hpp"

namespace recrefine {

void EventLog::emit(std::string_view event, json fields) {
  if (out_ == nullptr) return;
  if (!fields.is_object()) fields = json{{"value", std::move(fields)}};
  fields["event"] = event;
  std::lock_guard lock(mu_);
  *out_ << fields.dump() << '\n';
  out_->flush();
}

}  // namespace recrefine
