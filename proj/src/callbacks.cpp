#include "bteflow/callbacks.hpp"

#include "bteflow/entities.hpp"
#include "bteflow/error.hpp"

namespace bteflow {

CallbackHandle CallbackRegistry::register_callback(const std::string& name, int arity,
                                                   CallbackStage stage) {
  if (name.empty() || is_reserved_name(name))
    throw ValidationError("invalid callback name '" + name + "'");
  if (arity < 0) throw ValidationError("callback '" + name + "' has negative arity");
  if (by_name_.count(name)) throw ValidationError("callback '" + name + "' already registered");
  const int id = static_cast<int>(infos_.size());
  infos_.push_back({name, arity, stage});
  by_name_[name] = id;
  return CallbackHandle{id};
}

const CallbackInfo* CallbackRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &infos_[it->second];
}

std::vector<std::string> CallbackRegistry::post_step_hooks() const {
  std::vector<std::string> out;
  for (const CallbackInfo& info : infos_)
    if (info.stage == CallbackStage::PostStep) out.push_back(info.name);
  return out;
}

}  // namespace bteflow
