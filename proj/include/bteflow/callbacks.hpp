#pragma once

#include <map>
#include <string>
#include <vector>

namespace bteflow {

enum class CallbackStage { Boundary, Coefficient, PostStep };

struct CallbackHandle {
  int id = -1;
};

struct CallbackInfo {
  std::string name;
  int arity = 0;
  CallbackStage stage = CallbackStage::Boundary;
};

/// Names, arities and stages of user callbacks known to the frontend.
///
/// The registry only carries signatures; implementations are bound by name
/// when the runtime is assembled.
class CallbackRegistry {
 public:
  CallbackHandle register_callback(const std::string& name, int arity, CallbackStage stage);

  [[nodiscard]] const CallbackInfo* find(const std::string& name) const;
  [[nodiscard]] const CallbackInfo& at(CallbackHandle h) const { return infos_.at(h.id); }

  /// Post-step hooks in registration order.
  [[nodiscard]] std::vector<std::string> post_step_hooks() const;

  [[nodiscard]] const std::vector<CallbackInfo>& all() const noexcept { return infos_; }

 private:
  std::vector<CallbackInfo> infos_;
  std::map<std::string, int> by_name_;
};

}  // namespace bteflow
