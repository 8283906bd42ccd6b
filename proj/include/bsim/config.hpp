// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bsim/error.hpp"

namespace bsim {

// Trap models an ordinary process reaching the kernel through a privilege
// switch; LinkedBase is the application linked into the kernel image.
enum class Baseline { Trap, LinkedBase };

struct ConfigFlags {
  Baseline baseline = Baseline::Trap;
  bool byp = false;     // bypass entry/exit code
  bool nss = false;     // no stack switch
  bool nss_ps = false;  // no stack switch, pinned user stacks
  bool ret = false;     // ret instead of iret on fault/interrupt return
  bool pf_df = false;   // stack faults routed through the double-fault stack
  bool pf_ss = false;   // every fault on a dedicated stack

  friend bool operator==(const ConfigFlags&, const ConfigFlags&) = default;
};

// A validated point on the boundary spectrum. Only make_config() produces
// checked values; unchecked() exists so tests can exercise invalid ones.
class BoundaryConfig {
 public:
  static BoundaryConfig unchecked(const ConfigFlags& flags) { return BoundaryConfig(flags); }

  const ConfigFlags& flags() const noexcept { return flags_; }
  Baseline baseline() const noexcept { return flags_.baseline; }
  bool linked() const noexcept { return flags_.baseline == Baseline::LinkedBase; }
  bool byp() const noexcept { return flags_.byp; }
  bool nss() const noexcept { return flags_.nss; }
  bool nss_ps() const noexcept { return flags_.nss_ps; }
  bool ret() const noexcept { return flags_.ret; }
  bool pf_df() const noexcept { return flags_.pf_df; }
  bool pf_ss() const noexcept { return flags_.pf_ss; }
  // Kernel code keeps running on the application's stack.
  bool shares_stack() const noexcept { return flags_.nss || flags_.nss_ps; }

  friend bool operator==(const BoundaryConfig&, const BoundaryConfig&) = default;

 private:
  explicit BoundaryConfig(const ConfigFlags& flags) : flags_(flags) {}
  friend BoundaryConfig make_config(const ConfigFlags& flags);

  ConfigFlags flags_;
};

// Returns the first violated rule, if any. Order: ConflictingFlags,
// FlagsRequireLinked, MissingFaultPolicy.
std::optional<Errc> check_flags(const ConfigFlags& flags);

// Throws SimError carrying the check_flags() error; never normalizes.
BoundaryConfig make_config(const ConfigFlags& flags);

// Canonical lowercase label: "trap", "base", or the set flags in table order
// joined by commas (e.g. "byp,ret").
std::string config_label(const BoundaryConfig& config);

// Every valid configuration: the trap baseline plus all 28 linked variants.
std::vector<BoundaryConfig> all_valid_configs();

// Application-side modifications that are not kernel configuration options.
struct AppProfile {
  bool shortcut = false;           // call the transport layer directly
  bool run_to_completion = false;  // kernel_execution flag on the hot thread

  friend bool operator==(const AppProfile&, const AppProfile&) = default;
};

struct RunSetup {
  BoundaryConfig config = make_config({});
  AppProfile app;

  std::string label() const;
};

// Parses a comma-separated token list such as "ret,byp,shortcut". Tokens
// "trap" and "linked"/"base" choose the baseline; otherwise default_baseline
// applies. Application tokens are "shortcut" and "rtc".
RunSetup parse_setup(std::string_view tokens, Baseline default_baseline);

}  // namespace bsim
