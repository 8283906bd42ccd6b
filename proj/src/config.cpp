// SPDX-License-Identifier: Apache-2.0
#include "bsim/config.hpp"

#include <array>

namespace bsim {

std::optional<Errc> check_flags(const ConfigFlags& f) {
  if ((f.nss && f.nss_ps) || (f.pf_df && f.pf_ss)) return Errc::ConflictingFlags;
  const bool any_ukl = f.byp || f.nss || f.nss_ps || f.ret || f.pf_df || f.pf_ss;
  if (any_ukl && f.baseline != Baseline::LinkedBase) return Errc::FlagsRequireLinked;
  if ((f.nss || f.nss_ps) && !(f.pf_df || f.pf_ss)) return Errc::MissingFaultPolicy;
  return std::nullopt;
}

BoundaryConfig make_config(const ConfigFlags& flags) {
  if (auto err = check_flags(flags)) {
    std::string detail;
    switch (*err) {
      case Errc::ConflictingFlags: detail = "nss/nss_ps and pf_df/pf_ss are mutually exclusive"; break;
      case Errc::FlagsRequireLinked: detail = "configuration options need the linked baseline"; break;
      default: detail = "nss and nss_ps need pf_df or pf_ss"; break;
    }
    throw SimError(*err, detail);
  }
  return BoundaryConfig(flags);
}

namespace {

void append(std::string& out, std::string_view token) {
  if (!out.empty()) out += ',';
  out += token;
}

}  // namespace

std::string config_label(const BoundaryConfig& config) {
  const auto& f = config.flags();
  if (f.baseline == Baseline::Trap && !(f.byp || f.nss || f.nss_ps || f.ret || f.pf_df || f.pf_ss)) {
    return "trap";
  }
  std::string out;
  if (f.baseline == Baseline::Trap) out = "trap";
  if (f.byp) append(out, "byp");
  if (f.nss) append(out, "nss");
  if (f.nss_ps) append(out, "nss_ps");
  if (f.ret) append(out, "ret");
  if (f.pf_df) append(out, "pf_df");
  if (f.pf_ss) append(out, "pf_ss");
  return out.empty() ? "base" : out;
}

std::vector<BoundaryConfig> all_valid_configs() {
  std::vector<BoundaryConfig> out;
  out.push_back(make_config({}));
  for (int bits = 0; bits < 64; ++bits) {
    ConfigFlags f;
    f.baseline = Baseline::LinkedBase;
    f.byp = bits & 1;
    f.nss = bits & 2;
    f.nss_ps = bits & 4;
    f.ret = bits & 8;
    f.pf_df = bits & 16;
    f.pf_ss = bits & 32;
    if (!check_flags(f)) out.push_back(make_config(f));
  }
  return out;
}

std::string RunSetup::label() const {
  std::string out = config_label(config);
  if (app.shortcut) out = (out == "base" ? std::string("shortcut") : out + ",shortcut");
  if (app.run_to_completion) out = (out == "base" ? std::string("rtc") : out + ",rtc");
  return out;
}

RunSetup parse_setup(std::string_view tokens, Baseline default_baseline) {
  ConfigFlags f;
  f.baseline = default_baseline;
  AppProfile app;
  std::size_t pos = 0;
  while (pos <= tokens.size()) {
    std::size_t end = tokens.find(',', pos);
    if (end == std::string_view::npos) end = tokens.size();
    std::string_view tok = tokens.substr(pos, end - pos);
    pos = end + 1;
    if (tok.empty()) continue;
    if (tok == "trap") f.baseline = Baseline::Trap;
    else if (tok == "linked" || tok == "base") f.baseline = Baseline::LinkedBase;
    else if (tok == "byp") f.byp = true;
    else if (tok == "nss") f.nss = true;
    else if (tok == "nss_ps") f.nss_ps = true;
    else if (tok == "ret") f.ret = true;
    else if (tok == "pf_df") f.pf_df = true;
    else if (tok == "pf_ss") f.pf_ss = true;
    else if (tok == "shortcut") app.shortcut = true;
    else if (tok == "rtc") app.run_to_completion = true;
    else throw SimError(Errc::BadArgument, "unknown config token '" + std::string(tok) + "'");
  }
  RunSetup setup{make_config(f), app};
  if ((app.shortcut || app.run_to_completion) && !setup.config.linked()) {
    throw SimError(Errc::FlagsRequireLinked, "shortcut and rtc need the linked baseline");
  }
  return setup;
}

}  // namespace bsim
