#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <dpaudit/errors.hpp>
#include <dpaudit/institutions.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/rng.hpp>

namespace dpaudit {

enum class System { S1 = 1, S2 = 2 };
enum class SystemMode { Omitted, Specified };

inline const char* to_string(System s) { return s == System::S1 ? "s1" : "s2"; }
inline const char* to_string(SystemMode m) {
  return m == SystemMode::Omitted ? "omitted" : "specified";
}
inline System system_from_string(const std::string& s) {
  if (s == "s1") return System::S1;
  if (s == "s2") return System::S2;
  throw ParseError("unknown system '" + s + "' (expected s1 or s2)");
}
inline SystemMode mode_from_string(const std::string& s) {
  if (s == "omitted") return SystemMode::Omitted;
  if (s == "specified") return SystemMode::Specified;
  throw ParseError("unknown mode '" + s + "' (expected omitted or specified)");
}

inline std::string replace_all(std::string text, const std::string& slot,
                               const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

// The nine visible attribute lines. Label spelling (including HIGH SHOOL
// TYPE) matches the bundled templates exactly; round-trip parsing and the
// template set depend on these strings, so do not edit them independently.
inline std::vector<std::string> profile_attribute_lines(const Profile& p) {
  char buf[64];
  std::vector<std::string> lines;
  lines.reserve(9);
  std::snprintf(buf, sizeof buf, "GPA: %.2f", p.gpa);
  lines.emplace_back(buf);
  lines.push_back("SAT: " + std::to_string(p.sat));
  lines.push_back("NUMBER OF EXTRACURRICULAR ACTIVITIES REPORTED: " + std::to_string(p.activity));
  lines.push_back("NUMBER OF LEADERSHIP ROLES IN EXTRACURRICULAR ACTIVITIES: " +
                  std::to_string(p.leadership));
  lines.push_back("NUMBER OF AWARDS RECEIVED IN EXTRACURRICULAR ACTIVITIES: " +
                  std::to_string(p.award));
  lines.push_back(std::string("FIRST-GENERATION STUDENT STATUS: ") + (p.first_gen ? "Yes" : "No"));
  lines.push_back(std::string("ELIGIBLE FOR FEE WAIVER: ") + (p.fee_waiver ? "Yes" : "No"));
  lines.push_back(std::string("HIGH SHOOL TYPE: ") + to_string(p.school_type));
  lines.push_back("ZIP CODE: " + p.zip);
  return lines;
}

// Renders the profile block. The line order depends only on attr_seed, so one
// seed means one fixed attribute order across all profiles. Latent fields and
// quintiles are never rendered.
inline std::string render_profile_text(const Profile& p, int attr_seed) {
  auto lines = profile_attribute_lines(p);
  RngStream rng(0, "attr_permutation", static_cast<std::uint64_t>(attr_seed));
  rng.shuffle(lines);
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < lines.size()) out += '\n';
  }
  return out;
}

inline std::string format_rate_percent(double rate) {
  const double pct = rate * 100.0;
  char buf[32];
  if (std::abs(pct - std::llround(pct)) < 1e-9)
    std::snprintf(buf, sizeof buf, "%lld%%", static_cast<long long>(std::llround(pct)));
  else
    std::snprintf(buf, sizeof buf, "%.1f%%", pct);
  return buf;
}

inline std::string default_asset_dir() {
  if (const char* env = std::getenv("DPAUDIT_ASSETS")) return env;
#ifdef DPAUDIT_SOURCE_DIR
  return std::string(DPAUDIT_SOURCE_DIR) + "/assets";
#else
  return "assets";
#endif
}

// Bundled prompt templates with {institute}, {acceptance_rate}, {tier_name},
// {rate_range}, {profile} and {explanation} slots. Loaded verbatim from text
// assets (one trailing newline trimmed).
class PromptLibrary {
 public:
  static PromptLibrary load(const std::string& dir = default_asset_dir()) {
    PromptLibrary lib;
    const std::string base = dir + "/prompts/";
    lib.system_omitted_ = read_asset(base + "system_omitted.txt");
    lib.system_specified_ = read_asset(base + "system_specified.txt");
    for (int v = 1; v <= 3; ++v) {
      lib.s1_[static_cast<std::size_t>(v - 1)] =
          read_asset(base + "s1_variant" + std::to_string(v) + ".txt");
      lib.s2_[static_cast<std::size_t>(v - 1)] =
          read_asset(base + "s2_variant" + std::to_string(v) + ".txt");
    }
    lib.tag_ = read_asset(base + "tag_prompt.txt");
    return lib;
  }

  std::string system_text(const Institution& inst, SystemMode mode) const {
    if (mode == SystemMode::Specified) {
      std::string t = replace_all(system_specified_, "{institute}", inst.name);
      return replace_all(t, "{acceptance_rate}", format_rate_percent(inst.acceptance_rate));
    }
    std::string t = replace_all(system_omitted_, "{institute}", inst.name);
    t = replace_all(t, "{tier_name}", tier_display_name(inst.tier));
    return replace_all(t, "{rate_range}", tier_rate_range(inst.tier));
  }

  std::string user_text(System system, int variant, const std::string& profile_text) const {
    if (variant < 1 || variant > 3)
      throw UnknownVariant("prompt variant " + std::to_string(variant) + " (expected 1..3)");
    const auto& tmpl = (system == System::S1 ? s1_ : s2_)[static_cast<std::size_t>(variant - 1)];
    return replace_all(tmpl, "{profile}", profile_text);
  }

  // Judge prompt with the explanation spliced in verbatim.
  std::string tag_prompt(const std::string& explanation) const {
    if (explanation.empty()) throw EmptyExplanation("cannot tag an empty explanation");
    return replace_all(tag_, "{explanation}", explanation);
  }

 private:
  static std::string read_asset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read prompt asset: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    if (!s.empty() && s.back() == '\n') s.pop_back();
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  }

  std::string system_omitted_, system_specified_;
  std::array<std::string, 3> s1_, s2_;
  std::string tag_;
};

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
};

// Full prompt for one trial. With merge_system set (for endpoints that reject
// system roles) the system text is prepended to the user text instead.
inline RenderedPrompt render_prompt(const PromptLibrary& lib, const Institution& inst,
                                    const Profile& profile, System system, SystemMode mode,
                                    int variant, int attr_seed, bool merge_system = false) {
  RenderedPrompt r;
  r.system_text = lib.system_text(inst, mode);
  r.user_text = lib.user_text(system, variant, render_profile_text(profile, attr_seed));
  if (merge_system) {
    r.user_text = r.system_text + "\n\n" + r.user_text;
    r.system_text.clear();
  }
  return r;
}

}  // namespace dpaudit
