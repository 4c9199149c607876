#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <dpaudit/errors.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/rng.hpp>
#include <dpaudit/version.hpp>

namespace dpaudit {

// Content hash for artifact integrity checks (FNV-1a over bytes). Guards
// against accidental edits and partial writes, not adversaries.
inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const auto n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[32];
  std::snprintf(hex, sizeof hex, "fnv64:%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// Write-then-rename so partial artifacts are never observed under the final
// name.
inline void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    if (!out) throw IoError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

struct StageInfo {
  bool complete = false;
  std::map<std::string, std::string> outputs;  // relative path -> content hash
};

struct Manifest {
  std::string experiment_id;
  std::uint64_t master_seed = 0;
  std::string created_utc;
  std::string toolkit_version = kVersion;
  std::string config_hash;  // hash of the generator config file, or "builtin"
  int n_cohorts = 3;
  std::map<std::string, StageInfo> stages;
};

inline ojson to_json(const Manifest& m) {
  ojson j;
  j["experiment_id"] = m.experiment_id;
  j["master_seed"] = m.master_seed;
  j["created_utc"] = m.created_utc;
  j["toolkit_version"] = m.toolkit_version;
  j["config_hash"] = m.config_hash;
  j["n_cohorts"] = m.n_cohorts;
  ojson stages = ojson::object();
  for (const auto& [name, info] : m.stages) {
    ojson s;
    s["complete"] = info.complete;
    s["outputs"] = info.outputs;
    stages[name] = std::move(s);
  }
  j["stages"] = std::move(stages);
  return j;
}

inline Manifest manifest_from_json(const ojson& j) {
  Manifest m;
  m.experiment_id = j.at("experiment_id").get<std::string>();
  m.master_seed = j.at("master_seed").get<std::uint64_t>();
  m.created_utc = j.at("created_utc").get<std::string>();
  m.toolkit_version = j.at("toolkit_version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.n_cohorts = j.at("n_cohorts").get<int>();
  for (const auto& [name, s] : j.at("stages").items()) {
    StageInfo info;
    info.complete = s.at("complete").get<bool>();
    info.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
    m.stages[name] = std::move(info);
  }
  return m;
}

enum class StageState { Missing, Complete, Stale, Partial };

// A plain directory tree holding every artifact of one experiment, with a
// manifest tracking stage completion and content hashes.
class ExperimentDir {
 public:
  static ExperimentDir open_or_create(const std::string& root, const std::string& experiment_id,
                                      std::uint64_t master_seed, const std::string& config_hash,
                                      int n_cohorts) {
    ExperimentDir dir(root);
    const auto mpath = dir.path("manifest.json");
    if (std::filesystem::exists(mpath)) {
      dir.load();
      if (dir.m_.experiment_id != experiment_id)
        throw ConfigError("directory belongs to experiment '" + dir.m_.experiment_id +
                          "', not '" + experiment_id + "'");
      if (dir.m_.master_seed != master_seed)
        throw ConfigError("directory was created with seed " +
                          std::to_string(dir.m_.master_seed));
      if (dir.m_.config_hash != config_hash)
        throw ConfigError("config changed since the experiment was created (hash " +
                          dir.m_.config_hash + " vs " + config_hash + ")");
      return dir;
    }
    std::filesystem::create_directories(root);
    dir.m_.experiment_id = experiment_id;
    dir.m_.master_seed = master_seed;
    dir.m_.config_hash = config_hash;
    dir.m_.n_cohorts = n_cohorts;
    {
      std::time_t t = std::time(nullptr);
      std::tm tm{};
      gmtime_r(&t, &tm);
      char buf[32];
      std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
      dir.m_.created_utc = buf;
    }
    dir.save();
    return dir;
  }

  static ExperimentDir open_existing(const std::string& root) {
    ExperimentDir dir(root);
    if (!std::filesystem::exists(dir.path("manifest.json")))
      throw MissingStage("no experiment at " + root + " (run 'generate' first)");
    dir.load();
    return dir;
  }

  const Manifest& manifest() const { return m_; }
  const std::string& root() const { return root_; }

  std::string path(const std::string& rel) const { return root_ + "/" + rel; }

  void ensure_subdir(const std::string& rel) const {
    std::filesystem::create_directories(path(rel));
  }

  StageState stage_state(const std::string& stage) const {
    auto it = m_.stages.find(stage);
    if (it == m_.stages.end() || !it->second.complete) {
      // partial if any of the recorded (or expected) outputs already exist
      if (it != m_.stages.end())
        for (const auto& [rel, hash] : it->second.outputs)
          if (std::filesystem::exists(path(rel))) return StageState::Partial;
      return StageState::Missing;
    }
    for (const auto& [rel, hash] : it->second.outputs) {
      if (!std::filesystem::exists(path(rel))) return StageState::Stale;
      if (hash_file(path(rel)) != hash) return StageState::Stale;
    }
    return StageState::Complete;
  }

  bool stage_complete(const std::string& stage) const {
    return stage_state(stage) == StageState::Complete;
  }

  void require_stage(const std::string& stage, const std::string& needed_by) {
    const auto state = stage_state(stage);
    if (state == StageState::Complete) return;
    if (state == StageState::Stale)
      throw MissingStage("stage '" + stage + "' artifacts fail hash verification; rerun it before '" +
                         needed_by + "'");
    throw MissingStage("stage '" + stage + "' must run before '" + needed_by + "'");
  }

  void mark_stage(const std::string& stage, const std::vector<std::string>& output_rel_paths) {
    StageInfo info;
    info.complete = true;
    for (const auto& rel : output_rel_paths) info.outputs[rel] = hash_file(path(rel));
    m_.stages[stage] = std::move(info);
    save();
  }

  void clear_stage(const std::string& stage) {
    m_.stages.erase(stage);
    save();
  }

 private:
  explicit ExperimentDir(std::string root) : root_(std::move(root)) {}

  void load() {
    std::ifstream in(path("manifest.json"));
    std::ostringstream ss;
    ss << in.rdbuf();
    auto j = ojson::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw ParseError("manifest.json is corrupt");
    m_ = manifest_from_json(j);
  }

  void save() { atomic_write(path("manifest.json"), to_json(m_).dump(2) + "\n"); }

  std::string root_;
  Manifest m_;
};

// One pipeline invocation per experiment directory, enforced with an
// exclusive lock file removed on destruction.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw LockError("another invocation holds " + path_ +
                      " (remove it if the previous run crashed)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd_, pid.data(), pid.size());
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace dpaudit
