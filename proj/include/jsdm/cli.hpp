#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace jsdm::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kManifestName = "run_manifest.json";
inline constexpr const char* kLockName = ".jsdm_odds.lock";

/// Exit statuses of command_dispatch.
enum ExitStatus : int {
  kOk = 0,
  kFailure = 1,      // numerical or I/O failure during a run
  kUsage = 2,        // unknown command, unknown flag, malformed flag value
  kBadInput = 3,     // missing inputs, ingestion errors, invalid configuration
  kLocked = 4        // another run holds the output directory
};

/// Required upstream artifacts are absent.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The output directory is held by another live process.
class LockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command name, output directory, seed and command parameters. Parameters are a flat
/// JSON object whose keys are fixed per command; defaults < config file < flags.
struct RunConfig {
  std::string command;
  fs::path out;
  std::uint64_t seed = 1;
  nlohmann::json params = nlohmann::json::object();

  /// Command defaults.
  static RunConfig defaults(const std::string& command);
  /// Overlays a config document. Unknown keys are rejected.
  void merge(const nlohmann::json& doc);
  /// Referenced paths exist, grid resolution >= 2 per axis, enumerations are known.
  void validate() const;
  /// Canonical form: {"command", "seed", "params"}; the output directory is not part of it.
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical form.
  std::string hash() const;
};

/// Exclusive hold on an output directory via an O_EXCL lockfile holding the owner's pid.
/// A lockfile whose owner no longer exists is taken over.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

/// "A:B,C:D" -> {{"A","B"},{"C","D"}}.
std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text);
/// "NX,NY" -> {NX, NY}.
std::pair<long, long> parse_grid(const std::string& text);

/// Keys written to every run manifest, in order.
const std::vector<std::string>& manifest_keys();

int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int command_dispatch(int argc, char** argv);

}  // namespace jsdm::cli
