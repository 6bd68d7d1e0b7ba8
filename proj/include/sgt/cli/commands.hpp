#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sgt::cli {

inline constexpr int kArtifactFormat = 1;

// Exit codes; the matching category is the second word of the error line
// `error: <category>: <message>`.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kParse = 5,
  kInput = 6,
};

struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigFile {
  std::string command;  // set when the file is an artifact header
  std::vector<ConfigEntry> entries;
};

// Flat `key=value` lines; blank lines and `#` comments are skipped. A file
// holding an artifact header (`# sgt <command> format=N` followed by
// `# key=value` lines) or a mapper checkpoint (`meta config.<key> <value>`)
// yields that header instead, so any artifact can serve as the config that
// regenerates it.
ConfigFile read_config(std::istream& in, const std::string& source);

// The `sgt` command line. args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sgt::cli
