#pragma once

// Result emission: JSON numbers rounded to the output precision, and a
// staged file set that reaches disk only as a whole.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace qbar::io {

using json = nlohmann::ordered_json;

// Rounded to 12 significant digits; non-finite values become strings.
json json_number(double v);
json json_array(const std::vector<double>& v);

// Two-space indented, trailing newline.
std::string dump_json(const json& j);

class StagedOutput {
 public:
  void add(std::string name, std::string content);
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  // Writes every file to a temporary name in `dir`, then renames them into
  // place. On failure the temporaries and any files already renamed are
  // removed; throws ResourceError.
  std::vector<std::filesystem::path> commit(const std::filesystem::path& dir) const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

std::string read_file(const std::filesystem::path& path);  // ResourceError

}  // namespace qbar::io
