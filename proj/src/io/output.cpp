#include "qbar/io/output.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

#include "qbar/errors.hpp"
#include "qbar/io/csv.hpp"

namespace qbar::io {

namespace fs = std::filesystem;

json json_number(double v) {
  if (!std::isfinite(v)) return format_number(v);
  return std::strtod(format_number(v).c_str(), nullptr);
}

json json_array(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(json_number(x));
  return out;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

void StagedOutput::add(std::string name, std::string content) {
  for (const auto& f : files_) {
    if (f.first == name) throw ArgumentError("duplicate output file '" + name + "'");
  }
  files_.emplace_back(std::move(name), std::move(content));
}

std::vector<fs::path> StagedOutput::commit(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ResourceError("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::vector<fs::path> temps;
  const auto cleanup = [&] {
    for (const auto& t : temps) fs::remove(t, ec);
  };
  for (const auto& [name, content] : files_) {
    const fs::path tmp = dir / ("." + name + ".tmp");
    temps.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) {
      cleanup();
      throw ResourceError("cannot write '" + tmp.string() + "'");
    }
  }
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < files_.size(); ++i) {
    const fs::path target = dir / files_[i].first;
    fs::rename(temps[i], target, ec);
    if (ec) {
      const std::string why = ec.message();
      cleanup();
      for (const auto& w : written) fs::remove(w, ec);
      throw ResourceError("cannot rename into '" + target.string() + "': " + why);
    }
    written.push_back(target);
  }
  return written;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace qbar::io
