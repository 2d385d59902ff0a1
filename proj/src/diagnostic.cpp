#include "commtype/diagnostic.hpp"

namespace commtype {

std::string to_string(SourceLoc loc) {
  if (!loc.known()) return "?";
  return std::to_string(loc.line) + ":" + std::to_string(loc.column);
}

namespace {

std::string compose(SourceLoc loc, const std::string& message,
                    const std::vector<std::string>& expected) {
  std::string out = to_string(loc) + ": " + message;
  if (!expected.empty()) {
    out += " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i > 0) out += i + 1 == expected.size() ? " or " : ", ";
      out += expected[i];
    }
    out += ")";
  }
  return out;
}

}  // namespace

SyntaxError::SyntaxError(SourceLoc loc, std::string message,
                         std::vector<std::string> expected)
    : std::runtime_error(compose(loc, message, expected)),
      loc_(loc),
      detail_(std::move(message)),
      expected_(std::move(expected)) {}

std::string render(const Diagnostic& d, std::string_view file) {
  std::string out(file);
  if (d.loc.known()) {
    out += ":" + to_string(d.loc);
  } else if (!d.path.empty()) {
    out += ":" + d.path;
  }
  out += ": " + d.message;
  return out;
}

std::string render_report_line(const Diagnostic& d, std::string_view rank) {
  std::string loc = d.loc.known()
                        ? std::to_string(d.loc.line) + "." + std::to_string(d.loc.column)
                        : (d.path.empty() ? "-" : d.path);
  return std::string(rank) + ":" + loc + ":" + d.code + ":" + d.message;
}

}  // namespace commtype
