#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace commtype {

/// 1-based position in a source text. line == 0 means "unknown".
struct SourceLoc {
  int line = 0;
  int column = 0;

  bool known() const { return line > 0; }
  bool operator==(const SourceLoc&) const = default;
};

std::string to_string(SourceLoc loc);

/// Raised by every parser in the library. Carries the offending position and
/// the set of tokens that would have been accepted there.
class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(SourceLoc loc, std::string message,
              std::vector<std::string> expected = {});

  SourceLoc loc() const { return loc_; }
  const std::string& detail() const { return detail_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  SourceLoc loc_;
  std::string detail_;
  std::vector<std::string> expected_;
};

struct Diagnostic {
  std::string code;     // stable, machine-readable class, e.g. "peer-mismatch"
  std::string message;  // human-readable
  SourceLoc loc;
  std::string path;     // location inside an AST when no source position applies

  bool operator==(const Diagnostic&) const = default;
};

/// `file:line:col: message`, degrading gracefully when the position is unknown.
std::string render(const Diagnostic& d, std::string_view file);

/// `rank:line.col:code:message`; rank is "*" for diagnostics not tied to a rank.
std::string render_report_line(const Diagnostic& d, std::string_view rank);

}  // namespace commtype
