#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "commtype/ensemble.hpp"
#include "commtype/minimpi.hpp"
#include "commtype/projection.hpp"
#include "commtype/protocol.hpp"
#include "commtype/wellformedness.hpp"

namespace commtype::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised after a source file failed to parse; already reported.
struct Reported {};

std::int64_t parse_int(std::string_view text, std::string_view what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw UsageError(std::string(what) + ": '" + std::string(text) + "' is not an integer");
  }
  return v;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::pair<std::string, std::string> split_binding(std::string_view text, std::string_view what) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw UsageError(std::string(what) + ": expected name=value, got '" + std::string(text) + "'");
  }
  std::string key = trim(text.substr(0, eq));
  if (key.empty()) throw UsageError(std::string(what) + ": empty name in '" + std::string(text) + "'");
  return {key, trim(text.substr(eq + 1))};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Manifest {
  std::optional<fs::path> protocol;
  std::optional<fs::path> program;
  std::map<std::string, std::int64_t> bindings;
  std::optional<int> max_loop_iters;
  std::optional<std::size_t> state_limit;
};

// Flat `key = value` lines; `#` starts a comment. Paths are relative to the
// manifest's directory.
Manifest read_manifest(const fs::path& path) {
  Manifest m;
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  fs::path base = path.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::string where = path.string() + ":" + std::to_string(line_no);
    auto [key, value] = split_binding(line, where);
    if (key == "protocol") {
      m.protocol = base / value;
    } else if (key == "program") {
      m.program = base / value;
    } else if (key == "max-loop-iters") {
      m.max_loop_iters = static_cast<int>(parse_int(value, where));
    } else if (key == "state-limit") {
      m.state_limit = static_cast<std::size_t>(parse_int(value, where));
    } else {
      m.bindings[key] = parse_int(value, where);
    }
  }
  return m;
}

struct Options {
  std::vector<std::string> files;
  std::vector<std::string> params;
  std::string manifest;
  std::string program;
  std::string out_dir = ".";
  std::string witness;
  std::optional<int> max_loop_iters;
  std::optional<std::size_t> state_limit;
  std::optional<std::int64_t> nprocs;
  bool report = false;
};

class Session {
 public:
  Session(const Options& opts, std::ostream& out, std::ostream& err)
      : opts_(opts), out_(out), err_(err) {
    if (!opts.manifest.empty()) manifest_ = read_manifest(opts.manifest);
    for (const auto& p : opts.params) {
      auto [key, value] = split_binding(p, "--param");
      flag_bindings_[key] = parse_int(value, "--param " + key);
    }
  }

  int validate() {
    fs::path path = protocol_path();
    Protocol p = load_protocol(path);
    if (int rc = check_protocol(p, path); rc != kExitOk) return rc;
    if (!opts_.report) out_ << path.string() << ": well-formed, nprocs " << p.num_procs << '\n';
    return kExitOk;
  }

  int project() {
    fs::path path = protocol_path();
    Protocol p = load_protocol(path);
    if (int rc = check_protocol(p, path); rc != kExitOk) return rc;
    ProjectionResult proj = project_all(p, instantiation(p));
    fs::path dir = opts_.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t r = 0; r < proj.locals.size(); ++r) {
      fs::path file = dir / ("rank" + std::to_string(r) + ".clt");
      std::ofstream os(file);
      os << print_local_type_file(
          {static_cast<std::int64_t>(r), p.num_procs, proj.locals[r]});
      if (!os) throw UsageError("cannot write " + file.string());
      if (!opts_.report) out_ << file.string() << '\n';
    }
    return kExitOk;
  }

  int verify() {
    with_program_ = true;
    fs::path program_path = this->program_path();
    fs::path path = protocol_path(opts_.files.size() > 1 ? 1 : 0);
    MiniMpiProgram prog = load_program(program_path);
    Protocol p = load_protocol(path);
    if (int rc = check_protocol(p, path); rc != kExitOk) return rc;
    CheckReport report = check_compliance(prog, p, instantiation(p), extra_bindings(p));
    for (const auto& d : report.program) {
      if (d.code == "unbound-param") throw UsageError(d.message);
      emit(d, "*", program_path);
    }
    for (const auto& r : report.ranks) {
      for (const auto& d : r.diagnostics) {
        Diagnostic shown = d;
        shown.message = "rank " + std::to_string(r.rank) + ": [" + d.code + "] " + d.message;
        err_ << render(shown, program_path.string()) << '\n';
        if (opts_.report) out_ << render_report_line(d, std::to_string(r.rank)) << '\n';
      }
    }
    if (!report.compliant()) return kExitFailed;
    if (!opts_.report) {
      out_ << program_path.string() << ": compliant at all " << report.ranks.size() << " ranks\n";
    }
    return kExitOk;
  }

  int simulate() {
    ExploreOptions eo;
    eo.state_limit = opts_.state_limit.value_or(manifest_.state_limit.value_or(eo.state_limit));
    int max_iters = opts_.max_loop_iters.value_or(manifest_.max_loop_iters.value_or(2));
    if (max_iters < 0) throw UsageError("--max-loop-iters must be non-negative");

    Verdict verdict;
    if (!opts_.program.empty()) {
      with_program_ = true;
      fs::path program_path = opts_.program;
      MiniMpiProgram prog = load_program(program_path);
      std::int64_t nprocs = 0;
      Env env = all_bindings();
      if (opts_.nprocs) {
        nprocs = *opts_.nprocs;
      } else {
        fs::path path = protocol_path();
        Protocol p = load_protocol(path);
        nprocs = p.num_procs;
      }
      if (nprocs <= kMinProcsExclusive || nprocs >= kMaxProcsExclusive) {
        throw UsageError("nprocs " + std::to_string(nprocs) + " out of range");
      }
      for (const auto& name : prog.params) {
        if (!env.contains(name)) throw UsageError("program parameter " + name + " has no binding");
      }
      verdict = explore_program_tapes(prog, env, nprocs, max_iters, eo);
    } else {
      verdict = explore_all_tapes(load_locals(), max_iters, eo);
    }
    return render_verdict(verdict);
  }

 private:
  fs::path protocol_path(std::size_t index = 0) const {
    if (opts_.files.size() > index) return opts_.files[index];
    if (manifest_.protocol) return *manifest_.protocol;
    throw UsageError("no protocol file given");
  }

  fs::path program_path() const {
    if (!opts_.program.empty()) return opts_.program;
    if (opts_.files.size() > 1) return opts_.files[0];
    if (manifest_.program) return *manifest_.program;
    throw UsageError("no program file given");
  }

  [[noreturn]] void syntax_error(const SyntaxError& e, const fs::path& file) {
    Diagnostic d{"syntax-error", e.detail(), e.loc(), {}};
    std::string msg = e.what();
    err_ << file.string() << ":" << msg << '\n';
    if (opts_.report) out_ << render_report_line(d, "*") << '\n';
    throw Reported{};
  }

  Protocol load_protocol(const fs::path& path) {
    try {
      return parse_protocol(read_file(path));
    } catch (const SyntaxError& e) {
      syntax_error(e, path);
    }
  }

  MiniMpiProgram load_program(const fs::path& path) {
    try {
      return parse_program(read_file(path));
    } catch (const SyntaxError& e) {
      syntax_error(e, path);
    }
  }

  std::vector<LocalType> load_locals() {
    std::vector<fs::path> files(opts_.files.begin(), opts_.files.end());
    if (files.empty() && manifest_.protocol) files.push_back(*manifest_.protocol);
    if (files.empty()) throw UsageError("no protocol or local type files given");

    if (files.size() == 1 && files[0].extension() != ".clt") {
      Protocol p = load_protocol(files[0]);
      if (check_protocol(p, files[0]) != kExitOk) throw Reported{};
      return project_all(p, instantiation(p)).locals;
    }

    std::vector<std::optional<LocalType>> locals(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
      LocalTypeFile f;
      try {
        f = parse_local_type_file(read_file(files[i]));
      } catch (const SyntaxError& e) {
        syntax_error(e, files[i]);
      }
      auto n = static_cast<std::int64_t>(files.size());
      if (f.num_procs && *f.num_procs != n) {
        throw UsageError(files[i].string() + " declares nprocs " + std::to_string(*f.num_procs) +
                         " but " + std::to_string(n) + " files were given");
      }
      std::size_t r = f.rank ? static_cast<std::size_t>(*f.rank) : i;
      if (f.rank && (*f.rank < 0 || *f.rank >= n)) {
        throw UsageError(files[i].string() + ": rank out of range");
      }
      if (locals[r]) throw UsageError(files[i].string() + ": rank " + std::to_string(r) + " given twice");
      locals[r] = f.type;
    }
    std::vector<LocalType> out;
    for (auto& l : locals) out.push_back(*l);
    return out;
  }

  Env all_bindings() const {
    Env env(manifest_.bindings.begin(), manifest_.bindings.end());
    for (const auto& [k, v] : flag_bindings_) env.insert_or_assign(k, v);
    return env;
  }

  // Bindings that name no binder are left for the program. Without a
  // program, flags are passed through so misspelt names are reported.
  Instantiation instantiation(const Protocol& p) const {
    Instantiation inst;
    Env all = all_bindings();
    for (const auto& b : p.binders) {
      if (auto it = all.find(b.name); it != all.end()) inst.values.insert_or_assign(b.name, it->second);
    }
    if (!with_program_) {
      for (const auto& [k, v] : flag_bindings_) inst.values.insert_or_assign(k, v);
    }
    return inst;
  }

  Env extra_bindings(const Protocol& p) const {
    Env env = all_bindings();
    for (const auto& b : p.binders) env.erase(b.name);
    return env;
  }

  void emit(const Diagnostic& d, std::string_view rank, const fs::path& file) {
    err_ << render(d, file.string()) << '\n';
    if (opts_.report) out_ << render_report_line(d, rank) << '\n';
  }

  int check_protocol(const Protocol& p, const fs::path& path) {
    Instantiation inst = instantiation(p);
    WfReport wf = check_wf(p, inst);
    bool usage = false;
    for (const auto& d : wf.diagnostics) {
      if (d.code == "missing-binding") usage = true;
      emit(d, "*", path);
    }
    if (usage) {
      err_ << "bind every parameter with --param NAME=VALUE or a manifest\n";
      return kExitUsage;
    }
    return wf.ok() ? kExitOk : kExitFailed;
  }

  int render_verdict(const Verdict& v) {
    if (const auto* done = std::get_if<AllDone>(&v)) {
      if (!opts_.report) {
        out_ << "all done: " << done->tapes << " tapes, " << done->states << " states\n";
      }
      return kExitOk;
    }
    if (const auto* dl = std::get_if<Deadlock>(&v)) {
      err_ << "deadlock on tape " << to_string(dl->tape) << " after " << dl->steps.size()
           << " steps\n";
      for (const auto& b : dl->blocked) {
        std::string what = b.head ? "blocked at " + to_string(*b.head)
                                  : std::string("waiting for a collective decision");
        err_ << "  rank " << b.rank << ": " << what << '\n';
        if (opts_.report) {
          out_ << render_report_line({"deadlock", what, {}, {}}, std::to_string(b.rank)) << '\n';
        }
      }
      if (!opts_.witness.empty()) {
        std::ofstream os(opts_.witness);
        write_witness(os, *dl);
        if (!os) throw UsageError("cannot write " + opts_.witness);
      }
      return kExitFailed;
    }
    const auto& ex = std::get<StateSpaceExceeded>(v);
    std::string msg = "explored more than " + std::to_string(ex.limit) + " states on tape " +
                      to_string(ex.tape);
    err_ << "state space exceeded: " << msg << '\n';
    if (opts_.report) {
      out_ << render_report_line({"state-space-exceeded", msg, {}, {}}, "*") << '\n';
    }
    return kExitFailed;
  }

  const Options& opts_;
  std::ostream& out_;
  std::ostream& err_;
  Manifest manifest_;
  std::map<std::string, std::int64_t> flag_bindings_;
  bool with_program_ = false;
};

void common_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--param", o.params, "Parameter binding NAME=VALUE (repeatable)");
  cmd->add_option("--manifest", o.manifest, "Flat key=value file with paths and bindings");
  cmd->add_flag("--report", o.report, "Print rank:loc:code:message lines to stdout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Communication types for message-passing programs", "commtype"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand("validate", "Check that a protocol is well-formed");
  validate->add_option("protocol", o.files, "Protocol file")->expected(0, 1);
  common_options(validate, o);

  auto* project = app.add_subcommand("project", "Write the local type of every rank");
  project->add_option("protocol", o.files, "Protocol file")->expected(0, 1);
  project->add_option("--out", o.out_dir, "Output directory");
  common_options(project, o);

  auto* verify = app.add_subcommand("verify", "Check a MiniMPI program against a protocol");
  verify->add_option("files", o.files, "PROGRAM PROTOCOL")->expected(0, 2);
  verify->add_option("--program", o.program, "MiniMPI program");
  common_options(verify, o);

  auto* simulate = app.add_subcommand("simulate", "Search every interleaving for deadlocks");
  simulate->add_option("files", o.files, "Protocol file, or one local type file per rank");
  simulate->add_option("--program", o.program, "Simulate a MiniMPI program's erased traces");
  simulate->add_option("--nprocs", o.nprocs, "Process count for --program without a protocol");
  simulate->add_option("--max-loop-iters", o.max_loop_iters, "Iterations per loop visit (default 2)");
  simulate->add_option("--state-limit", o.state_limit, "States explored per tape (default 1000000)");
  simulate->add_option("--witness", o.witness, "Write a deadlock witness here");
  common_options(simulate, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    Session s(o, out, err);
    if (*validate) return s.validate();
    if (*project) return s.project();
    if (*verify) return s.verify();
    return s.simulate();
  } catch (const Reported&) {
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace commtype::cli
